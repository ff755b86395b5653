"""Fully Bayesian inference: NUTS over the unconstrained hyperparameters."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..priors import ParamLayout, PriorSpec, from_unconstrained
from .diagnostics import identified_scalars, summarize
from .nuts import NutsConfig, run_chain
from .parallel import run_tasks
from .targets import FreeView, PosteriorTarget, resolve_fixed, sample_prior_unconstrained

log = logging.getLogger(__name__)

DIVERGENCE_WARN_FRACTION = 0.10


class SamplerWarning(UserWarning):
    pass


@dataclass
class SamplerConfig:
    chains: int = 4
    warmup: int = 500
    draws: int = 250
    seed: int | None = None
    target_accept: float = 0.8
    max_tree_depth: int = 10
    n_jobs: int = 1

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("at least one chain is required")
        if self.draws < 1:
            raise ValueError("at least one draw per chain is required")
        if self.warmup < 0:
            raise ValueError("warmup must be nonnegative")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.max_tree_depth < 1:
            raise ValueError("max_tree_depth must be positive")

    def to_dict(self) -> dict:
        return {"chains": self.chains, "warmup": self.warmup, "draws": self.draws, "seed": self.seed,
                "target_accept": self.target_accept, "max_tree_depth": self.max_tree_depth}


@dataclass(frozen=True)
class PosteriorSamples:
    """Draws in unconstrained coordinates, row ``c * draws + i`` is iteration i of chain c."""

    v: np.ndarray
    layout: ParamLayout
    chains: int
    draws: int
    diagnostics: dict = field(default_factory=dict)
    inducing: object = None
    method: str | None = None

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] != self.layout.size:
            raise ValueError("draw array must be (B >= 1, layout.size)")
        if v.shape[0] != self.chains * self.draws:
            raise ValueError("draw count does not match chains x draws")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def B(self) -> int:
        return self.v.shape[0]

    @property
    def chain_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.chains), self.draws)

    @property
    def iteration_index(self) -> np.ndarray:
        return np.tile(np.arange(self.draws), self.chains)

    def theta(self, b: int):
        return from_unconstrained(self.v[b], self.layout)[0]

    def thetas(self) -> list:
        return [self.theta(b) for b in range(self.B)]

    def by_chain(self) -> np.ndarray:
        return self.v.reshape(self.chains, self.draws, -1)


def _chain_task(args):
    target, q0, seed_seq, cfg, names = args
    rng = np.random.default_rng(seed_seq)
    return run_chain(target, q0, rng, cfg, names)


def _initial_point(target, layout, spec, mask, values, rng, tries: int = 100):
    prior = PriorSpec(alpha=spec.alpha) if spec.flat else spec
    for _ in range(tries):
        v = sample_prior_unconstrained(layout, prior, rng)
        v = np.where(mask, v, values)
        val, g = target(v)
        if math.isfinite(val) and np.all(np.isfinite(g)):
            return v
    raise RuntimeError("could not find an initial point with finite posterior density")


def diagnostics_report(samples_v: np.ndarray, chain_results, layout: ParamLayout, chains: int,
                       draws: int, quant_names=None, qual_names=None) -> dict:
    thetas = [from_unconstrained(v, layout)[0] for v in samples_v]
    scal, names = identified_scalars(thetas, layout, quant_names, qual_names)
    per = summarize(scal.reshape(chains, draws, -1), names)
    rhats = [s["rhat"] for s in per.values() if math.isfinite(s["rhat"])]
    esses = [s["ess"] for s in per.values() if math.isfinite(s["ess"])]
    div = [int(r.divergences) for r in chain_results]
    report = {
        "chains": chains,
        "draws": draws,
        "max_rhat": max(rhats) if rhats else math.nan,
        "min_ess": min(esses) if esses else math.nan,
        "divergences": div,
        "divergence_fraction": sum(div) / float(chains * draws),
        "step_sizes": [float(r.step_size) for r in chain_results],
        "mean_accept": [float(np.mean(r.accept_stat)) for r in chain_results],
        "mean_tree_depth": [float(np.mean(r.tree_depth)) for r in chain_results],
        "gradient_evaluations": [int(r.extra.get("gradient_evaluations", 0)) for r in chain_results],
        "scalars": per,
        "warnings": [],
    }
    if report["divergence_fraction"] > DIVERGENCE_WARN_FRACTION:
        msg = (f"{sum(div)} of {chains * draws} post-warmup transitions diverged; "
               "the posterior may be poorly explored")
        report["warnings"].append(msg)
        warnings.warn(msg, SamplerWarning, stacklevel=3)
    return report


def sample_posterior(data, layout: ParamLayout, spec: PriorSpec = PriorSpec(),
                     config: SamplerConfig = SamplerConfig(), fixed: Mapping | None = None,
                     inducing=None, method: str | None = None, init=None,
                     quant_names=None, qual_names=None) -> PosteriorSamples:
    """Run ``config.chains`` independent NUTS chains and pool the post-warmup draws.

    ``data`` is in model units. The target includes the log-Jacobian of the
    unconstrained transform. With ``inducing`` the likelihood is the sparse
    objective for ``method`` with the inducing parameters held fixed.
    ``init`` optionally gives one unconstrained start per chain (or a single
    start for all); by default each chain starts from its own prior draw.
    """
    target = PosteriorTarget(data, layout, spec, jacobian=True, inducing=inducing, method=method)
    mask, values = resolve_fixed(fixed, layout.names(), layout.size)
    view = FreeView(target, values, mask)
    all_names = layout.names(quant_names, qual_names)
    free_names = [n for n, m in zip(all_names, mask) if m]

    root = np.random.SeedSequence(config.seed)
    init_seq, *chain_seqs = root.spawn(config.chains + 1)
    init_rng = np.random.default_rng(init_seq)
    if init is None:
        starts = [_initial_point(target, layout, spec, mask, values, init_rng) for _ in range(config.chains)]
    else:
        init = np.atleast_2d(np.asarray(init, dtype=float))
        starts = [np.where(mask, init[c % init.shape[0]], values) for c in range(config.chains)]

    cfg = NutsConfig(warmup=config.warmup, draws=config.draws, target_accept=config.target_accept,
                     max_depth=config.max_tree_depth)
    tasks = [(view, view.restrict(s), seq, cfg, free_names) for s, seq in zip(starts, chain_seqs)]
    results = run_tasks(_chain_task, tasks, config.n_jobs)

    v = np.concatenate([np.array([view.expand(u) for u in r.samples]) for r in results], axis=0)
    diag = diagnostics_report(v, results, layout, config.chains, config.draws, quant_names, qual_names)
    diag["config"] = config.to_dict()
    log.info("sampling done: max R-hat %.3f, min ESS %.0f, divergences %s",
             diag["max_rhat"], diag["min_ess"], diag["divergences"])
    return PosteriorSamples(v, layout, config.chains, config.draws, diag, inducing, method)
