"""MAP fitting and frozen-inducing posterior sampling for the sparse approximations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..priors import ParamLayout, PriorSpec
from ..sparse import SPARSE_NOISE_FLOOR, SparseLayout, _check_method, init_inducing
from .optimize import MapFitResult, maximize
from .sampling import PosteriorSamples, SamplerConfig, sample_posterior
from .targets import SparseJointTarget, sample_prior_unconstrained, theta_bounds

STICK_BOUND = 20.0


@dataclass
class SparseMapConfig:
    M: int = 50
    restarts: int = 8
    seed: int | None = None
    max_iters: int = 500
    gtol: float = 1e-6
    n_jobs: int = 1


def sparse_layout(n_quant: int, n_levels, latent_dims) -> ParamLayout:
    return ParamLayout(n_quant, n_levels, latent_dims, noise_floor=SPARSE_NOISE_FLOOR)


def _bounds(slayout: SparseLayout, data) -> list:
    b = theta_bounds(slayout.theta)
    X = np.asarray(data.X, dtype=float)
    lo = X.min(axis=0) - 0.5 * np.ptp(X, axis=0) if X.size else np.zeros(0)
    hi = X.max(axis=0) + 0.5 * np.ptp(X, axis=0) if X.size else np.zeros(0)
    for m in range(slayout.M):
        b += list(zip(lo, hi))
    for s in slayout.s_w:
        b += [(-STICK_BOUND, STICK_BOUND)] * (s.stop - s.start)
    return b


def fit_sparse_map(data, layout: ParamLayout, spec: PriorSpec = PriorSpec(), method: str = "fitc",
                   config: SparseMapConfig = SparseMapConfig(),
                   init_from: MapFitResult | None = None) -> MapFitResult:
    """Jointly maximize the sparse objective plus log prior over theta and the inducing set.

    ``init_from`` (for instance a FITC optimum) replaces the random starts by
    a single warm start at that fit's theta and inducing set.
    """
    method = _check_method(method)
    if not 1 <= config.M < data.n:
        raise ValueError(f"inducing count must satisfy 1 <= M < N, got M={config.M}, N={data.n}")
    slayout = SparseLayout(layout, config.M)
    target = SparseJointTarget(data, slayout, spec, method)
    rng = np.random.default_rng(config.seed)
    prior = PriorSpec(alpha=spec.alpha)
    if init_from is not None:
        if init_from.inducing is None or init_from.inducing.M != config.M:
            raise ValueError("warm start needs a sparse fit with the same inducing count")
        starts = [slayout.pack(init_from.v, init_from.inducing)]
    else:
        starts = []
        for _ in range(config.restarts):
            v_theta = sample_prior_unconstrained(layout, prior, rng)
            ind = init_inducing(data, layout.n_levels, config.M, seed=rng)
            starts.append(slayout.pack(v_theta, ind))
    bounds = _bounds(slayout, data)
    starts = [np.clip(s, [b[0] for b in bounds], [b[1] for b in bounds]) for s in starts]
    x, val, traces = maximize(target, starts, bounds, config.max_iters, config.gtol, config.n_jobs)
    v_theta, inducing = slayout.unpack(x)
    best = max((t for t in traces if t.x is not None), key=lambda t: t.value)
    return MapFitResult(v_theta, val, layout, traces, best.converged, inducing)


def sample_sparse_posterior(data, layout: ParamLayout, spec: PriorSpec, method: str, inducing,
                            config: SamplerConfig = SamplerConfig(), freeze_coords: bool = False,
                            theta_ref=None, init=None, **kwargs) -> PosteriorSamples:
    """NUTS over theta with the inducing set held fixed.

    By default the simplex weights are frozen and the qualitative inducing
    coordinates follow each draw's latents. ``freeze_coords`` pins the
    coordinates themselves at their values under ``theta_ref``.
    """
    method = _check_method(method)
    if freeze_coords:
        if theta_ref is None:
            raise ValueError("freezing inducing coordinates needs a reference theta")
        inducing = inducing.freeze(theta_ref)
    return sample_posterior(data, layout, spec, config, inducing=inducing, method=method,
                            init=init, **kwargs)
