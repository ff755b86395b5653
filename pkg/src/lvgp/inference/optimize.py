"""Multi-start bounded quasi-Newton MAP / MLE estimation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import minimize

from ..priors import ParamLayout, PriorSpec, from_unconstrained
from .parallel import run_tasks
from .targets import FreeView, PosteriorTarget, resolve_fixed, sample_prior_unconstrained, theta_bounds

log = logging.getLogger(__name__)

_PENALTY = 1e25


class FitError(RuntimeError):
    """Every optimization restart failed."""

    def __init__(self, msg, traces):
        super().__init__(msg)
        self.traces = traces


@dataclass
class MapConfig:
    restarts: int = 8
    seed: int | None = None
    max_iters: int = 500
    gtol: float = 1e-6
    n_jobs: int = 1


@dataclass
class RestartTrace:
    start: np.ndarray
    value: float
    iterations: int
    converged: bool
    message: str
    x: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "iterations": self.iterations,
                "converged": self.converged, "message": self.message}


@dataclass
class MapFitResult:
    v: np.ndarray
    value: float
    layout: ParamLayout
    restarts: list = field(default_factory=list)
    converged: bool = False
    inducing: object = None

    @property
    def theta(self):
        return from_unconstrained(self.v, self.layout)[0]

    def summary(self) -> dict:
        return {
            "objective": self.value,
            "converged": self.converged,
            "restarts": [t.to_dict() for t in self.restarts],
        }


class _Negated:
    def __init__(self, target):
        self.target = target

    def __call__(self, u):
        val, g = self.target(u)
        if not math.isfinite(val) or not np.all(np.isfinite(g)):
            return _PENALTY, np.zeros_like(u)
        return -val, -g


def _one_restart(args):
    target, start, bounds, max_iters, gtol = args
    fun = _Negated(target)
    try:
        res = minimize(fun, start, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": max_iters, "gtol": gtol, "maxfun": 4 * max_iters})
    except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return RestartTrace(start, -math.inf, 0, False, f"failed: {exc}")
    value = -float(res.fun) if res.fun < _PENALTY else -math.inf
    return RestartTrace(start, value, int(res.nit), bool(res.success), str(res.message), res.x)


def maximize(target, starts, bounds, max_iters: int = 500, gtol: float = 1e-6, n_jobs: int = 1):
    """Run one L-BFGS-B ascent per start; returns ``(best_x, best_value, traces)``."""
    tasks = [(target, np.clip(s, [b[0] for b in bounds], [b[1] for b in bounds]), bounds, max_iters, gtol)
             for s in starts]
    traces = run_tasks(_one_restart, tasks, n_jobs)
    ok = [t for t in traces if math.isfinite(t.value) and t.x is not None]
    if not ok:
        raise FitError("all optimization restarts failed", traces)
    # ties resolve to the earliest restart so results do not depend on scheduling
    best = max(ok, key=lambda t: t.value)
    return best.x, best.value, traces


def fit_map(data, layout: ParamLayout, spec: PriorSpec = PriorSpec(), config: MapConfig = MapConfig(),
            fixed: Mapping | None = None, starts=None) -> MapFitResult:
    """Maximize the log posterior (or the likelihood under a flat spec).

    ``data`` must already be in model units (see :func:`lvgp.domain.standardize`).
    The objective is the density of the constrained hyperparameters, so no
    Jacobian term enters. ``fixed`` pins unconstrained coordinates by name or index.
    """
    target = PosteriorTarget(data, layout, spec, jacobian=False)
    mask, values = resolve_fixed(fixed, layout.names(), layout.size)
    rng = np.random.default_rng(config.seed)
    if starts is None:
        starts = [sample_prior_unconstrained(layout, PriorSpec(alpha=spec.alpha), rng)
                  for _ in range(config.restarts)]
    starts = [np.where(mask, s, values) for s in starts]
    view = FreeView(target, values, mask)
    bounds = [b for b, m in zip(theta_bounds(layout), mask) if m]
    x, val, traces = maximize(view, [view.restrict(s) for s in starts], bounds,
                              config.max_iters, config.gtol, config.n_jobs)
    for t in traces:
        log.debug("restart: value=%.6g iterations=%d %s", t.value, t.iterations, t.message)
    v = view.expand(x)
    best = max((t for t in traces if t.x is not None), key=lambda t: t.value)
    return MapFitResult(v, val, layout, traces, best.converged)
