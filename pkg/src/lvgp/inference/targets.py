"""Log-density targets in unconstrained coordinates.

Targets are plain picklable objects so that restarts and chains can run in
worker processes. Each returns ``(value, gradient)``; a covariance that
cannot be factorized yields ``(-inf, 0)``.
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from ..gp_exact import as_points, log_likelihood_and_grad
from ..kernel import SingularCovarianceError
from ..priors import ParamLayout, PriorSpec, log_prior_unconstrained
from ..sparse import SparseLayout, sparse_joint_objective_and_grad, sparse_objective_and_grad


# numerically unreachable regions count as zero density
_OUTSIDE = (SingularCovarianceError, OverflowError)
_MAX_ABS = 700.0  # exp() of anything larger overflows


def _reachable(v) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(np.all(np.isfinite(v)) and (v.size == 0 or np.max(np.abs(v)) < _MAX_ABS))


class PosteriorTarget:
    """log p(theta | data) (up to a constant) over the unconstrained theta vector.

    ``inducing``/``method`` switch the likelihood to a sparse approximation
    with inducing parameters held fixed.
    """

    def __init__(self, data, layout: ParamLayout, spec: PriorSpec, jacobian: bool = True,
                 inducing=None, method: str | None = None, likelihood_weight: float = 1.0):
        self.data = data
        self.layout = layout
        self.spec = spec
        self.jacobian = jacobian
        self.inducing = inducing
        self.method = method
        self.likelihood_weight = likelihood_weight
        self.points = as_points(data, layout.n_levels)
        self.size = layout.size

    def loglik(self, v):
        if self.inducing is None:
            return log_likelihood_and_grad(v, self.layout, self.data, points=self.points)
        return sparse_objective_and_grad(v, self.layout, self.inducing, self.data, self.method,
                                         points=self.points)

    def __call__(self, v):
        if not _reachable(v):
            return -math.inf, np.zeros(self.size)
        try:
            lp, gp = log_prior_unconstrained(v, self.layout, self.spec, jacobian=self.jacobian)
            if self.likelihood_weight == 0.0:
                return lp, gp
            ll, gl = self.loglik(v)
        except _OUTSIDE:
            return -math.inf, np.zeros(self.size)
        w = self.likelihood_weight
        return w * ll + lp, w * gl + gp


class SparseJointTarget:
    """Sparse objective plus theta prior over ``[theta, inducing parameters]``."""

    def __init__(self, data, slayout: SparseLayout, spec: PriorSpec, method: str):
        self.data = data
        self.slayout = slayout
        self.spec = spec
        self.method = method
        self.points = as_points(data, slayout.theta.n_levels)
        self.size = slayout.size

    def __call__(self, v):
        if not _reachable(v):
            return -math.inf, np.zeros(self.size)
        nt = self.slayout.theta.size
        try:
            lp, gp = log_prior_unconstrained(v[:nt], self.slayout.theta, self.spec, jacobian=False)
            ll, gl = sparse_joint_objective_and_grad(v, self.slayout, self.data, self.method,
                                                     points=self.points)
        except _OUTSIDE:
            return -math.inf, np.zeros(self.size)
        gl[:nt] += gp
        return ll + lp, gl


class FreeView:
    """Restrict a target to a subset of coordinates, holding the others fixed."""

    def __init__(self, target, base, free_mask):
        self.target = target
        self.base = np.asarray(base, dtype=float).copy()
        self.free = np.asarray(free_mask, dtype=bool)
        self.size = int(self.free.sum())

    def expand(self, u) -> np.ndarray:
        v = self.base.copy()
        v[self.free] = u
        return v

    def restrict(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float)[self.free]

    def __call__(self, u):
        val, g = self.target(self.expand(u))
        return val, g[self.free]


def resolve_fixed(fixed: Mapping | None, names: list[str], size: int):
    """Turn ``{name or index: unconstrained value}`` into a mask and value vector."""
    mask = np.ones(size, dtype=bool)
    values = np.zeros(size)
    for key, val in (fixed or {}).items():
        idx = names.index(key) if isinstance(key, str) else int(key)
        mask[idx] = False
        values[idx] = float(val)
    return mask, values


def sample_prior_unconstrained(layout: ParamLayout, spec: PriorSpec, rng) -> np.ndarray:
    """Random start: non-latent parameters from their priors, raw latents from
    Normal(0, 1/L) (precision 1) and log precisions at 0."""
    v = np.empty(layout.size)
    v[layout.i_mu] = rng.normal(spec.mu_loc, spec.mu_scale)
    v[layout.i_sigma2] = rng.normal(spec.log_sigma2_loc, spec.log_sigma2_scale)
    v[layout.s_omega] = rng.normal(spec.log_omega_loc, spec.log_omega_scale, size=layout.n_quant)
    v[layout.i_noise] = rng.normal(spec.log_noise_loc, spec.log_noise_scale)
    for s, L, d in zip(layout.s_raw, layout.n_levels, layout.latent_dims):
        v[s] = rng.normal(0.0, 1.0 / math.sqrt(L), size=L * d)
    v[layout.s_gamma] = 0.0
    return v


def theta_bounds(layout: ParamLayout) -> list[tuple[float, float]]:
    b = [(-np.inf, np.inf)] * layout.size
    b[layout.i_mu] = (-10.0, 10.0)
    b[layout.i_sigma2] = (-10.0, 8.0)
    for k in range(layout.s_omega.start, layout.s_omega.stop):
        b[k] = (-8.0, 6.0)
    b[layout.i_noise] = (-30.0, 3.0)
    for s in layout.s_raw:
        for k in range(s.start, s.stop):
            b[k] = (-10.0, 10.0)
    for k in range(layout.s_gamma.start, layout.s_gamma.stop):
        b[k] = (-10.0, 10.0)
    return b
