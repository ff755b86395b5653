"""Exact GP log-likelihood, its gradient and the predictive equations.

Every solve goes through a Cholesky factor of the noisy covariance
``Sigma = K + (noise + c * sigma2) I`` where ``c`` is the jitter found by
:func:`lvgp.kernel.jittered_cholesky`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .kernel import (
    JITTER_START,
    HyperParams,
    Points,
    cross_cov,
    jittered_cholesky,
    latent_from_raw_vjp,
    points_from_data,
)
from .priors import ParamLayout, from_unconstrained

_LOG2PI = math.log(2 * math.pi)
VARIANCE_TOL = 1e-10


class InternalConsistencyError(RuntimeError):
    """A quantity that must be nonnegative came out clearly negative."""


def as_points(W, n_levels) -> Points:
    if isinstance(W, Points):
        return W
    return points_from_data(W.X, W.T, n_levels)


def _n_levels(theta: HyperParams) -> list[int]:
    return [r.shape[0] for r in theta.raw]


@dataclass(frozen=True)
class FactorizedModel:
    """Cholesky factor of Sigma(theta) and the solved residual vector."""

    theta: HyperParams
    points: Points
    y: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float

    @property
    def sigma(self) -> np.ndarray:
        K = cross_cov(self.theta, self.points, self.points)
        K[np.diag_indices_from(K)] += self.theta.noise + self.jitter * self.theta.sigma2
        return K


def factorize(theta: HyperParams, data, jitter: float = JITTER_START) -> FactorizedModel:
    P = as_points(data, _n_levels(theta))
    y = np.asarray(data.Y, dtype=float)
    K = cross_cov(theta, P, P)
    K[np.diag_indices_from(K)] += theta.noise
    L, c = jittered_cholesky(K, theta.sigma2, start=jitter)
    alpha = linalg.cho_solve((L, True), y - theta.mu, check_finite=False)
    return FactorizedModel(theta, P, y, L, alpha, c)


def _loglik_from_factor(fm: FactorizedModel) -> float:
    r = fm.y - fm.theta.mu
    n = r.shape[0]
    return float(-0.5 * r @ fm.alpha - np.log(np.diag(fm.chol)).sum() - 0.5 * n * _LOG2PI)


def log_likelihood(theta: HyperParams, data) -> float:
    """Gaussian log marginal likelihood of the observed responses."""
    return _loglik_from_factor(factorize(theta, data))


class _TrainGeometry:
    """Input differences among training points, reused across evaluations."""

    def __init__(self, P: Points):
        n = P.n
        d = P.x[:, None, :] - P.x[None, :, :]
        self.n = n
        self.d2 = (d * d).reshape(n * n, -1)
        self.codes = [np.argmax(C, axis=1) for C in P.coef]
        self.coef = P.coef

    def cov(self, theta: HyperParams) -> np.ndarray:
        expo = (self.d2 @ (1.0 / theta.omega**2)).reshape(self.n, self.n)
        for c, Z in zip(self.codes, theta.latent):
            diff = Z[:, None, :] - Z[None, :, :]
            Dl = np.einsum("abr,abr->ab", diff, diff)
            expo += Dl[c[:, None], c[None, :]]
        return theta.sigma2 * np.exp(-0.5 * expo)

    def vjp(self, theta: HyperParams, K: np.ndarray, Kbar: np.ndarray):
        B = Kbar * K
        g_omega = (self.d2.T @ B.ravel()) / theta.omega**2
        gZ = []
        for C, Z in zip(self.coef, theta.latent):
            Bl = C.T @ B @ C
            S = Bl + Bl.T
            gZ.append(S @ Z - S.sum(axis=1)[:, None] * Z)
        return float(B.sum()), g_omega, gZ


def _geometry(P: Points) -> _TrainGeometry:
    geo = P.__dict__.get("_geometry")
    if geo is None:
        geo = _TrainGeometry(P)
        P.__dict__["_geometry"] = geo
    return geo


def log_likelihood_and_grad(v, layout: ParamLayout, data, points: Points | None = None):
    """Log-likelihood and its gradient with respect to the unconstrained vector."""
    theta, _ = from_unconstrained(v, layout)
    P = points if points is not None else as_points(data, layout.n_levels)
    geo = _geometry(P)
    y = np.asarray(data.Y, dtype=float)
    K = geo.cov(theta)
    S = K.copy()
    S[np.diag_indices_from(S)] += theta.noise
    L, c = jittered_cholesky(S, theta.sigma2)
    alpha = linalg.cho_solve((L, True), y - theta.mu, check_finite=False)
    n = y.shape[0]
    ll = float(-0.5 * (y - theta.mu) @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * _LOG2PI)

    Sinv = linalg.cho_solve((L, True), np.eye(n), check_finite=False)
    W = np.outer(alpha, alpha) - Sinv
    g_sigma2, g_omega, gZs = geo.vjp(theta, K, 0.5 * W)
    half_tr = 0.5 * float(np.trace(W))

    grad = np.zeros(layout.size)
    grad[layout.i_mu] = alpha.sum()
    grad[layout.i_sigma2] = g_sigma2 + half_tr * c * theta.sigma2
    grad[layout.s_omega] = g_omega
    grad[layout.i_noise] = half_tr * (theta.noise - layout.noise_floor)
    for s, raw, gZ in zip(layout.s_raw, theta.raw, gZs):
        grad[s] = latent_from_raw_vjp(raw, gZ).ravel()
    return ll, grad


def log_likelihood_grad(theta: HyperParams, data, layout: ParamLayout | None = None) -> np.ndarray:
    """Gradient of the log-likelihood over all unconstrained parameters.

    Entries for the latent precisions are zero (they enter only through the prior).
    """
    from .priors import to_unconstrained

    layout = layout or ParamLayout.for_theta(theta, noise_floor=0.0)
    return log_likelihood_and_grad(to_unconstrained(theta, layout), layout, data)[1]


def clamp_variance(var: np.ndarray, scale: float) -> np.ndarray:
    worst = float(np.min(var)) if var.size else 0.0
    if worst < -VARIANCE_TOL * max(scale, 1.0):
        raise InternalConsistencyError(f"predictive variance {worst:g} is negative")
    return np.maximum(var, 0.0)


def predict(model: FactorizedModel, Wstar) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance of the latent function at the query rows."""
    theta = model.theta
    Ps = as_points(Wstar, _n_levels(theta))
    Ks = cross_cov(theta, Ps, model.points)
    mean = theta.mu + Ks @ model.alpha
    V = linalg.solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    var = theta.sigma2 - np.einsum("ij,ij->j", V, V)
    return mean, clamp_variance(var, theta.sigma2)
