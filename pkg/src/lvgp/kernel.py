"""LVGP covariance: squared exponential over quantitative inputs composed with a
unit-length-scale squared exponential over per-variable latent coordinates.

Raw latent parameters are mapped to the reference frame (first level at the
origin, level ``l <= d`` confined to the first ``l - 1`` axes) by a translation
followed by a sweep of Givens rotations. Reverse-mode derivatives of every
map are provided so that likelihood gradients are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import linalg

JITTER_START = 1e-8
JITTER_MAX = 1e-4


class SingularCovarianceError(np.linalg.LinAlgError):
    """Cholesky factorization failed even after jitter escalation."""

    def __init__(self, msg: str, jitter: float):
        super().__init__(msg)
        self.jitter = jitter


# ---------------------------------------------------------------------------
# Raw -> constrained latent transform
# ---------------------------------------------------------------------------


def _givens_sweep(raw: np.ndarray):
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2:
        raise ValueError("raw latents must be an L x d matrix")
    L, d = raw.shape
    Z = raw - raw[0]
    steps = []
    for i in range(d - 1):
        p = i + 1
        if p >= L:
            break
        for j in range(i + 1, d):
            a, b = Z[p, i], Z[p, j]
            # atan2(0, 0) == 0: coincident rows leave the frame unrotated
            phi = math.atan2(b, a)
            c, s = math.cos(phi), math.sin(phi)
            zi = Z[:, i] * c + Z[:, j] * s
            zj = -Z[:, i] * s + Z[:, j] * c
            Z[:, i] = zi
            Z[:, j] = zj
            Z[p, j] = 0.0
            steps.append((i, j, p, a, b, c, s, zi.copy(), zj.copy()))
    Z += 0.0  # drop negative zeros
    return Z, steps


def latent_from_raw(raw) -> np.ndarray:
    """Map an L x d raw latent matrix to the constrained frame."""
    return _givens_sweep(raw)[0]


def latent_from_raw_vjp(raw, grad_Z) -> np.ndarray:
    """Pull a gradient with respect to the constrained latents back to ``raw``."""
    _, steps = _givens_sweep(raw)
    G = np.array(grad_Z, dtype=float, copy=True)
    for i, j, p, a, b, c, s, zi, zj in reversed(steps):
        gi, gj = G[:, i].copy(), G[:, j].copy()
        phibar = float(gi @ zj - gj @ zi)
        G[:, i] = c * gi - s * gj
        G[:, j] = s * gi + c * gj
        r2 = a * a + b * b
        if r2 > 0.0:
            G[p, i] += -phibar * b / r2
            G[p, j] += phibar * a / r2
    out = G.copy()
    out[0] = -G[1:].sum(axis=0)
    return out


@dataclass(frozen=True)
class LatentMap:
    """Raw parameters of one qualitative variable and their constrained image."""

    raw: np.ndarray

    @cached_property
    def Z(self) -> np.ndarray:
        return latent_from_raw(self.raw)

    @property
    def d(self) -> int:
        return self.raw.shape[1]

    @property
    def n_levels(self) -> int:
        return self.raw.shape[0]


# ---------------------------------------------------------------------------
# Hyperparameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HyperParams:
    mu: float
    sigma2: float
    omega: np.ndarray
    noise: float
    raw: tuple = ()
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "omega", np.atleast_1d(np.asarray(self.omega, dtype=float)))
        object.__setattr__(self, "raw", tuple(np.atleast_2d(np.asarray(r, dtype=float)) for r in self.raw))
        object.__setattr__(self, "gamma", np.atleast_1d(np.asarray(self.gamma, dtype=float)))
        if self.sigma2 <= 0 or np.any(self.omega <= 0) or self.noise < 0 or np.any(self.gamma <= 0):
            raise ValueError("positivity constraints violated")
        if len(self.gamma) != len(self.raw):
            raise ValueError("one precision per qualitative variable is required")

    @cached_property
    def latent(self) -> list[np.ndarray]:
        return [latent_from_raw(r) for r in self.raw]

    @property
    def latent_maps(self) -> list[LatentMap]:
        return [LatentMap(r) for r in self.raw]

    @property
    def n_quant(self) -> int:
        return self.omega.shape[0]

    @property
    def n_qual(self) -> int:
        return len(self.raw)

    @property
    def n_params(self) -> int:
        return 3 + self.n_quant + sum(r.size + 1 for r in self.raw)


# ---------------------------------------------------------------------------
# Point sets
# ---------------------------------------------------------------------------


@dataclass
class Points:
    """Locations at which the kernel is evaluated.

    ``coef[j]`` is an ``n x L_j`` matrix whose rows combine the level latents
    (one-hot rows for observed levels, simplex weights for inducing points).
    ``fixed[j]``, when given, replaces ``coef[j] @ Z_j`` with frozen coordinates.
    """

    x: np.ndarray
    coef: list
    fixed: list | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def coords(self, Zs: Sequence[np.ndarray]) -> list[np.ndarray]:
        out = []
        for j, Z in enumerate(Zs):
            f = None if self.fixed is None else self.fixed[j]
            out.append(f if f is not None else self.coef[j] @ Z)
        return out


def one_hot(codes, n_levels: int) -> np.ndarray:
    """Rows of the identity selected by 1-based level codes."""
    codes = np.asarray(codes, dtype=np.int64)
    E = np.zeros((codes.shape[0], n_levels))
    E[np.arange(codes.shape[0]), codes - 1] = 1.0
    return E


def points_from_data(X, T, n_levels: Sequence[int]) -> Points:
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=np.int64).reshape(X.shape[0], -1)
    return Points(X, [one_hot(T[:, j], L) for j, L in enumerate(n_levels)])


# ---------------------------------------------------------------------------
# Covariances and their reverse-mode derivatives
# ---------------------------------------------------------------------------


def _sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d = A[:, None, :] - B[None, :, :]
    return np.einsum("nmk,nmk->nm", d, d)


def cross_cov(theta: HyperParams, P1: Points, P2: Points) -> np.ndarray:
    """Noise-free kernel matrix between two point sets."""
    Zs = theta.latent
    s = (P1.x[:, None, :] - P2.x[None, :, :]) / theta.omega
    expo = np.einsum("nmk,nmk->nm", s, s)
    for C1, C2 in zip(P1.coords(Zs), P2.coords(Zs)):
        expo = expo + _sqdist(C1, C2)
    return theta.sigma2 * np.exp(-0.5 * expo)


@dataclass
class KernelGrad:
    log_sigma2: float
    log_omega: np.ndarray
    Z: list
    x1: np.ndarray | None = None
    x2: np.ndarray | None = None
    coef1: list | None = None
    coef2: list | None = None


def cross_cov_vjp(theta: HyperParams, P1: Points, P2: Points, K: np.ndarray,
                  Kbar: np.ndarray, wrt_points: bool = False) -> KernelGrad:
    """Gradient of ``sum(Kbar * K)`` for ``K = cross_cov(theta, P1, P2)``.

    Hyperparameter derivatives are with respect to log sigma^2, log omega and
    the constrained latents; ``wrt_points`` adds derivatives with respect to the
    quantitative coordinates and level coefficients of both point sets.
    """
    Zs = theta.latent
    B = Kbar * K
    om2 = theta.omega**2
    dx = P1.x[:, None, :] - P2.x[None, :, :]
    g_omega = np.einsum("nm,nmk->k", B, dx * dx) / om2
    r1 = B.sum(axis=1)
    r2 = B.sum(axis=0)
    gZ, gc1, gc2 = [], [], []
    for j, (Q1, Q2) in enumerate(zip(P1.coords(Zs), P2.coords(Zs))):
        G1 = -(r1[:, None] * Q1 - B @ Q2)
        G2 = B.T @ Q1 - r2[:, None] * Q2
        g = np.zeros_like(Zs[j])
        if P1.fixed is None or P1.fixed[j] is None:
            g += P1.coef[j].T @ G1
            if wrt_points:
                gc1.append(G1 @ Zs[j].T)
        elif wrt_points:
            gc1.append(None)
        if P2.fixed is None or P2.fixed[j] is None:
            g += P2.coef[j].T @ G2
            if wrt_points:
                gc2.append(G2 @ Zs[j].T)
        elif wrt_points:
            gc2.append(None)
        gZ.append(g)
    out = KernelGrad(float(B.sum()), g_omega, gZ)
    if wrt_points:
        out.x1 = -(r1[:, None] * P1.x - B @ P2.x) / om2
        out.x2 = (B.T @ P1.x - r2[:, None] * P2.x) / om2
        out.coef1, out.coef2 = gc1, gc2
    return out


def lvgp_cov(w, w_prime, theta: HyperParams) -> float:
    """Kernel value between two input rows given as ``(x, t)`` pairs.

    ``x`` holds the quantitative values, ``t`` the 1-based level codes.
    """
    x, t = w
    x2, t2 = w_prime
    x = np.asarray(x, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    expo = float(np.sum(((x - x2) / theta.omega) ** 2)) if x.size else 0.0
    for Z, a, b in zip(theta.latent, np.atleast_1d(t), np.atleast_1d(t2)):
        diff = Z[int(a) - 1] - Z[int(b) - 1]
        expo += float(diff @ diff)
    return theta.sigma2 * math.exp(-0.5 * expo)


def jittered_cholesky(A: np.ndarray, scale: float, start: float = JITTER_START,
                      max_jitter: float = JITTER_MAX):
    """Lower Cholesky factor of ``A + c * scale * I`` for the smallest working ``c``.

    ``c`` starts at ``start`` and grows tenfold up to ``max_jitter``.
    Returns ``(L, c)``.
    """
    levels = [0.0] if start <= 0 else []
    c = start if start > 0 else JITTER_START
    levels.append(c)
    while c * 10 <= max_jitter * (1 + 1e-9):
        c *= 10
        levels.append(c)
    n = A.shape[0]
    idx = np.diag_indices(n)
    for c in levels:
        M = A.copy()
        M[idx] += c * scale
        try:
            L = linalg.cholesky(M, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, c
    raise SingularCovarianceError(
        f"covariance matrix not positive definite with jitter up to {levels[-1]:g} x variance",
        jitter=levels[-1],
    )


def cov_matrix(W, theta: HyperParams, include_noise: bool = True,
               jitter: float = JITTER_START) -> np.ndarray:
    """N x N covariance of the rows of ``W`` (a Dataset or Points in model units).

    With ``include_noise`` the diagonal receives the noise variance plus the
    smallest jitter for which the matrix admits a Cholesky factorization.
    """
    P = W if isinstance(W, Points) else points_from_data(W.X, W.T, [r.shape[0] for r in theta.raw])
    K = cross_cov(theta, P, P)
    if not include_noise:
        return K
    base = K.copy()
    base[np.diag_indices_from(base)] += theta.noise
    _, c = jittered_cholesky(base, theta.sigma2, start=jitter)
    base[np.diag_indices_from(base)] += c * theta.sigma2
    return base
