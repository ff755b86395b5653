"""Inducing-point approximations (FITC and VFE) for LVGP models.

Quantitative inducing coordinates are free parameters. For a qualitative
variable the m-th inducing location is a convex combination of the level
latents, ``u_m = sum_l psi[m, l] z(l)``, with simplex weights obtained from
``L - 1`` unconstrained reals by stick breaking. All N-dependent work is
O(N M^2); no N x N matrix is formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.cluster.vq import kmeans2
from scipy.special import expit

from .kernel import (
    JITTER_START,
    HyperParams,
    Points,
    SingularCovarianceError,
    cross_cov,
    cross_cov_vjp,
    jittered_cholesky,
    latent_from_raw_vjp,
)
from .gp_exact import as_points, clamp_variance
from .priors import ParamLayout, from_unconstrained

SPARSE_NOISE_FLOOR = 1e-6
METHODS = ("fitc", "vfe")
_LOG2PI = math.log(2 * math.pi)


# ---------------------------------------------------------------------------
# Stick-breaking simplex bijection
# ---------------------------------------------------------------------------


def simplex_from_unconstrained(y) -> np.ndarray:
    """Rows of ``y`` (n x (L-1)) to rows on the L-simplex; ``y = 0`` is uniform."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, K1 = y.shape
    psi = np.empty((n, K1 + 1))
    rem = np.ones(n)
    for k in range(K1):
        a = y[:, k] - math.log(K1 - k)
        psi[:, k] = rem * expit(a)
        rem = rem * expit(-a)  # avoids cancellation in 1 - sum(psi)
    psi[:, K1] = rem
    return psi


def simplex_to_unconstrained(psi) -> np.ndarray:
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    n, K = psi.shape
    y = np.empty((n, K - 1))
    # tail sums rather than 1 - cumsum keep the round trip accurate near the faces
    tail = np.cumsum(psi[:, ::-1], axis=1)[:, ::-1]
    for k in range(K - 1):
        y[:, k] = np.log(psi[:, k]) - np.log(tail[:, k + 1]) + math.log(K - 1 - k)
    return y


def simplex_vjp(y, psi_bar) -> np.ndarray:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, K1 = y.shape
    zs, rems = [], []
    rem = np.ones(n)
    for k in range(K1):
        a = y[:, k] - math.log(K1 - k)
        z = expit(a)
        zs.append(z)
        rems.append(rem)
        rem = rem * expit(-a)
    ybar = np.empty_like(y)
    rem_bar = np.array(psi_bar[:, K1], dtype=float)
    for k in range(K1 - 1, -1, -1):
        z, r = zs[k], rems[k]
        xb = psi_bar[:, k]
        z_bar = xb * r - rem_bar * r
        ybar[:, k] = z_bar * z * (1.0 - z)
        rem_bar = xb * z + rem_bar * (1.0 - z)
    return ybar


# ---------------------------------------------------------------------------
# Inducing sets
# ---------------------------------------------------------------------------


def inducing_from_weights(psi, Z) -> np.ndarray:
    """Convex combinations of the level latents (M x d)."""
    return np.asarray(psi, dtype=float) @ np.asarray(Z, dtype=float)


@dataclass
class InducingSet:
    """M inducing points: quantitative coordinates plus per-variable simplex weights.

    With ``frozen_coords`` set, the qualitative coordinates are held at those
    values instead of following the current latents through ``weights``.
    """

    x: np.ndarray
    weights: list
    frozen_coords: list | None = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.weights = [np.atleast_2d(np.asarray(w, dtype=float)) for w in self.weights]
        for w in self.weights:
            if w.shape[0] != self.x.shape[0]:
                raise ValueError("weight rows must match the number of inducing points")
            if np.any(w < -1e-12) or np.any(w > 1 + 1e-12) or np.any(np.abs(w.sum(axis=1) - 1) > 1e-10):
                raise ValueError("inducing weights must lie on the probability simplex")

    @property
    def M(self) -> int:
        return self.x.shape[0]

    def coords(self, Zs) -> list[np.ndarray]:
        if self.frozen_coords is not None:
            return [np.asarray(c, dtype=float) for c in self.frozen_coords]
        return [inducing_from_weights(w, Z) for w, Z in zip(self.weights, Zs)]

    def points(self) -> Points:
        return Points(self.x, self.weights, self.frozen_coords)

    def freeze(self, theta: HyperParams) -> "InducingSet":
        """Copy whose qualitative coordinates are pinned at their current values."""
        return InducingSet(self.x.copy(), [w.copy() for w in self.weights],
                           [inducing_from_weights(w, Z) for w, Z in zip(self.weights, theta.latent)])

    def to_dict(self) -> dict:
        out = {"M": self.M, "x": self.x.tolist(), "weights": [w.tolist() for w in self.weights]}
        if self.frozen_coords is not None:
            out["frozen_coords"] = [np.asarray(c).tolist() for c in self.frozen_coords]
        return out

    @classmethod
    def from_dict(cls, d) -> "InducingSet":
        fc = d.get("frozen_coords")
        return cls(np.asarray(d["x"], float).reshape(int(d["M"]), -1),
                   [np.asarray(w, float) for w in d["weights"]],
                   None if fc is None else [np.asarray(c, float) for c in fc])


class SparseLayout:
    """Unconstrained vector ``[theta..., inducing x (M*I), stick params per variable]``."""

    def __init__(self, layout: ParamLayout, M: int):
        self.theta = layout
        self.M = int(M)
        start = layout.size
        self.s_x = slice(start, start + self.M * layout.n_quant)
        start = self.s_x.stop
        self.s_w = []
        for L in layout.n_levels:
            self.s_w.append(slice(start, start + self.M * (L - 1)))
            start += self.M * (L - 1)
        self.size = start

    def pack(self, v_theta, inducing: InducingSet) -> np.ndarray:
        v = np.empty(self.size)
        v[: self.theta.size] = v_theta
        v[self.s_x] = inducing.x.ravel()
        for s, w in zip(self.s_w, inducing.weights):
            v[s] = simplex_to_unconstrained(np.clip(w, 1e-300, None)).ravel()
        return v

    def unpack(self, v) -> tuple[np.ndarray, InducingSet]:
        v = np.asarray(v, dtype=float)
        x = v[self.s_x].reshape(self.M, self.theta.n_quant)
        w = [simplex_from_unconstrained(v[s].reshape(self.M, L - 1))
             for s, L in zip(self.s_w, self.theta.n_levels)]
        return v[: self.theta.size], InducingSet(x, w)


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


@dataclass
class SparseObjectiveParts:
    """Dense pieces of the sparse objective (only for small N, used in checks)."""

    Q_NN: np.ndarray
    G: np.ndarray
    T: np.ndarray


def objective_parts(theta: HyperParams, inducing: InducingSet, data, method: str) -> SparseObjectiveParts:
    P = as_points(data, [r.shape[0] for r in theta.raw])
    U = inducing.points()
    Kmm = cross_cov(theta, U, U)
    Lm, _ = jittered_cholesky(Kmm, theta.sigma2)
    Kmn = cross_cov(theta, U, P)
    V = linalg.solve_triangular(Lm, Kmn, lower=True)
    Q = V.T @ V
    Knn = cross_cov(theta, P, P)
    s = theta.noise + JITTER_START * theta.sigma2
    if method == "fitc":
        G = np.diag(s + np.diag(Knn - Q))
        T = np.zeros_like(Q)
    else:
        G = s * np.eye(Q.shape[0])
        T = Knn - Q
    return SparseObjectiveParts(Q, G, T)


def _check_method(method: str) -> str:
    m = method.lower()
    if m not in METHODS:
        raise ValueError(f"unknown sparse method {method!r}; expected one of {METHODS}")
    return m


class _Factor:
    """Shared factorizations for objective and prediction."""

    def __init__(self, theta: HyperParams, U: Points, P: Points, y, method: str):
        self.theta = theta
        self.U, self.P = U, P
        self.method = method
        self.Kmm = cross_cov(theta, U, U)
        self.Lm, self.cm = jittered_cholesky(self.Kmm, theta.sigma2)
        self.Kmn = cross_cov(theta, U, P)
        self.V = linalg.solve_triangular(self.Lm, self.Kmn, lower=True, check_finite=False)
        self.qdiag = np.einsum("mn,mn->n", self.V, self.V)
        self.s = theta.noise + JITTER_START * theta.sigma2
        if method == "fitc":
            self.g = self.s + theta.sigma2 - self.qdiag
        else:
            self.g = np.full(P.n, self.s)
        if np.any(self.g <= 0):
            raise SingularCovarianceError("nonpositive FITC diagonal", jitter=self.cm)
        self.Vg = self.V / self.g
        M = self.V.shape[0]
        A = np.eye(M) + self.Vg @ self.V.T
        try:
            self.La = linalg.cholesky(A, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise SingularCovarianceError(str(exc), jitter=self.cm) from exc
        self.r = np.asarray(y, dtype=float) - theta.mu
        self.b = self.Vg @ self.r
        self.h = linalg.cho_solve((self.La, True), self.b, check_finite=False)


def _objective(v_theta, layout: ParamLayout, inducing: InducingSet, data, method: str,
               points: Points | None = None, wrt_inducing: bool = False, grad: bool = True):
    theta, _ = from_unconstrained(v_theta, layout)
    P = points if points is not None else as_points(data, layout.n_levels)
    U = inducing.points()
    f = _Factor(theta, U, P, data.Y, method)
    N = P.n
    c = linalg.solve_triangular(f.La, f.b, lower=True, check_finite=False)
    quad = float(f.r @ (f.r / f.g) - c @ c)
    logdet = float(np.log(f.g).sum() + 2 * np.log(np.diag(f.La)).sum())
    val = -0.5 * N * _LOG2PI - 0.5 * logdet - 0.5 * quad
    trace = 0.0
    if method == "vfe":
        trace = N * theta.sigma2 - float(f.qdiag.sum())
        val -= trace / (2 * f.s)
    if not grad:
        return val, None, None

    beta = f.r / f.g - f.Vg.T @ f.h
    R = linalg.solve_triangular(f.La, f.Vg, lower=True, check_finite=False)
    dinv = 1.0 / f.g - np.einsum("mn,mn->n", R, R)
    gbar = 0.5 * (beta * beta - dinv)
    AinvVg = linalg.solve_triangular(f.La, R, lower=True, trans="T", check_finite=False)
    Vbar = np.outer(f.V @ beta, beta) - AinvVg
    sbar = float(gbar.sum())
    if method == "fitc":
        Vbar -= 2.0 * f.V * gbar
        sig_direct = sbar
    else:
        Vbar += f.V / f.s
        sig_direct = -N / (2 * f.s)
        sbar += trace / (2 * f.s**2)
    Kmn_bar = linalg.solve_triangular(f.Lm, Vbar, lower=True, trans="T", check_finite=False)
    Bm = linalg.solve_triangular(f.Lm, f.V, lower=True, trans="T", check_finite=False)
    Kmm_bar = -0.5 * Kmn_bar @ Bm.T
    Kmm_bar = 0.5 * (Kmm_bar + Kmm_bar.T)

    kg1 = cross_cov_vjp(theta, U, P, f.Kmn, Kmn_bar, wrt_points=wrt_inducing)
    kg2 = cross_cov_vjp(theta, U, U, f.Kmm, Kmm_bar, wrt_points=wrt_inducing)

    g = np.zeros(layout.size)
    g[layout.i_mu] = beta.sum()
    sig_total = sig_direct + f.cm * float(np.trace(Kmm_bar)) + JITTER_START * sbar
    g[layout.i_sigma2] = kg1.log_sigma2 + kg2.log_sigma2 + theta.sigma2 * sig_total
    g[layout.s_omega] = kg1.log_omega + kg2.log_omega
    g[layout.i_noise] = sbar * (theta.noise - layout.noise_floor)
    for s, raw, z1, z2 in zip(layout.s_raw, theta.raw, kg1.Z, kg2.Z):
        g[s] = latent_from_raw_vjp(raw, z1 + z2).ravel()

    g_ind = None
    if wrt_inducing:
        gx = kg1.x1 + kg2.x1 + kg2.x2
        gw = []
        for j in range(len(inducing.weights)):
            if kg1.coef1[j] is None:
                gw.append(np.zeros_like(inducing.weights[j]))
            else:
                gw.append(kg1.coef1[j] + kg2.coef1[j] + kg2.coef2[j])
        g_ind = (gx, gw)
    return val, g, g_ind


def sparse_objective(theta: HyperParams, inducing: InducingSet, data, method: str = "fitc") -> float:
    """FITC / VFE approximate log marginal likelihood at fixed hyperparameters."""
    from .priors import to_unconstrained

    method = _check_method(method)
    layout = ParamLayout.for_theta(theta, noise_floor=0.0)
    return _objective(to_unconstrained(theta, layout), layout, inducing, data, method, grad=False)[0]


def sparse_objective_and_grad(v_theta, layout: ParamLayout, inducing: InducingSet, data,
                              method: str = "fitc", points: Points | None = None):
    """Objective and gradient over the unconstrained hyperparameters only."""
    val, g, _ = _objective(v_theta, layout, inducing, data, _check_method(method), points=points)
    return val, g


def sparse_joint_objective_and_grad(v, slayout: SparseLayout, data, method: str = "fitc",
                                    points: Points | None = None):
    """Objective and gradient over hyperparameters and inducing parameters jointly."""
    method = _check_method(method)
    v = np.asarray(v, dtype=float)
    v_theta, inducing = slayout.unpack(v)
    val, g, (gx, gw) = _objective(v_theta, slayout.theta, inducing, data, method,
                                  points=points, wrt_inducing=True)
    out = np.empty(slayout.size)
    out[: slayout.theta.size] = g
    out[slayout.s_x] = gx.ravel()
    for s, L, w_bar in zip(slayout.s_w, slayout.theta.n_levels, gw):
        y = v[s].reshape(slayout.M, L - 1)
        out[s] = simplex_vjp(y, w_bar).ravel()
    return val, out


def sparse_predict(theta: HyperParams, inducing: InducingSet, data, Wstar, method: str = "fitc"):
    """Predictive mean and latent variance under the inducing-point approximation."""
    method = _check_method(method)
    nl = [r.shape[0] for r in theta.raw]
    P = as_points(data, nl)
    f = _Factor(theta, inducing.points(), P, data.Y, method)
    Ps = as_points(Wstar, nl)
    Kms = cross_cov(theta, f.U, Ps)
    Vs = linalg.solve_triangular(f.Lm, Kms, lower=True, check_finite=False)
    mean = theta.mu + Vs.T @ f.h
    Ws = linalg.solve_triangular(f.La, Vs, lower=True, check_finite=False)
    var = theta.sigma2 - np.einsum("mn,mn->n", Vs, Vs) + np.einsum("mn,mn->n", Ws, Ws)
    return mean, clamp_variance(var, theta.sigma2)


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def init_inducing(data, n_levels, M: int, seed=None, eps: float = 1e-3) -> InducingSet:
    """k-means++ quantitative centers and near one-hot weights on frequent level patterns.

    Weights put ``1 - eps`` on the pattern's level and spread ``eps`` evenly so
    that the stick-breaking parameters stay finite.
    """
    rng = np.random.default_rng(seed)
    X = np.asarray(data.X, dtype=float)
    if X.shape[1]:
        jitter = 1e-9 * rng.standard_normal(X.shape)
        centers, _ = kmeans2(X + jitter, M, minit="++", seed=rng)
    else:
        centers = np.zeros((M, 0))
    T = np.asarray(data.T)
    weights = []
    if T.shape[1]:
        patterns, counts = np.unique(T, axis=0, return_counts=True)
        order = np.lexsort((rng.permutation(len(counts)), -counts))
        chosen = patterns[order[np.arange(M) % len(order)]]
        for j, L in enumerate(n_levels):
            w = np.full((M, L), eps / L)
            w[np.arange(M), chosen[:, j] - 1] += 1.0 - eps
            weights.append(w / w.sum(axis=1, keepdims=True))
    return InducingSet(centers, weights)


# ---------------------------------------------------------------------------
# Fitting entry points (implemented on top of the inference package)
# ---------------------------------------------------------------------------


def fit_sparse_map(*args, **kwargs):
    """See :func:`lvgp.inference.sparse_fit.fit_sparse_map`."""
    from .inference.sparse_fit import fit_sparse_map as _fit

    return _fit(*args, **kwargs)


def sample_sparse_posterior(*args, **kwargs):
    """See :func:`lvgp.inference.sparse_fit.sample_sparse_posterior`."""
    from .inference.sparse_fit import sample_sparse_posterior as _sample

    return _sample(*args, **kwargs)
