"""Level covariance matrices and the representative latent space.

A single latent matrix ``Z*`` summarizes a set of posterior latent draws by
minimizing the average Frobenius distance between level covariance
matrices,

    J(Z) = (1/B) sum_b || k(Z_b) - k(Z) ||_F,   k(Z)[a, b] = exp(-|z_a - z_b|^2 / 2),

over the entries of ``Z`` left free by the constrained frame (row ``i < d``
is zero from column ``i`` on).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from .kernel import latent_from_raw

SMOOTH_SWITCH = 1e-8


def level_cov(Z) -> np.ndarray:
    """L x L matrix of exp(-0.5 * squared latent distance) between levels."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    diff = Z[:, None, :] - Z[None, :, :]
    K = np.exp(-0.5 * np.einsum("abr,abr->ab", diff, diff))
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return K


def free_mask(L: int, d: int) -> np.ndarray:
    """True where ``Z[l, r]`` is a free coordinate of the constrained frame."""
    rows = np.arange(L)[:, None]
    cols = np.arange(d)[None, :]
    return cols < rows


def canonicalize(Z, tol: float = 1e-12) -> np.ndarray:
    """Flip column signs so that the first clearly nonzero entry of each column is positive."""
    Z = np.array(Z, dtype=float, copy=True)
    for r in range(Z.shape[1]):
        nz = np.flatnonzero(np.abs(Z[:, r]) > tol)
        if nz.size and Z[nz[0], r] < 0:
            Z[:, r] = -Z[:, r]
    return Z + 0.0


class _Objective:
    def __init__(self, Ks: np.ndarray, L: int, d: int, squared: bool = False):
        self.Ks = Ks
        self.mask = free_mask(L, d)
        self.L, self.d = L, d
        self.squared = squared

    def unpack(self, u) -> np.ndarray:
        Z = np.zeros((self.L, self.d))
        Z[self.mask] = u
        return Z

    def value(self, Z) -> float:
        D = level_cov(Z)[None] - self.Ks
        f = np.sqrt(np.einsum("bij,bij->b", D, D))
        return float(np.mean(f ** 2) if self.squared else np.mean(f))

    def __call__(self, u):
        Z = self.unpack(u)
        K = level_cov(Z)
        D = K[None] - self.Ks
        f = np.sqrt(np.einsum("bij,bij->b", D, D))
        if self.squared:
            val = float(np.mean(f ** 2))
            G = 2.0 * D.mean(axis=0)
        else:
            val = float(np.mean(f))
            # d|D|_F / dD = D / |D|_F, zero at an exact match
            w = np.divide(1.0, f, out=np.zeros_like(f), where=f > 0)
            G = np.einsum("b,bij->ij", w, D) / len(f)
        W = G * K
        W = 0.5 * (W + W.T)
        gZ = -2.0 * (W.sum(axis=1)[:, None] * Z - W @ Z)
        return val, gZ[self.mask]


@dataclass
class RepresentativeLatent:
    Z: np.ndarray
    objective: float
    traces: list = field(default_factory=list)

    @property
    def K(self) -> np.ndarray:
        return level_cov(self.Z)


def medoid_index(Ks: np.ndarray) -> int:
    """Draw whose covariance matrix has the smallest mean Frobenius distance to all others."""
    B = Ks.shape[0]
    flat = Ks.reshape(B, -1)
    sq = np.einsum("bi,bi->b", flat, flat)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * flat @ flat.T, 0.0)
    return int(np.argmin(np.sqrt(D2).mean(axis=1)))


def representative_latent(Z_draws, d: int | None = None, restarts: int = 4, seed=None,
                          max_iters: int = 1000) -> RepresentativeLatent:
    """Multi-start minimization of the average covariance discrepancy.

    The first start is the medoid draw mapped into the constrained frame,
    the rest are prior draws. The returned objective never exceeds that of
    any start.
    """
    draws = [np.atleast_2d(np.asarray(Z, dtype=float)) for Z in Z_draws]
    if not draws:
        raise ValueError("at least one latent draw is required")
    L, d0 = draws[0].shape
    if any(Z.shape != (L, d0) for Z in draws):
        raise ValueError("all latent draws must share the same shape")
    d = d0 if d is None else int(d)
    if d > d0:
        draws = [np.hstack([Z, np.zeros((L, d - d0))]) for Z in draws]
    elif d < d0:
        raise ValueError(f"target dimension {d} is below the draw dimension {d0}")
    Ks = np.stack([level_cov(Z) for Z in draws])
    obj = _Objective(Ks, L, d)
    rng = np.random.default_rng(seed)
    starts = [latent_from_raw(draws[medoid_index(Ks)])]
    for _ in range(max(restarts, 1) - 1):
        starts.append(latent_from_raw(rng.normal(0.0, 1.0 / math.sqrt(L), size=(L, d))))

    traces = []
    best_Z, best_val = None, math.inf
    for Z0 in starts:
        u0 = Z0[obj.mask]
        v0 = obj.value(Z0)
        u, ok, msg = u0, True, "start already optimal"
        if u0.size and v0 > 0:
            res = minimize(obj, u0, jac=True, method="L-BFGS-B",
                           options={"maxiter": max_iters, "gtol": 1e-12, "ftol": 1e-15})
            u, ok, msg = res.x, bool(res.success), str(res.message)
            if obj.value(obj.unpack(u)) < SMOOTH_SWITCH:
                # same minimizers, smooth near zero
                sq = _Objective(Ks, L, d, squared=True)
                res = minimize(sq, u, jac=True, method="L-BFGS-B",
                               options={"maxiter": max_iters, "gtol": 1e-14, "ftol": 1e-20})
                if obj.value(obj.unpack(res.x)) <= obj.value(obj.unpack(u)):
                    u = res.x
        Z = obj.unpack(u)
        val = obj.value(Z)
        if val > v0:
            Z, val = Z0, v0
        traces.append({"start_objective": v0, "objective": val, "converged": ok, "message": msg})
        if val < best_val:
            best_Z, best_val = Z, val
    if best_Z is None or not math.isfinite(best_val):
        raise RuntimeError(f"representative latent optimization failed: {traces}")
    return RepresentativeLatent(canonicalize(best_Z), best_val, traces)


def latent_table(Z, labels, kind: str, draw: int = 0) -> pd.DataFrame:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    cols = {"kind": kind, "draw": draw, "level": list(labels)}
    for r in range(Z.shape[1]):
        cols[f"z{r + 1}"] = Z[:, r]
    return pd.DataFrame(cols)


def export_latents(model, variable: str, representative: dict | None = None) -> pd.DataFrame:
    """Latent coordinates of one qualitative variable as a long table.

    Columns: ``kind`` (``map``, ``draw`` or ``representative``), ``draw``,
    ``level``, ``z1..zd``. A fitted point estimate yields one ``map`` block;
    a posterior yields one block per draw followed by the representative
    space (computed with ``representative`` keyword options).
    """
    space = model.space
    names = [q.name for q in space.qual]
    if variable not in names:
        raise KeyError(f"unknown qualitative variable {variable!r}; expected one of {names}")
    j = names.index(variable)
    labels = space.qual[j].levels
    draws = model.latent_draws(j)
    if len(draws) == 1 and not model.is_bayes:
        return latent_table(draws[0], labels, "map")
    frames = [latent_table(Z, labels, "draw", b) for b, Z in enumerate(draws)]
    rep = representative_latent(draws, **(representative or {}))
    frames.append(latent_table(rep.Z, labels, "representative"))
    return pd.concat(frames, ignore_index=True)
