"""Synthetic stand-in data: responses drawn from a random LVGP prior sample.

Useful for exercising the all-qualitative (materials-style) code path when
no real data set is at hand.
"""

from __future__ import annotations

import numpy as np

from ..domain import Dataset, InputSpace, QualVar, QuantVar
from ..kernel import HyperParams, cov_matrix, jittered_cholesky


def qualitative_space(n_levels, n_quant: int = 0, prefix: str = "t") -> InputSpace:
    quant = [QuantVar(f"x{i + 1}", 0.0, 1.0) for i in range(n_quant)]
    qual = [QualVar(f"{prefix}{j + 1}", [f"L{k + 1}" for k in range(L)]) for j, L in enumerate(n_levels)]
    return InputSpace(quant, qual, response="y")


def random_theta(space: InputSpace, rng, latent_dim: int = 2, noise: float = 1e-4) -> HyperParams:
    raw = tuple(rng.normal(0.0, 1.0, size=(L, min(latent_dim, L - 1))) for L in space.n_levels)
    return HyperParams(mu=0.0, sigma2=1.0, omega=np.exp(rng.normal(-1.0, 0.3, size=space.n_quant)),
                       noise=noise, raw=raw, gamma=np.ones(len(raw)))


def draw_responses(space: InputSpace, designs, seed=None, theta: HyperParams | None = None,
                   latent_dim: int = 2) -> tuple[list[Dataset], HyperParams]:
    """Jointly sample one GP realization over several designs (e.g. train and test)."""
    rng = np.random.default_rng(seed)
    theta = theta or random_theta(space, rng, latent_dim)
    X = np.concatenate([d.X for d in designs])
    T = np.concatenate([d.T for d in designs])
    U = (X - space.lower) / (space.upper - space.lower) if space.n_quant else X
    S = cov_matrix(Dataset(U, T), theta, include_noise=True)
    L, _ = jittered_cholesky(S, theta.sigma2)
    y = theta.mu + L @ rng.standard_normal(S.shape[0])
    out, start = [], 0
    for d in designs:
        out.append(d.with_responses(y[start:start + d.n]))
        start += d.n
    return out, theta
