"""Gaussian-mixture predictive distributions and empirical prediction intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..gp_exact import factorize, predict
from ..sparse import sparse_predict

_CHUNK = 2_000_000  # samples drawn per block in prediction_interval


@dataclass(frozen=True)
class PredictiveMixture:
    """Equally weighted components: ``means[b, i]``, ``variances[b, i]`` for draw b and point i."""

    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.means, dtype=float))
        v = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if m.shape != v.shape:
            raise ValueError("means and variances must have the same shape")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("component variances must be finite and nonnegative")
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def n_points(self) -> int:
        return self.means.shape[1]

    def mean(self) -> np.ndarray:
        return self.means.mean(axis=0)

    def variance(self) -> np.ndarray:
        """Average within-component variance plus the spread of component means."""
        spread = self.means.var(axis=0) if self.n_components > 1 else np.zeros(self.n_points)
        return self.variances.mean(axis=0) + spread

    def subset(self, idx) -> "PredictiveMixture":
        return PredictiveMixture(self.means[:, idx], self.variances[:, idx])


def predictive_mixture(thetas, data, Wstar, inducing=None, method=None) -> PredictiveMixture:
    """One plug-in predictive per hyperparameter draw (exact, or sparse if ``inducing`` is given)."""
    means, variances = [], []
    for th in thetas:
        if inducing is None:
            m, v = predict(factorize(th, data), Wstar)
        else:
            m, v = sparse_predict(th, inducing, data, Wstar, method)
        means.append(m)
        variances.append(v)
    return PredictiveMixture(np.asarray(means), np.asarray(variances))


def order_statistic_indices(M: int, level: float = 0.95) -> tuple[int, int]:
    """1-based ranks ``ceil(a M)`` and ``ceil((1 - a) M)`` with ``a = (1 - level) / 2``."""
    a = (1.0 - level) / 2.0
    # rounding guards against a*M landing a hair above an integer
    lo = math.ceil(round(a * M, 9))
    hi = math.ceil(round((1.0 - a) * M, 9))
    return max(lo, 1), min(hi, M)


def prediction_interval(mixture: PredictiveMixture, level: float = 0.95, M: int = 10000,
                        seed=None) -> np.ndarray:
    """Empirical central interval per point from ``M`` mixture samples; returns ``(n, 2)``."""
    if M < 100:
        raise ValueError("at least 100 samples are required")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    lo, hi = order_statistic_indices(M, level)
    B, n = mixture.means.shape
    sd = np.sqrt(mixture.variances)
    out = np.empty((n, 2))
    step = max(1, _CHUNK // M)
    for s in range(0, n, step):
        cols = np.arange(s, min(s + step, n))
        comp = rng.integers(0, B, size=(M, cols.size))
        draws = mixture.means[comp, cols] + sd[comp, cols] * rng.standard_normal((M, cols.size))
        # only the two order statistics are needed, a partial sort suffices
        part = np.partition(draws, [lo - 1, hi - 1], axis=0)
        out[cols, 0] = part[lo - 1]
        out[cols, 1] = part[hi - 1]
    return out


def gaussian_interval(mean, var, level: float = 0.95) -> np.ndarray:
    """Closed-form interval for a single Gaussian predictive (plug-in estimates)."""
    z = stats.norm.ppf(0.5 + level / 2.0)
    sd = np.sqrt(np.asarray(var, dtype=float))
    mean = np.asarray(mean, dtype=float)
    return np.column_stack([mean - z * sd, mean + z * sd])
