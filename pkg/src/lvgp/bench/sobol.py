"""Monte Carlo total-effect Sobol indices (Jansen estimator)."""

from __future__ import annotations

import numpy as np


def total_sobol(func, name: str, n: int = 100_000, seed=None, lower=None, upper=None) -> float:
    """Total index of input ``name`` for an all-quantitative function.

    ``func`` is a :class:`~lvgp.bench.functions.TestFunction` (its declared
    ranges are used) or a plain callable together with ``lower``/``upper``
    and ``name`` given as a column index. Inputs are uniform on the box.
    The estimator is ``mean((f(A) - f(A_B^i))^2) / (2 Var f)``.
    """
    if hasattr(func, "inputs"):
        i = func.inputs.index(name)
        lower = np.asarray(func.lower, dtype=float)
        upper = np.asarray(func.upper, dtype=float)
        f = func.__call__
    else:
        i = int(name)
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        f = func
    rng = np.random.default_rng(seed)
    k = lower.size
    A = lower + (upper - lower) * rng.random((n, k))
    B = lower + (upper - lower) * rng.random((n, k))
    AB = A.copy()
    AB[:, i] = B[:, i]
    fA, fB, fAB = (np.asarray(f(M), dtype=float) for M in (A, B, AB))
    var = np.var(np.concatenate([fA, fB]))
    if var <= 0:
        return 0.0
    return float(np.mean((fA - fAB) ** 2) / (2.0 * var))
