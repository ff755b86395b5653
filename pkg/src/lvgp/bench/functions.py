"""Engineering test functions and their mixed-input (discretized) versions."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable, Mapping, Sequence

import numpy as np

from ..domain import Dataset, InputSpace, QualVar, QuantVar


class DomainError(ValueError):
    """Inputs outside the region where a test function is defined."""


def _cols(X, k: int) -> list[np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != k:
        raise ValueError(f"expected {k} input columns, got {X.shape[1]}")
    return [X[:, i] for i in range(k)]


def borehole(X) -> np.ndarray:
    """Water flow rate; columns (T_u, r, r_w, H_u, T_l, H_l, L, K_w)."""
    Tu, r, rw, Hu, Tl, Hl, L, Kw = _cols(X, 8)
    if np.any(r <= rw) or np.any(rw <= 0):
        raise DomainError("borehole requires 0 < r_w < r")
    lr = np.log(r / rw)
    return 2 * np.pi * Tu * (Hu - Hl) / (lr * (1 + 2 * L * Tu / (lr * rw ** 2 * Kw) + Tu / Tl))


def otl_vb1(R_b1, R_b2) -> np.ndarray:
    return 12.0 * np.asarray(R_b2) / (np.asarray(R_b1) + np.asarray(R_b2))


def otl(X) -> np.ndarray:
    """Midpoint voltage; columns (R_b1, R_b2, R_f, R_c1, R_c2, B)."""
    Rb1, Rb2, Rf, Rc1, Rc2, B = _cols(X, 6)
    if np.any(np.column_stack([Rb1, Rb2, Rf, Rc1, Rc2, B]) <= 0):
        raise DomainError("OTL circuit inputs must be positive")
    vb1 = otl_vb1(Rb1, Rb2)
    den = B * (Rc2 + 9) + Rf
    return (vb1 + 0.74) * B * (Rc2 + 9) / den + 11.35 * Rf / den + 0.74 * Rf * B * (Rc2 + 9) / (Rc1 * den)


def piston(X, variant: str = "printed") -> np.ndarray:
    """Cycle time; columns (M, S, V_0, k, P_0, T, T_0).

    ``printed`` uses ``V = S / (2k) sqrt(A^2 + 4k T P_0 / T_0)``. The
    ``literature`` variant is the form common in the simulation literature,
    ``V = S / (2k) (sqrt(A^2 + 4k T P_0 V_0 / T_0) - A)``.
    """
    M, S, V0, k, P0, T, T0 = _cols(X, 7)
    A = P0 * S + 19.62 * M - k * V0 / S
    if variant == "printed":
        disc = A ** 2 + 4 * k * (P0 / T0) * T
    elif variant == "literature":
        disc = A ** 2 + 4 * k * P0 * V0 * T / T0
    else:
        raise ValueError(f"unknown piston variant {variant!r}")
    if np.any(disc < 0):
        raise DomainError("piston discriminant is negative")
    root = np.sqrt(disc)
    V = S / (2 * k) * (root if variant == "printed" else root - A)
    return 2 * np.pi * np.sqrt(M / (k + S ** 2 * P0 * V0 / V ** 2 * T / T0))


@dataclass(frozen=True)
class TestFunction:
    """A deterministic simulator with declared input ranges.

    When ``discrete`` is non-empty, the named inputs are replaced by a single
    qualitative factor ``t`` whose levels enumerate the Cartesian grid of
    their values (first named input varying slowest).
    """

    __test__ = False  # not a pytest class

    name: str
    inputs: tuple
    lower: tuple
    upper: tuple
    fn: Callable
    discrete: tuple = ()  # ((name, grid values), ...)
    qual_name: str = "t"

    @property
    def dim(self) -> int:
        return len(self.inputs)

    def __call__(self, X) -> np.ndarray:
        return self.fn(X)

    @property
    def quant_inputs(self) -> list[str]:
        names = {n for n, _ in self.discrete}
        return [n for n in self.inputs if n not in names]

    def level_values(self) -> np.ndarray:
        """``(n_levels, n_discrete)`` grid values, row l is level l + 1."""
        grids = [g for _, g in self.discrete]
        return np.array(list(itertools.product(*grids)), dtype=float)

    @property
    def n_levels(self) -> int:
        return int(np.prod([len(g) for _, g in self.discrete])) if self.discrete else 0

    def space(self) -> InputSpace:
        idx = {n: i for i, n in enumerate(self.inputs)}
        quant = [QuantVar(n, self.lower[idx[n]], self.upper[idx[n]]) for n in self.quant_inputs]
        qual = []
        if self.discrete:
            qual = [QualVar(self.qual_name, [str(l + 1) for l in range(self.n_levels)])]
        return InputSpace(quant, qual, response="y")

    def full_inputs(self, X, T=None) -> np.ndarray:
        """Assemble the raw simulator inputs from quantitative values and level codes."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.discrete:
            return X
        T = np.asarray(T).reshape(X.shape[0], -1)
        vals = self.level_values()[T[:, 0].astype(int) - 1]
        full = np.empty((X.shape[0], self.dim))
        qi = [self.inputs.index(n) for n in self.quant_inputs]
        di = [self.inputs.index(n) for n, _ in self.discrete]
        full[:, qi] = X
        full[:, di] = vals
        return full

    def evaluate(self, X, T=None) -> np.ndarray:
        return np.asarray(self.fn(self.full_inputs(X, T)), dtype=float)

    def label(self, data: Dataset) -> Dataset:
        return data.with_responses(self.evaluate(data.X, data.T))


def discretize(func: TestFunction, names: Sequence[str], levels: Sequence[int],
               qual_name: str = "t") -> TestFunction:
    """Replace ``names`` by one qualitative factor on an equally spaced grid (endpoints included)."""
    if len(names) != len(levels):
        raise ValueError("one level count per discretized input is required")
    disc = []
    for n, k in zip(names, levels):
        if n not in func.inputs:
            raise KeyError(f"{func.name} has no input named {n!r}")
        if int(k) < 2:
            raise ValueError("each discretized input needs at least 2 levels")
        i = func.inputs.index(n)
        disc.append((n, tuple(np.linspace(func.lower[i], func.upper[i], int(k)).tolist())))
    return TestFunction(func.name, func.inputs, func.lower, func.upper, func.fn, tuple(disc), qual_name)


@lru_cache(maxsize=None)
def _declarations() -> dict:
    text = resources.files("lvgp.bench").joinpath("data/test_functions.json").read_text()
    return json.loads(text)


_FUNCS = {"borehole": borehole, "otl": otl, "piston": piston}


def get_function(name: str, mixed: bool = True, discretization: Mapping[str, int] | None = None,
                 piston_variant: str = "printed") -> TestFunction:
    """A named test function with its declared ranges, discretized by default."""
    decl = _declarations()
    if name not in decl:
        raise KeyError(f"unknown test function {name!r}; choose from {sorted(decl)}")
    d = decl[name]
    fn = _FUNCS[name]
    if name == "piston" and piston_variant != "printed":
        fn = lambda X, _v=piston_variant: piston(X, _v)  # noqa: E731
    f = TestFunction(name, tuple(i["name"] for i in d["inputs"]),
                     tuple(float(i["lower"]) for i in d["inputs"]),
                     tuple(float(i["upper"]) for i in d["inputs"]), fn)
    if not mixed:
        return f
    disc = dict(discretization or d["discretize"])
    return discretize(f, list(disc), list(disc.values()))


def sample_inputs(func: TestFunction, n: int, rng) -> np.ndarray:
    """Uniform draws over the declared (full, undiscretized) input box."""
    lo, hi = np.asarray(func.lower), np.asarray(func.upper)
    return lo + (hi - lo) * rng.random((n, func.dim))
