"""Input-space declarations, dataset validation, scaling and designs.

Qualitative levels are coded ``1..L`` in :class:`Dataset` in the order the
levels are declared in the :class:`InputSpace`.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.stats import qmc


class ValidationError(ValueError):
    """Raised when a table does not conform to its input-space declaration."""


@dataclass(frozen=True)
class QuantVar:
    name: str
    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError(f"bounds of {self.name!r} must be finite")
        if not self.lower < self.upper:
            raise ValueError(f"{self.name!r}: lower bound must be below upper bound")


@dataclass(frozen=True)
class QualVar:
    name: str
    levels: tuple

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if len(self.levels) < 2:
            raise ValueError(f"{self.name!r} needs at least two levels")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f"level labels of {self.name!r} are not unique")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def index(self, label) -> int:
        """1-based code of ``label``."""
        return self.levels.index(str(label)) + 1


@dataclass(frozen=True)
class InputSpace:
    """I quantitative inputs with bounds and J qualitative inputs with levels."""

    quant: tuple = ()
    qual: tuple = ()
    response: str = "y"

    def __post_init__(self):
        object.__setattr__(self, "quant", tuple(self.quant))
        object.__setattr__(self, "qual", tuple(self.qual))
        if len(self.quant) + len(self.qual) < 1:
            raise ValueError("an input space needs at least one input")
        names = self.names
        if len(set(names)) != len(names):
            raise ValueError("input names must be unique")

    @property
    def n_quant(self) -> int:
        return len(self.quant)

    @property
    def n_qual(self) -> int:
        return len(self.qual)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.quant] + [v.name for v in self.qual]

    @property
    def n_levels(self) -> list[int]:
        return [v.n_levels for v in self.qual]

    @property
    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.quant], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.quant], dtype=float)

    def to_dict(self) -> dict:
        return {
            "quant": [{"name": v.name, "lower": v.lower, "upper": v.upper} for v in self.quant],
            "qual": [{"name": v.name, "levels": list(v.levels)} for v in self.qual],
            "response": self.response,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "InputSpace":
        quant = [QuantVar(q["name"], float(q["lower"]), float(q["upper"])) for q in d.get("quant", [])]
        qual = [QualVar(q["name"], tuple(q["levels"])) for q in d.get("qual", [])]
        return cls(quant, qual, d.get("response", "y"))

    @classmethod
    def from_json(cls, path) -> "InputSpace":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class Dataset:
    """Validated inputs and (optionally) responses.

    ``X`` holds the quantitative columns (N x I), ``T`` the 1-based level
    codes (N x J) and ``Y`` the responses (N,) or ``None`` for a design.
    """

    X: np.ndarray
    T: np.ndarray
    Y: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        T = np.asarray(self.T, dtype=np.int64)
        n = X.shape[0] if X.ndim == 2 else T.shape[0]
        X = X.reshape(n, -1)
        T = T.reshape(n, -1)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "T", T)
        if self.Y is not None:
            Y = np.asarray(self.Y, dtype=float).reshape(-1)
            if Y.shape[0] != n:
                raise ValidationError("response length does not match the number of rows")
            object.__setattr__(self, "Y", Y)
        for arr in (self.X, self.T, self.Y):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.T[idx], None if self.Y is None else self.Y[idx])

    def with_responses(self, Y) -> "Dataset":
        return Dataset(self.X, self.T, Y)

    def to_frame(self, space: InputSpace) -> pd.DataFrame:
        cols = {}
        for i, v in enumerate(space.quant):
            cols[v.name] = self.X[:, i]
        for j, v in enumerate(space.qual):
            cols[v.name] = [v.levels[k - 1] for k in self.T[:, j]]
        if self.Y is not None:
            cols[space.response] = self.Y
        return pd.DataFrame(cols)


def validate(space: InputSpace, table, require_response: bool = True) -> Dataset:
    """Convert a raw table (DataFrame or mapping of columns) into a Dataset.

    Quantitative values outside their declared bounds only trigger a warning.
    """
    df = table if isinstance(table, pd.DataFrame) else pd.DataFrame(dict(table))
    needed = space.names + ([space.response] if require_response else [])
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise ValidationError(f"missing columns: {missing}")
    n = len(df)

    X = np.empty((n, space.n_quant))
    for i, v in enumerate(space.quant):
        col = pd.to_numeric(df[v.name], errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(col))
        if bad.size:
            r = int(bad[0])
            raise ValidationError(
                f"non-numeric or missing value {df[v.name].iloc[r]!r} in column {v.name!r}, row {r}"
            )
        if np.any((col < v.lower) | (col > v.upper)):
            warnings.warn(f"column {v.name!r} has values outside [{v.lower}, {v.upper}]")
        X[:, i] = col

    T = np.empty((n, space.n_qual), dtype=np.int64)
    for j, v in enumerate(space.qual):
        lookup = {lab: k + 1 for k, lab in enumerate(v.levels)}
        for r, raw in enumerate(df[v.name].tolist()):
            code = lookup.get(str(raw))
            if code is None:
                raise ValidationError(f"unknown level {raw!r} in column {v.name!r}, row {r}")
            T[r, j] = code

    Y = None
    if require_response:
        Y = pd.to_numeric(df[space.response], errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(Y))
        if bad.size:
            raise ValidationError(f"invalid response in row {int(bad[0])}")
        if n < 2:
            raise ValidationError("at least two observations are required")
    return Dataset(X, T, Y)


def read_csv(space: InputSpace, path, require_response: bool = True) -> Dataset:
    df = pd.read_csv(path, dtype={v.name: str for v in space.qual})
    return validate(space, df, require_response=require_response)


@dataclass(frozen=True)
class ScalingInfo:
    """Affine maps: quantitative inputs to [0, 1], response to zero mean / unit s.d."""

    lower: np.ndarray
    upper: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0

    def transform_x(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.lower) / (self.upper - self.lower)

    def inverse_x(self, U) -> np.ndarray:
        return np.asarray(U, dtype=float) * (self.upper - self.lower) + self.lower

    def transform_y(self, Y) -> np.ndarray:
        return (np.asarray(Y, dtype=float) - self.y_mean) / self.y_scale

    def inverse_y(self, Ys) -> np.ndarray:
        return np.asarray(Ys, dtype=float) * self.y_scale + self.y_mean

    def inverse_var(self, V) -> np.ndarray:
        return np.asarray(V, dtype=float) * self.y_scale**2

    def transform(self, data: Dataset) -> Dataset:
        Y = None if data.Y is None else self.transform_y(data.Y)
        return Dataset(self.transform_x(data.X), data.T, Y)

    def inverse(self, data: Dataset) -> Dataset:
        Y = None if data.Y is None else self.inverse_y(data.Y)
        return Dataset(self.inverse_x(data.X), data.T, Y)

    def to_dict(self) -> dict:
        return {
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "y_mean": self.y_mean,
            "y_scale": self.y_scale,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalingInfo":
        return cls(np.asarray(d["lower"], float), np.asarray(d["upper"], float),
                   float(d["y_mean"]), float(d["y_scale"]))


def standardize(data: Dataset, space: InputSpace) -> tuple[Dataset, ScalingInfo]:
    """Scale inputs by declared bounds and the response by its sample mean/s.d."""
    y_mean, y_scale = 0.0, 1.0
    if data.Y is not None:
        y_mean = float(np.mean(data.Y))
        sd = float(np.std(data.Y, ddof=1)) if data.n > 1 else 0.0
        if sd > 0.0:
            y_scale = sd
        else:
            warnings.warn("response has zero variance; scaling by 1")
    info = ScalingInfo(space.lower, space.upper, y_mean, y_scale)
    return info.transform(data), info


def level_grid(space: InputSpace) -> np.ndarray:
    """All joint level combinations (1-based), one per row, first variable slowest."""
    if space.n_qual == 0:
        return np.zeros((1, 0), dtype=np.int64)
    axes = [np.arange(1, L + 1) for L in space.n_levels]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def stratified_doe(space: InputSpace, per_level: int, seed=None) -> Dataset:
    """Two-step design: Latin hypercube in the quantitative inputs, then a
    random stratified assignment of joint level combinations.

    Each LHS point is placed uniformly at random inside its stratum.
    """
    if per_level < 1:
        raise ValueError("per_level must be at least 1")
    rng = np.random.default_rng(seed)
    combos = level_grid(space)
    n = per_level * combos.shape[0]
    if space.n_quant:
        lhs = qmc.LatinHypercube(d=space.n_quant, seed=rng).random(n)
        X = qmc.scale(lhs, space.lower, space.upper)
    else:
        X = np.zeros((n, 0))
    T = np.repeat(combos, per_level, axis=0)
    T = T[rng.permutation(n)]
    return Dataset(X, T)


def uniform_design(space: InputSpace, n: int, seed=None) -> Dataset:
    """Independent uniform draws over the box and uniform level assignment."""
    rng = np.random.default_rng(seed)
    X = space.lower + rng.random((n, space.n_quant)) * (space.upper - space.lower)
    T = np.column_stack([rng.integers(1, L + 1, size=n) for L in space.n_levels]) if space.n_qual \
        else np.zeros((n, 0), dtype=np.int64)
    return Dataset(X, T)
