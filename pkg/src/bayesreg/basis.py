"""Multi-index sets and tensor-product polynomial design matrices."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import DataError

MultiIndex = Tuple[int, ...]

FAMILIES = ("monomial", "legendre", "hermite")


def total_degree(alpha: Sequence[int]) -> int:
    return int(sum(alpha))


def grlex_key(alpha: Sequence[int]):
    """Sort key for graded-lexicographic order (x1 > x2 > ... > xd)."""
    return (total_degree(alpha), tuple(-int(a) for a in alpha))


def _as_multi_index(alpha) -> MultiIndex:
    out = tuple(int(a) for a in alpha)
    if any(a < 0 for a in out):
        raise DataError(f"multi-index {out} has a negative exponent")
    return out


@dataclass(frozen=True)
class IndexSet:
    """An ordered set of distinct multi-indices tagged with a basis family.

    Indices are stored in canonical graded-lexicographic order; duplicates
    are rejected.
    """

    indices: Tuple[MultiIndex, ...]
    family: str = "monomial"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DataError(f"unknown basis family {self.family!r}")
        idx = [_as_multi_index(a) for a in self.indices]
        if len(set(idx)) != len(idx):
            raise DataError("index set contains duplicate multi-indices")
        if idx and len({len(a) for a in idx}) != 1:
            raise DataError("multi-indices have inconsistent lengths")
        object.__setattr__(self, "indices", tuple(sorted(idx, key=grlex_key)))

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, alpha):
        return tuple(alpha) in self.indices

    @property
    def d(self) -> int:
        return len(self.indices[0]) if self.indices else 0

    def position(self, alpha) -> int:
        return self.indices.index(tuple(alpha))

    def with_index(self, alpha) -> "IndexSet":
        return IndexSet(self.indices + (_as_multi_index(alpha),), self.family)

    def degrees(self) -> np.ndarray:
        return np.array([total_degree(a) for a in self.indices], dtype=int)


def enumerate_total_degree(d: int, max_degree: int, family: str = "monomial") -> IndexSet:
    """All multi-indices of length ``d`` with total degree <= ``max_degree``."""
    if d < 1:
        raise DataError("d must be >= 1")
    if max_degree < 0:
        raise DataError("max_degree must be >= 0")
    out = [
        alpha
        for alpha in itertools.product(range(max_degree + 1), repeat=d)
        if sum(alpha) <= max_degree
    ]
    return IndexSet(tuple(out), family)


def univariate(family: str, x: np.ndarray, max_degree: int) -> np.ndarray:
    """Evaluate degrees 0..max_degree of a univariate family at ``x``.

    Returns an array of shape ``x.shape + (max_degree + 1,)``. Legendre and
    probabilists' Hermite polynomials use their three-term recurrences.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree == 0:
        return out
    out[..., 1] = x
    for k in range(1, max_degree):
        if family == "monomial":
            out[..., k + 1] = out[..., k] * x
        elif family == "legendre":
            out[..., k + 1] = ((2 * k + 1) * x * out[..., k] - k * out[..., k - 1]) / (k + 1)
        elif family == "hermite":
            out[..., k + 1] = x * out[..., k] - k * out[..., k - 1]
        else:
            raise DataError(f"unknown basis family {family!r}")
    return out


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    index_set: IndexSet

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def shape(self):
        return self.values.shape


def evaluate_design(x, index_set: IndexSet) -> DesignMatrix:
    """Build the N x P matrix of tensor-product basis evaluations.

    ``x`` may be an (N, d) array or anything with an ``x`` attribute
    (such as :class:`bayesreg.estimators.Dataset`).
    """
    x = np.asarray(getattr(x, "x", x), dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DataError("inputs must be a 2-D array")
    if not np.all(np.isfinite(x)):
        raise DataError("inputs contain non-finite values")
    n, d = x.shape
    if len(index_set) and index_set.d != d:
        raise DataError(f"index set has d={index_set.d} but data has d={d}")
    if index_set.family not in FAMILIES:
        raise DataError(f"unknown basis family {index_set.family!r}")

    values = np.ones((n, len(index_set)))
    if len(index_set):
        top = max(max(a) for a in index_set.indices)
        # tables[n, i, k] = phi_k(x[n, i])
        tables = univariate(index_set.family, x, top)
        for j, alpha in enumerate(index_set.indices):
            for i, k in enumerate(alpha):
                if k:
                    values[:, j] *= tables[:, i, k]
    if not np.all(np.isfinite(values)):
        raise DataError("design matrix has non-finite entries")
    return DesignMatrix(values, index_set)


def rescale_bounds(x) -> np.ndarray:
    """Per-column (min, max) pairs, shape (d, 2)."""
    x = np.asarray(x, dtype=float)
    return np.column_stack([x.min(axis=0), x.max(axis=0)])


def apply_rescale(x, bounds) -> np.ndarray:
    """Affinely map each column from [lo, hi] onto [-1, 1].

    Constant columns (lo == hi) are mapped to 0.
    """
    x = np.asarray(x, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = np.where(hi > lo, hi - lo, 1.0)
    return np.where(hi > lo, 2.0 * (x - lo) / width - 1.0, 0.0)


def parse_indices(rows: Iterable[Iterable[int]]) -> Tuple[MultiIndex, ...]:
    return tuple(_as_multi_index(r) for r in rows)
