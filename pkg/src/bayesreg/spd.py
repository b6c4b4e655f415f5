"""Symmetric positive-definite linear algebra.

Every inverse applied by the estimators goes through :func:`factor`; explicit
inverses are only formed by :func:`inverse` when a covariance has to be
materialized for a report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import DataError, NotPositiveDefinite


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances used by the factorization.

    pivot_floor
        A pivot fails when ``L_ii**2 <= pivot_floor * M_ii``.
    jitter_scale
        Diagonal jitter for the single retry, relative to ``trace(M) / n``.
    """

    pivot_floor: float = 1e-12
    jitter_scale: float = 1e-10


DEFAULT_POLICY = NumericPolicy()


@dataclass(frozen=True)
class SpdFactor:
    lower: np.ndarray
    jittered: bool = False

    @property
    def n(self) -> int:
        return self.lower.shape[0]


def symmetrize(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DataError(f"expected a square matrix, got shape {m.shape}")
    return 0.5 * (m + m.T)


def _try_cholesky(m, policy):
    try:
        lower = la.cholesky(m, lower=True, check_finite=True)
    except (la.LinAlgError, ValueError):
        return None
    pivots = np.diag(lower) ** 2
    if np.any(pivots <= policy.pivot_floor * np.diag(m)):
        return None
    return lower


def factor(m, policy: NumericPolicy = DEFAULT_POLICY, allow_jitter: bool = True) -> SpdFactor:
    """Cholesky factor of a symmetric positive-definite matrix.

    On pivot failure the factorization is retried once with a small diagonal
    jitter and the result is flagged ``jittered``. With ``allow_jitter=False``
    the first failure raises, which is what the likelihood-only estimators
    use so that collinear designs are reported rather than regularized.
    """
    m = symmetrize(m)
    if m.shape[0] == 0:
        return SpdFactor(np.zeros((0, 0)))
    if not np.all(np.isfinite(m)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    lower = _try_cholesky(m, policy)
    if lower is not None:
        return SpdFactor(lower)
    if not allow_jitter:
        raise NotPositiveDefinite("matrix is not numerically positive definite")
    n = m.shape[0]
    jitter = policy.jitter_scale * np.trace(m) / n
    if jitter > 0:
        lower = _try_cholesky(m + jitter * np.eye(n), policy)
        if lower is not None:
            return SpdFactor(lower, jittered=True)
    raise NotPositiveDefinite("matrix is not positive definite even after jitter")


def solve(f: SpdFactor, rhs) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != f.n:
        raise DataError(f"rhs has {rhs.shape[0]} rows, factor is {f.n}x{f.n}")
    if f.n == 0:
        return rhs.copy()
    return la.cho_solve((f.lower, True), rhs)


def log_det(f: SpdFactor) -> float:
    return float(2.0 * np.sum(np.log(np.diag(f.lower))))


def inverse(f: SpdFactor) -> np.ndarray:
    out = solve(f, np.eye(f.n))
    return 0.5 * (out + out.T)


def solve_lower(f: SpdFactor, v) -> np.ndarray:
    """Return ``L^{-1} v`` for ``M = L L^T``."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != f.n:
        raise DataError(f"operand has {v.shape[0]} rows, factor is {f.n}x{f.n}")
    return la.solve_triangular(f.lower, v, lower=True)


def whiten(noise, v) -> np.ndarray:
    """Apply the inverse noise factor: ``L^{-1} v`` where ``C_M = L L^T``."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    if noise.kind == "iid":
        return v / np.sqrt(noise.value)
    if noise.kind == "diagonal":
        var = noise.variances(n)
        scale = np.sqrt(var)
        return v / (scale if v.ndim == 1 else scale[:, None])
    return solve_lower(noise.factor(), v)
