"""Closed-form posterior estimators for linear-in-coefficients models.

All four settings share the Gaussian likelihood ``y ~ N(Psi a, C_M)`` and
differ by prior: uniform (GLS / OLS), Gaussian (ridge MAP) and Laplace
(sign-constrained MAP, LASSO-like).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from . import spd
from .errors import DataError, NoSignFixedPoint, NotPositiveDefinite

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.ndim != 2:
            raise DataError("x must be a 2-D array")
        if x.shape[0] < 1:
            raise DataError("dataset is empty")
        if x.shape[0] != y.shape[0]:
            raise DataError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        self.x, self.y = x, y

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def take(self, rows) -> "Dataset":
        return Dataset(self.x[rows], self.y[rows])


@dataclass(eq=False)
class NoiseModel:
    """Error covariance C_M: ``iid`` (scalar variance), ``diagonal`` or ``full``."""

    kind: str
    value: object

    def __post_init__(self):
        if self.kind == "iid":
            v = float(self.value)
            if not (np.isfinite(v) and v > 0):
                raise DataError("iid noise variance must be positive and finite")
            self.value = v
        elif self.kind == "diagonal":
            v = np.asarray(self.value, dtype=float).reshape(-1)
            if not (np.all(np.isfinite(v)) and np.all(v > 0)):
                raise DataError("noise variances must be positive and finite")
            self.value = v
        elif self.kind == "full":
            self.value = spd.symmetrize(self.value)
        else:
            raise DataError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def iid(cls, variance):
        return cls("iid", variance)

    @classmethod
    def diagonal(cls, variances):
        return cls("diagonal", variances)

    @classmethod
    def full(cls, matrix):
        return cls("full", matrix)

    def size(self) -> Optional[int]:
        """Number of observations the model is tied to (None for iid)."""
        if self.kind == "iid":
            return None
        return len(self.value)

    def check(self, n: int):
        size = self.size()
        if size is not None and size != n:
            raise DataError(f"noise model covers {size} observations, data has {n}")

    def variances(self, n: int) -> np.ndarray:
        self.check(n)
        if self.kind == "iid":
            return np.full(n, self.value)
        if self.kind == "diagonal":
            return self.value
        return np.diag(self.value).copy()

    @cached_property
    def _factor(self) -> spd.SpdFactor:
        return spd.factor(self.value, allow_jitter=False)

    def factor(self) -> spd.SpdFactor:
        if self.kind != "full":
            raise TypeError("factor() is only defined for full noise models")
        return self._factor

    def apply_inverse(self, v) -> np.ndarray:
        """Return ``C_M^{-1} v``."""
        v = np.asarray(v, dtype=float)
        n = v.shape[0]
        self.check(n)
        if self.kind == "iid":
            return v / self.value
        if self.kind == "diagonal":
            return v / (self.value if v.ndim == 1 else self.value[:, None])
        return spd.solve(self._factor, v)

    def log_det(self, n: int) -> float:
        self.check(n)
        if self.kind == "iid":
            return n * math.log(self.value)
        if self.kind == "diagonal":
            return float(np.sum(np.log(self.value)))
        return spd.log_det(self._factor)

    def subset(self, rows) -> "NoiseModel":
        if self.kind == "iid":
            return self
        if self.kind == "diagonal":
            return NoiseModel.diagonal(self.value[rows])
        return NoiseModel.full(self.value[np.ix_(rows, rows)])


@dataclass(eq=False)
class PriorSpec:
    """Prior on the coefficient vector.

    ``uniform`` optionally carries per-coefficient ``bounds`` (P x 2);
    ``gaussian`` carries ``mean`` and ``cov``; ``laplace`` carries ``mean``
    and the positive rates ``scale`` (the diagonal of Lambda).
    """

    kind: str
    mean: Optional[np.ndarray] = None
    cov: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None
    bounds: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "uniform":
            if self.bounds is not None:
                b = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
                if not np.all(b[:, 0] < b[:, 1]):
                    raise DataError("uniform prior bounds need lower < upper")
                self.bounds = b
        elif self.kind == "gaussian":
            self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
            cov = np.asarray(self.cov, dtype=float)
            if cov.ndim == 1:
                cov = np.diag(cov)
            self.cov = spd.symmetrize(cov)
            if self.cov.shape[0] != self.mean.shape[0]:
                raise DataError("prior mean and covariance sizes differ")
        elif self.kind == "laplace":
            self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
            lam = np.asarray(self.scale, dtype=float).reshape(-1)
            if lam.shape != self.mean.shape:
                raise DataError("prior mean and Laplace rates sizes differ")
            if not np.all(lam >= 0) or not np.all(np.isfinite(lam)):
                raise DataError("Laplace rates must be finite and non-negative")
            self.scale = lam
        else:
            raise DataError(f"unknown prior kind {self.kind!r}")

    @classmethod
    def uniform(cls, bounds=None):
        return cls("uniform", bounds=bounds)

    @classmethod
    def gaussian(cls, mean, cov):
        return cls("gaussian", mean=mean, cov=cov)

    @classmethod
    def laplace(cls, mean, scale):
        return cls("laplace", mean=mean, scale=scale)

    @property
    def size(self) -> Optional[int]:
        if self.kind == "uniform":
            return None if self.bounds is None else len(self.bounds)
        return len(self.mean)

    def contains(self, a) -> bool:
        if self.kind != "uniform" or self.bounds is None:
            return True
        a = np.asarray(a, dtype=float)
        return bool(np.all((a >= self.bounds[:, 0]) & (a <= self.bounds[:, 1])))

    def log_density(self, a) -> float:
        """Normalized log prior density at ``a`` (Gaussian and Laplace only)."""
        a = np.asarray(a, dtype=float)
        if self.kind == "gaussian":
            f = spd.factor(self.cov)
            dev = a - self.mean
            quad = float(dev @ spd.solve(f, dev))
            return -0.5 * (len(a) * LOG_2PI + spd.log_det(f) + quad)
        if self.kind == "laplace":
            lam = self.scale
            if np.any(lam <= 0):
                raise DataError("Laplace log-density needs strictly positive rates")
            return float(np.sum(np.log(lam / 2.0) - lam * np.abs(a - self.mean)))
        raise DataError("uniform prior has no normalized density without bounds")


@dataclass(eq=False)
class PosteriorSummary:
    mean: np.ndarray
    covariance: Optional[np.ndarray]
    log_det_cov: Optional[float]
    method: str
    sigma2_mle: Optional[float] = None
    sign_vector: Optional[np.ndarray] = None
    converged: bool = True
    iterations: int = 0
    contains_mle: Optional[bool] = None
    flags: List[str] = field(default_factory=list)

    @property
    def p(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class GammaParams:
    shape: float
    scale: float

    @property
    def mode(self) -> float:
        return (self.shape - 1.0) * self.scale


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------


def _matrix(design) -> np.ndarray:
    m = np.asarray(getattr(design, "values", design), dtype=float)
    if m.ndim != 2:
        raise DataError("design must be a 2-D matrix")
    return m


def _check(design, y):
    psi = _matrix(design)
    y = np.asarray(y, dtype=float).reshape(-1)
    if psi.shape[0] != y.shape[0]:
        raise DataError(f"design has {psi.shape[0]} rows but y has {y.shape[0]}")
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(y))):
        raise DataError("design or observations contain non-finite values")
    return psi, y


def normal_equations(psi, y, noise: NoiseModel) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(Psi^T C_M^-1 Psi, Psi^T C_M^-1 y)``."""
    cinv_psi = noise.apply_inverse(psi)
    h = spd.symmetrize(psi.T @ cinv_psi)
    g = cinv_psi.T @ y
    return h, g


def gaussian_log_likelihood(design, y, noise: NoiseModel, a) -> float:
    """ln p(y | a) under ``y ~ N(Psi a, C_M)``."""
    psi, y = _check(design, y)
    r = y - psi @ np.asarray(a, dtype=float)
    n = len(y)
    quad = float(r @ noise.apply_inverse(r))
    return -0.5 * (n * LOG_2PI + noise.log_det(n) + quad)


def _covariance(f: spd.SpdFactor):
    return spd.inverse(f), -spd.log_det(f)


def _prior_size_check(prior: PriorSpec, p: int):
    if prior.size is not None and prior.size != p:
        raise DataError(f"prior has {prior.size} coefficients, design has {p}")


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def fit_gls(design, y, noise: NoiseModel, prior: Optional[PriorSpec] = None) -> PosteriorSummary:
    """Maximum-likelihood (uniform prior) posterior under general C_M."""
    psi, y = _check(design, y)
    h, g = normal_equations(psi, y, noise)
    f = spd.factor(h, allow_jitter=False)
    mean = spd.solve(f, g)
    cov, ldc = _covariance(f)
    summary = PosteriorSummary(mean, cov, ldc, "gls")
    if prior is not None and prior.kind == "uniform" and prior.bounds is not None:
        _prior_size_check(prior, psi.shape[1])
        summary.contains_mle = prior.contains(mean)
        if not summary.contains_mle:
            summary.flags.append("mle_outside_bounds")
    return summary


def fit_ols(design, y) -> PosteriorSummary:
    """Homoscedastic GLS with the noise variance replaced by its MLE."""
    psi, y = _check(design, y)
    n = len(y)
    f = spd.factor(spd.symmetrize(psi.T @ psi), allow_jitter=False)
    mean = spd.solve(f, psi.T @ y)
    r = y - psi @ mean
    rss = float(r @ r)
    sigma2 = rss / n
    summary = PosteriorSummary(mean, None, None, "ols", sigma2_mle=sigma2)
    # residual at rounding level is treated as an exact interpolation
    if rss <= (64 * np.finfo(float).eps) ** 2 * float(y @ y):
        summary.flags.append("zero_residual")
        return summary
    cov = sigma2 * spd.inverse(f)
    summary.covariance = cov
    summary.log_det_cov = psi.shape[1] * math.log(sigma2) - spd.log_det(f)
    return summary


def precision_posterior(residual_ss: float, n: int) -> GammaParams:
    """Gamma posterior of the noise precision given the OLS residuals."""
    if not residual_ss > 0:
        raise DataError("residual sum of squares must be positive")
    if n < 1:
        raise DataError("n must be >= 1")
    return GammaParams(shape=(n + 2) / 2.0, scale=2.0 / residual_ss)


def fit_ridge(design, y, noise: NoiseModel, prior: PriorSpec) -> PosteriorSummary:
    """MAP and covariance under a Gaussian prior ``N(a0, C_aa)``."""
    if prior.kind != "gaussian":
        raise DataError("fit_ridge needs a gaussian prior")
    psi, y = _check(design, y)
    _prior_size_check(prior, psi.shape[1])
    h, g = normal_equations(psi, y, noise)
    fp = spd.factor(prior.cov, allow_jitter=False)
    prec = h + spd.inverse(fp)
    rhs = g + spd.solve(fp, prior.mean)
    f = spd.factor(prec)
    mean = spd.solve(f, rhs)
    cov, ldc = _covariance(f)
    summary = PosteriorSummary(mean, cov, ldc, "ridge")
    if f.jittered:
        summary.flags.append("jitter")
    return summary


def _active_solve(h, g0, lam, s):
    b = np.zeros_like(g0)
    active = np.flatnonzero(s)
    if active.size:
        sub = spd.factor(h[np.ix_(active, active)], allow_jitter=False)
        b[active] = spd.solve(sub, g0[active] - lam[active] * s[active])
    return b


def _lasso_objective(h, g0, lam, b):
    return 0.5 * float(b @ h @ b) - float(g0 @ b) + float(lam @ np.abs(b))


def _guarded_sign_search(h, g0, lam, tol, max_iter):
    """Feature-sign search with a line search to the first sign crossing.

    Each move lowers the penalized objective, so no sign pattern repeats
    and the search ends in finitely many steps. Returns
    ``(b, s, iterations)``.
    """
    p = len(g0)
    b = np.zeros(p)
    s = np.zeros(p)
    it = 0
    while it < max_iter:
        grad = g0 - h @ b
        excess = np.where(s == 0, np.abs(grad) - lam, -np.inf)
        j = int(np.argmax(excess))
        if excess[j] <= tol:
            return b, s, it
        s[j] = np.sign(grad[j])
        while it < max_iter:
            it += 1
            active = s != 0
            target = _active_solve(h, g0, lam, s)
            if np.all(np.sign(target[active]) == s[active]):
                b = target
                break
            step = target - b
            points = [target]
            for i in np.flatnonzero(active & (b != 0) & (np.sign(target) != np.sign(b))):
                point = b + (b[i] / (b[i] - target[i])) * step
                point[i] = 0.0
                points.append(point)
            values = [_lasso_objective(h, g0, lam, q) for q in points]
            b = points[int(np.argmin(values))]
            s = np.where(active, np.sign(b), 0.0)
            b[s == 0] = 0.0
    raise NoSignFixedPoint("guarded sign search did not terminate")


def fit_laplace_map(
    design,
    y,
    noise: NoiseModel,
    prior: PriorSpec,
    max_iter: Optional[int] = None,
) -> PosteriorSummary:
    """MAP under a Laplace prior via a fixed point on the sign vector.

    With ``b = a - a0`` and a fixed sign vector ``s`` the MAP solves the
    linear system ``H b = Psi^T C_M^-1 (y - Psi a0) - Lambda s``. The sign
    vector starts from the GLS solution and is updated from each solve.
    A coordinate whose sign flips on two consecutive iterations is clamped
    at ``a0`` (sign 0). A clamped coordinate whose gradient exceeds its
    rate once the others have settled is released with the gradient's
    sign.

    If the iteration revisits an earlier state it is restarted with a
    guarded search that line-searches to the first sign crossing; the
    summary is then flagged ``sign_cycle_guarded``. :class:`NoSignFixedPoint`
    is raised only if that search fails as well.
    """
    if prior.kind != "laplace":
        raise DataError("fit_laplace_map needs a laplace prior")
    psi, y = _check(design, y)
    p = psi.shape[1]
    _prior_size_check(prior, p)
    a0, lam = prior.mean, prior.scale
    h, g0 = normal_equations(psi, y - psi @ a0, noise)
    f = spd.factor(h, allow_jitter=False)
    cov, ldc = _covariance(f)
    if max_iter is None:
        max_iter = 4 * p
    tol = 1e-12 * max(1.0, float(np.max(np.abs(g0), initial=0.0)), float(np.max(lam, initial=0.0)))

    s = np.sign(spd.solve(f, g0))
    flipped = np.zeros(p, dtype=bool)
    trace = [s.astype(int).tolist()]
    seen = {(tuple(s), tuple(flipped))}
    flags = []
    converged = cycled = False
    b = np.zeros(p)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        b = _active_solve(h, g0, lam, s)
        active = s != 0
        raw = np.sign(b)
        flip = active & (raw != s)
        if not flip.any():
            grad = g0 - h @ b
            excess = np.where(active, -np.inf, np.abs(grad) - lam)
            j = int(np.argmax(excess)) if p else 0
            if p == 0 or excess[j] <= tol:
                converged = True
                break
            s[j] = np.sign(grad[j])
            flipped[:] = False
        else:
            clamp = flip & (flipped | (raw == 0))
            s[clamp] = 0.0
            move = flip & ~clamp
            s[move] = raw[move]
            flipped = move
        trace.append(s.astype(int).tolist())
        state = (tuple(s), tuple(flipped))
        if state in seen:
            cycled = True
            break
        seen.add(state)

    if cycled:
        try:
            b, s, extra = _guarded_sign_search(h, g0, lam, tol, 50 * (p + 1))
        except NoSignFixedPoint as exc:
            raise NoSignFixedPoint(str(exc), trace) from None
        iterations += extra
        converged = True
        flags.append("sign_cycle_guarded")
    elif not converged:
        flags.append("sign_iteration_not_converged")

    return PosteriorSummary(
        mean=a0 + b,
        covariance=cov,
        log_det_cov=ldc,
        method="laplace-map",
        sign_vector=s.astype(int),
        converged=converged,
        iterations=iterations,
        flags=flags,
    )


def posterior_density(summary: PosteriorSummary, a) -> Tuple[float, float]:
    """Gaussian posterior density at ``a`` as ``(log_density, density)``."""
    a = np.asarray(a, dtype=float).reshape(-1)
    if summary.covariance is None:
        raise DataError("posterior has no covariance (zero residual)")
    if a.shape[0] != summary.p:
        raise DataError(f"point has {a.shape[0]} coordinates, posterior has {summary.p}")
    f = spd.factor(summary.covariance, allow_jitter=False)
    dev = a - summary.mean
    quad = float(dev @ spd.solve(f, dev))
    logpdf = -0.5 * (summary.p * LOG_2PI + summary.log_det_cov + quad)
    return logpdf, math.exp(logpdf)


__all__ = [
    "Dataset",
    "NoiseModel",
    "PriorSpec",
    "PosteriorSummary",
    "GammaParams",
    "NotPositiveDefinite",
    "fit_gls",
    "fit_ols",
    "precision_posterior",
    "fit_ridge",
    "fit_laplace_map",
    "posterior_density",
    "gaussian_log_likelihood",
    "normal_equations",
]
