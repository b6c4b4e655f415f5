"""Pairs-bootstrap of coefficient estimates and posterior prediction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .basis import IndexSet, evaluate_design
from .errors import BayesRegError, DataError
from .estimators import (
    Dataset,
    NoiseModel,
    PosteriorSummary,
    PriorSpec,
    fit_gls,
    fit_laplace_map,
    fit_ols,
    fit_ridge,
)

log = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.Philox4x64-10/SeedSequence.spawn"

METHODS = ("gls", "ols", "ridge", "lasso")


def fit(method: str, design, y, noise: Optional[NoiseModel], prior: Optional[PriorSpec]) -> PosteriorSummary:
    """Dispatch to one of the four estimators by name."""
    if method == "ols":
        return fit_ols(design, y)
    if noise is None:
        raise DataError(f"method {method!r} needs a noise model")
    if method == "gls":
        return fit_gls(design, y, noise, prior)
    if method == "ridge":
        return fit_ridge(design, y, noise, prior)
    if method == "lasso":
        return fit_laplace_map(design, y, noise, prior)
    raise DataError(f"unknown method {method!r}")


@dataclass
class BootstrapSummary:
    replicates: int
    coefficient_means: np.ndarray
    coefficient_stddevs: np.ndarray
    seed: int
    failed: int = 0
    algorithm: str = RNG_ALGORITHM
    failures: List[str] = field(default_factory=list)


def replicate_rows(seed: int, replicates: int, n: int) -> List[np.ndarray]:
    """Row indices for each replicate; replicate ``r`` depends only on (seed, r)."""
    children = np.random.SeedSequence(seed).spawn(replicates)
    return [np.random.Generator(np.random.Philox(c)).integers(0, n, size=n) for c in children]


def bootstrap_coefficients(
    data: Dataset,
    index_set: IndexSet,
    noise: Optional[NoiseModel],
    prior: Optional[PriorSpec],
    method: str,
    replicates: int,
    seed: int,
) -> BootstrapSummary:
    """Resample rows with replacement, refit, and summarize the coefficients.

    Replicates whose fit fails (typically a rank-deficient resampled design)
    are skipped and counted in ``failed``.
    """
    if replicates < 2:
        raise DataError("replicates must be >= 2")
    if noise is not None and noise.kind == "full":
        raise DataError("pairs bootstrap is not defined for a full noise covariance")
    design = evaluate_design(data.x, index_set).values
    fit(method, design, data.y, noise, prior)

    estimates = []
    failures = []
    for r, rows in enumerate(replicate_rows(seed, replicates, data.n)):
        sub_noise = noise.subset(rows) if noise is not None else None
        try:
            post = fit(method, design[rows], data.y[rows], sub_noise, prior)
        except BayesRegError as exc:
            failures.append(f"replicate {r}: {type(exc).__name__}")
            continue
        estimates.append(post.mean)
    if len(estimates) < 2:
        raise BayesRegError(f"only {len(estimates)} of {replicates} bootstrap replicates succeeded")
    if failures:
        log.warning("%d bootstrap replicates skipped", len(failures))
    stacked = np.vstack(estimates)
    return BootstrapSummary(
        replicates=len(estimates),
        coefficient_means=stacked.mean(axis=0),
        coefficient_stddevs=stacked.std(axis=0, ddof=1),
        seed=seed,
        failed=len(failures),
        failures=failures,
    )


@dataclass
class Prediction:
    mean: np.ndarray
    model_variance: np.ndarray
    noise_variance: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        return self.model_variance + self.noise_variance


def predict(summary: PosteriorSummary, new_design, noise: Optional[NoiseModel] = None) -> Prediction:
    """Posterior predictive mean and variance split at new design rows.

    A posterior without covariance (zero residual) contributes no model
    variance.
    """
    psi = np.asarray(getattr(new_design, "values", new_design), dtype=float)
    if psi.ndim != 2 or psi.shape[1] != summary.p:
        raise DataError(f"new design has shape {psi.shape}, posterior has P={summary.p}")
    m = psi.shape[0]
    mean = psi @ summary.mean
    if summary.covariance is None:
        model_var = np.zeros(m)
    else:
        model_var = np.einsum("ij,jk,ik->i", psi, summary.covariance, psi)
        model_var = np.maximum(model_var, 0.0)
    noise_var = np.zeros(m) if noise is None else noise.variances(m)
    return Prediction(mean, model_var, np.asarray(noise_var, dtype=float))
