"""Model evidence at the MAP, the Kashyap information criterion and
stepwise multi-index selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .basis import IndexSet, MultiIndex, evaluate_design
from .errors import BayesRegError, DataError
from .estimators import (
    LOG_2PI,
    Dataset,
    NoiseModel,
    PosteriorSummary,
    PriorSpec,
    fit_laplace_map,
    fit_ridge,
    gaussian_log_likelihood,
)


@dataclass
class EvidenceReport:
    log_evidence: float
    kic: float
    log_likelihood_at_map: float
    log_prior_at_map: float
    p: int
    posterior: Optional[PosteriorSummary] = field(default=None, repr=False, compare=False)

    def kic_terms(self) -> dict:
        """The four additive terms of the KIC, in the order they are usually written."""
        return {
            "minus_2_log_likelihood": -2.0 * self.log_likelihood_at_map,
            "minus_2_log_prior": -2.0 * self.log_prior_at_map,
            "minus_p_log_2pi": -self.p * LOG_2PI,
            "minus_log_det_cov": -self.posterior.log_det_cov if self.posterior else float("nan"),
        }


def log_evidence_map(design, y, noise: NoiseModel, prior: PriorSpec) -> EvidenceReport:
    """Laplace-approximated log evidence evaluated at the MAP.

    ``ln p(y) = ln p(y|a_map) + ln p(a_map) + P/2 ln(2 pi) + 1/2 ln|C_map|``.
    For a Gaussian prior the approximation is exact.
    """
    if prior.kind == "gaussian":
        post = fit_ridge(design, y, noise, prior)
    elif prior.kind == "laplace":
        post = fit_laplace_map(design, y, noise, prior)
    else:
        raise DataError("evidence at the MAP needs a gaussian or laplace prior")
    loglik = gaussian_log_likelihood(design, y, noise, post.mean)
    logprior = prior.log_density(post.mean)
    p = post.p
    log_ev = loglik + logprior + 0.5 * p * LOG_2PI + 0.5 * post.log_det_cov
    return EvidenceReport(log_ev, -2.0 * log_ev, loglik, logprior, p, post)


def kic(design, y, noise: NoiseModel, prior: PriorSpec) -> float:
    return log_evidence_map(design, y, noise, prior).kic


@dataclass(frozen=True)
class PriorPolicy:
    """Zero-mean diagonal Gaussian prior whose variance shrinks with degree:
    ``sigma0_sq * (1 + total_degree) ** -gamma``."""

    sigma0_sq: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if not (self.sigma0_sq > 0 and math.isfinite(self.sigma0_sq)):
            raise DataError("sigma0_sq must be positive")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise DataError("gamma must be non-negative")


def degree_weighted_prior(index_set: IndexSet, policy: PriorPolicy) -> PriorSpec:
    variances = policy.sigma0_sq * (1.0 + index_set.degrees()) ** (-policy.gamma)
    return PriorSpec.gaussian(np.zeros(len(index_set)), np.diag(variances))


@dataclass
class SelectionStep:
    candidate: MultiIndex
    kic: Optional[float]
    accepted: bool
    p_after: int
    reason: Optional[str] = None


@dataclass
class SelectionTrace:
    initial_set: IndexSet
    initial_kic: float
    steps: List[SelectionStep]
    final_set: IndexSet
    final_kic: float
    sweeps: int = 1

    def accepted(self) -> List[SelectionStep]:
        return [s for s in self.steps if s.accepted]


def stepwise_select(
    data: Dataset,
    candidates: IndexSet,
    noise: NoiseModel,
    prior_policy: PriorPolicy = PriorPolicy(),
    tie_epsilon: float = 1e-9,
    sweeps: bool = False,
) -> Tuple[IndexSet, SelectionTrace]:
    """Forward stepwise selection of multi-indices by KIC.

    Starts from the constant term and visits the candidates in canonical
    order. A candidate is kept only if it lowers the KIC by more than
    ``tie_epsilon``; otherwise it is withdrawn. With ``sweeps=True`` the
    pass is repeated over the withdrawn candidates until one pass accepts
    nothing. A candidate whose fit fails is recorded as rejected.
    """
    if len(candidates) == 0:
        raise DataError("candidate set is empty")
    if candidates.d != data.d:
        raise DataError(f"candidates have d={candidates.d} but data has d={data.d}")
    noise.check(data.n)

    zero = (0,) * data.d
    pool = IndexSet(tuple(set(candidates.indices) | {zero}), candidates.family)
    full = evaluate_design(data.x, pool).values
    column = {alpha: j for j, alpha in enumerate(pool.indices)}

    def score(index_set: IndexSet) -> float:
        cols = [column[a] for a in index_set.indices]
        prior = degree_weighted_prior(index_set, prior_policy)
        return log_evidence_map(full[:, cols], data.y, noise, prior).kic

    start = current = IndexSet((zero,), candidates.family)
    initial_kic = current_kic = score(current)
    steps: List[SelectionStep] = []
    remaining = [a for a in candidates.indices if a != zero]
    passes = 0
    while remaining:
        passes += 1
        rejected = []
        for alpha in remaining:
            trial = current.with_index(alpha)
            try:
                value = score(trial)
            except (BayesRegError, np.linalg.LinAlgError) as exc:
                steps.append(SelectionStep(alpha, None, False, len(current), f"{type(exc).__name__}: {exc}"))
                rejected.append(alpha)
                continue
            if value < current_kic - tie_epsilon:
                current, current_kic = trial, value
                steps.append(SelectionStep(alpha, value, True, len(current)))
            else:
                steps.append(SelectionStep(alpha, value, False, len(current)))
                rejected.append(alpha)
        if not sweeps or len(rejected) == len(remaining):
            break
        remaining = rejected

    trace = SelectionTrace(start, initial_kic, steps, current, current_kic, passes)
    return current, trace
