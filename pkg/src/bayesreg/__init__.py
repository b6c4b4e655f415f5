"""Closed-form Bayesian linear regression over polynomial bases, with
KIC-based stepwise basis selection."""

__version__ = "0.1.0"

from .basis import DesignMatrix, IndexSet, enumerate_total_degree, evaluate_design
from .diagnostics import BootstrapSummary, Prediction, bootstrap_coefficients, predict
from .errors import BayesRegError, DataError, NoSignFixedPoint, NotPositiveDefinite, NumericalError
from .estimators import (
    Dataset,
    GammaParams,
    NoiseModel,
    PosteriorSummary,
    PriorSpec,
    fit_gls,
    fit_laplace_map,
    fit_ols,
    fit_ridge,
    posterior_density,
    precision_posterior,
)
from .selection import (
    EvidenceReport,
    PriorPolicy,
    SelectionTrace,
    degree_weighted_prior,
    kic,
    log_evidence_map,
    stepwise_select,
)
