"""Sparse orthogonal factor regression: simultaneously low-rank, sparse and
orthogonal SVD estimation for multivariate regression, with tuning machinery,
application reductions, a simulation benchmark and theory diagnostics."""

from .lasso_init import InitState, initialize
from .linalg import ThinSvd, polar_orthogonal_factor, thin_svd
from .metrics_theory import MetricsRecord, TheoryReport, align_layers, evaluate
from .penalty import Penalty, PenaltyKind, adaptive_weights
from .simgen import GroundTruth, ModelSpec, gen_holdout, gen_model, rng_stream
from .solver import SofarConfig, SofarDivergedError, SofarFit, fit
from .tuning import Criterion, TuningResult, marginal_null_bounds, search

__version__ = "0.1.0"

__all__ = [
    "InitState",
    "initialize",
    "ThinSvd",
    "thin_svd",
    "polar_orthogonal_factor",
    "MetricsRecord",
    "TheoryReport",
    "align_layers",
    "evaluate",
    "Penalty",
    "PenaltyKind",
    "adaptive_weights",
    "GroundTruth",
    "ModelSpec",
    "gen_model",
    "gen_holdout",
    "rng_stream",
    "SofarConfig",
    "SofarDivergedError",
    "SofarFit",
    "fit",
    "Criterion",
    "TuningResult",
    "marginal_null_bounds",
    "search",
    "__version__",
]
