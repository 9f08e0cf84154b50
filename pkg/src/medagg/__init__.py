"""Sparse aggregation-direction estimation for mediation analysis.

Estimates one latent exposure aggregate and one latent mediator aggregate
whose mediation pathway explains the outcome, with l1-sparse weights fit
by a profiled two-block ADMM, plus simulation and benchmarking tools.
"""

from .data import (
    AggregationWeights,
    Dataset,
    Normalization,
    PenaltyConfig,
    convert_normalization,
    residualize_covariates,
    standardize_columns,
    validate_dataset,
)
from .metrics import (
    BenchmarkRow,
    SelectionCounts,
    aggregate_replicates,
    classification_metrics,
    selection_counts,
)
from .profiling import (
    ObjectiveBreakdown,
    ProfiledCoefficients,
    SufficientStats,
    compute_aggregates,
    mediation_proportion,
    objective_value,
    profile_coefficients,
)
from .simulation import (
    Misspecify,
    Regime,
    SimConfig,
    SimTruth,
    compound_symmetry_cov,
    generate_dataset,
    population_mp,
    sample_mvn,
)
from .solver import (
    ConvergenceStatus,
    FitResult,
    SolverOptions,
    SolverState,
    a_update,
    b_update,
    canonicalize_signs,
    check_convergence,
    dual_update,
    fit,
    initialize_weights,
    projected_subgradient_norm,
    soft_threshold,
    tangent_hessian_check,
)
from .tuning import CvGrid, CvReport, cv_loss, cv_select, fold_split

__version__ = "0.1.0"

__all__ = [
    "AggregationWeights", "Dataset", "Normalization", "PenaltyConfig",
    "convert_normalization", "residualize_covariates", "standardize_columns",
    "validate_dataset",
    "ObjectiveBreakdown", "ProfiledCoefficients", "SufficientStats",
    "compute_aggregates", "mediation_proportion", "objective_value",
    "profile_coefficients",
    "ConvergenceStatus", "FitResult", "SolverOptions", "SolverState",
    "a_update", "b_update", "canonicalize_signs", "check_convergence",
    "dual_update", "fit", "initialize_weights", "projected_subgradient_norm",
    "soft_threshold", "tangent_hessian_check",
    "CvGrid", "CvReport", "cv_loss", "cv_select", "fold_split",
    "Misspecify", "Regime", "SimConfig", "SimTruth", "compound_symmetry_cov",
    "generate_dataset", "population_mp", "sample_mvn",
    "BenchmarkRow", "SelectionCounts", "aggregate_replicates",
    "classification_metrics", "selection_counts",
    "__version__",
]
