"""Exact-likelihood estimation for SDEs with a random drift multiplier.

Subjects follow dX = phi b(X) dt + sigma(X) dW with phi ~ N(mu, omega2)
drawn once per subject. The likelihood of theta = (mu, omega2) given a
path depends on the data only through two stochastic integrals (U, V),
and this package simulates such ensembles, computes (U, V), evaluates the
closed-form likelihood, maximizes it over a compact rectangle, and runs
the Monte Carlo experiments that exercise the estimator's limit theory.
"""

from .asymptotics import (
    ConsistencyConfig,
    ContinuityConfig,
    ConvergenceTable,
    DesignFamily,
    ExperimentReport,
    InfoEstimate,
    KlEstimate,
    NormalityConfig,
    averaged_limits,
    fisher_info_mc,
    kl_mc,
    run_consistency_experiment,
    run_moment_continuity_probe,
    run_normality_experiment,
    sqrt_2x2_spd,
)
from .config import emit_config, parse_config, resolve_seed
from .errors import (
    AllDegenerate,
    ConfigError,
    DegenerateDiffusion,
    EmptyEnsemble,
    EmptyExperiment,
    ExperimentFailed,
    IngestError,
    MissingKey,
    MissingPhi,
    NonFiniteObjective,
    NotFound,
    ParseError,
    SdeRemleError,
    SimulationDiverged,
    UnknownKey,
)
from .estimator import FitOptions, MleFit, audit_fit, fit_mle, profile_mu
from .io import read_paths_csv, write_fit_csv, write_paths_csv, write_stats_csv
from .likelihood import (
    ScoreHess,
    log_density_ratio,
    log_lambda,
    score_hess,
    total_hess,
    total_loglik,
    total_score,
)
from .models import (
    Design,
    ModelSpec,
    ParamSpace,
    RandomEffect,
    Theta,
    builtin_model,
    register_model,
)
from .rng import PHI_STREAM_ID, RngStream, derive_seed
from .simulate import (
    Path,
    draw_random_effects,
    euler_maruyama,
    simulate_ensemble,
    time_grid,
)
from .stats import SuffStats, SuffStatsDecomposition, compute_suff_stats, decompose, stats_list

__version__ = "0.1.0"

__all__ = [
    "AllDegenerate",
    "ConfigError",
    "ConsistencyConfig",
    "ContinuityConfig",
    "ConvergenceTable",
    "DegenerateDiffusion",
    "Design",
    "DesignFamily",
    "EmptyEnsemble",
    "EmptyExperiment",
    "ExperimentFailed",
    "ExperimentReport",
    "FitOptions",
    "InfoEstimate",
    "IngestError",
    "KlEstimate",
    "MissingKey",
    "MissingPhi",
    "MleFit",
    "ModelSpec",
    "NonFiniteObjective",
    "NormalityConfig",
    "NotFound",
    "ParamSpace",
    "ParseError",
    "Path",
    "PHI_STREAM_ID",
    "RandomEffect",
    "RngStream",
    "ScoreHess",
    "SdeRemleError",
    "SimulationDiverged",
    "SuffStats",
    "SuffStatsDecomposition",
    "Theta",
    "UnknownKey",
    "audit_fit",
    "averaged_limits",
    "builtin_model",
    "compute_suff_stats",
    "decompose",
    "derive_seed",
    "draw_random_effects",
    "emit_config",
    "euler_maruyama",
    "fisher_info_mc",
    "fit_mle",
    "kl_mc",
    "log_density_ratio",
    "log_lambda",
    "parse_config",
    "profile_mu",
    "read_paths_csv",
    "register_model",
    "resolve_seed",
    "run_consistency_experiment",
    "run_moment_continuity_probe",
    "run_normality_experiment",
    "score_hess",
    "simulate_ensemble",
    "sqrt_2x2_spd",
    "stats_list",
    "time_grid",
    "total_hess",
    "total_loglik",
    "total_score",
    "write_fit_csv",
    "write_paths_csv",
    "write_stats_csv",
]
