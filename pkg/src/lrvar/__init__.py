"""Low-rank vector autoregression: simulation, estimation, and evaluation.

The package covers the full loop for VAR(1) processes with (approximately)
low-rank transition matrices: simulating rank-constrained processes,
estimating the transition matrix under rank or nuclear-norm constraints with
data-driven rank selection, and scoring estimators by excess one-step
prediction risk on fresh trajectories.
"""

__version__ = "0.1.0"

from .estimators import (
    ConstantTrend,
    DiagonalPlusLowRankVAR,
    FitResult,
    FixedRankVAR,
    FullRankVAR,
    IndependentAR1,
    NuclearNormVAR,
    RankPenalizedVAR,
    predict_one_step,
)
from .exceptions import (
    ConfigError,
    ContractionViolation,
    DataError,
    NoRankJump,
    NumericalFailure,
    SampleTooSmall,
)
from .experiments import (
    CellReport,
    ForecastTask,
    ReplicationRecord,
    SimulationGrid,
    aggregate_records,
    build_estimator,
    emit_reports,
    estimator_name,
    grid_from_dict,
    load_replications_csv,
    load_series_csv,
    run_forecast_task,
    run_simulation_grid,
    task_from_dict,
    write_forecast_report,
)
from .linalg import (
    LowRankFactorization,
    SvdDecomposition,
    numerical_rank,
    project_spectral_ball,
    schatten_norm,
    singular_value_threshold,
    singular_values,
    spectral_norm,
    svd,
)
from .process import (
    NoiseSpec,
    TransitionSpec,
    generate_transition,
    load_trajectory_csv,
    save_trajectory_csv,
    simulate,
    stationary_covariance,
)
from .risk import (
    Loss,
    PenaltyConstants,
    check_assumption4,
    empirical_pair_risk,
    empirical_risk,
    excess_risk,
    max_admissible_rank,
    theoretical_penalty,
)
from .selection import (
    RankPath,
    SlopeSelection,
    compute_rank_path,
    default_constant_grid,
    select_constant,
    sqrt_shape,
)

__all__ = [
    "__version__",
    # estimators
    "FullRankVAR",
    "FixedRankVAR",
    "RankPenalizedVAR",
    "NuclearNormVAR",
    "ConstantTrend",
    "IndependentAR1",
    "DiagonalPlusLowRankVAR",
    "FitResult",
    "predict_one_step",
    # process simulation
    "TransitionSpec",
    "NoiseSpec",
    "generate_transition",
    "simulate",
    "stationary_covariance",
    "save_trajectory_csv",
    "load_trajectory_csv",
    # risk and penalties
    "Loss",
    "PenaltyConstants",
    "empirical_risk",
    "empirical_pair_risk",
    "excess_risk",
    "theoretical_penalty",
    "max_admissible_rank",
    "check_assumption4",
    # rank selection
    "RankPath",
    "SlopeSelection",
    "sqrt_shape",
    "default_constant_grid",
    "compute_rank_path",
    "select_constant",
    # experiments
    "SimulationGrid",
    "ReplicationRecord",
    "CellReport",
    "ForecastTask",
    "build_estimator",
    "estimator_name",
    "grid_from_dict",
    "task_from_dict",
    "run_simulation_grid",
    "emit_reports",
    "load_series_csv",
    "load_replications_csv",
    "aggregate_records",
    "run_forecast_task",
    "write_forecast_report",
    # linear algebra helpers
    "SvdDecomposition",
    "LowRankFactorization",
    "svd",
    "singular_values",
    "spectral_norm",
    "schatten_norm",
    "numerical_rank",
    "project_spectral_ball",
    "singular_value_threshold",
    # errors
    "NumericalFailure",
    "ContractionViolation",
    "SampleTooSmall",
    "NoRankJump",
    "ConfigError",
    "DataError",
]
