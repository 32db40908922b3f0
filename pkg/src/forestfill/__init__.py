"""Random-forest imputation with interchangeable execution strategies,
plus the simulation harness used to compare them."""

from .amputation import (
    AmputationOutcome,
    AmputationSpec,
    Mechanism,
    PatternKind,
    ampute,
    scenario_patterns,
)
from .dataset import (
    MISSING_SENTINEL,
    MISSING_TOKEN,
    ColumnSummary,
    DataMatrix,
    MissingMask,
    column_summaries,
    imputation_order,
    initialize_missing,
    observed_mean,
    read_csv,
    write_csv,
)
from .errors import (
    AmputationFailure,
    ConfigError,
    CsvParseError,
    DegenerateCorrelation,
    DegenerateDiff,
    DegenerateNrmse,
    FactorizationFailure,
    ForestfillError,
    ImputationFailure,
    InvalidInput,
    OobUnavailable,
    ShapeError,
    SingularDesign,
    StudyFailure,
    UnimputableColumn,
    ZeroDenominator,
)
from .forest import (
    Forest,
    ForestParams,
    TreeNode,
    fit_forest,
    fit_tree,
    merge_forests,
    oob_nrmse,
    predict,
    resolve_mtry,
)
from .imputer import (
    ImputationResult,
    ImputationStrategy,
    ImputerParams,
    ParallelForests,
    ParallelVariables,
    Sequential,
    StopReason,
    chunk_sizes,
    impute,
    iteration_diff,
    parse_strategy,
    strategy_label,
)
from .metrics import (
    BiasKind,
    CoefBias,
    MetricsRecord,
    OlsFit,
    ScenarioKind,
    ScenarioTruth,
    coef_relative_bias,
    metrics_csv_row,
    metrics_header,
    nrmse,
    ols_fit,
    pearson,
    relative_bias_mean,
    relative_bias_sd,
    scenario_truth,
)
from .simulation import (
    COLUMN_NAMES,
    DEFAULT_MASTER_SEED,
    DEFAULT_STRATEGIES,
    ReplicateBundle,
    ReplicateFailure,
    ScenarioConfig,
    StudyResult,
    generate_scenario,
    run_replicate,
    run_study,
    scenario_mvn,
)
from .stochastic import (
    MvnSpec,
    SeedSpec,
    bootstrap_indices,
    cholesky,
    sample_mvn,
)

__version__ = "0.1.0"

__all__ = [
    "AmputationFailure",
    "AmputationOutcome",
    "AmputationSpec",
    "BiasKind",
    "CoefBias",
    "COLUMN_NAMES",
    "ColumnSummary",
    "ConfigError",
    "CsvParseError",
    "DEFAULT_MASTER_SEED",
    "DEFAULT_STRATEGIES",
    "DataMatrix",
    "DegenerateCorrelation",
    "DegenerateDiff",
    "DegenerateNrmse",
    "FactorizationFailure",
    "Forest",
    "ForestParams",
    "ForestfillError",
    "ImputationFailure",
    "ImputationResult",
    "ImputationStrategy",
    "ImputerParams",
    "InvalidInput",
    "MISSING_SENTINEL",
    "MISSING_TOKEN",
    "Mechanism",
    "MetricsRecord",
    "MissingMask",
    "MvnSpec",
    "OlsFit",
    "OobUnavailable",
    "ParallelForests",
    "ParallelVariables",
    "PatternKind",
    "ReplicateBundle",
    "ReplicateFailure",
    "ScenarioConfig",
    "ScenarioKind",
    "ScenarioTruth",
    "SeedSpec",
    "Sequential",
    "ShapeError",
    "SingularDesign",
    "StopReason",
    "StudyFailure",
    "StudyResult",
    "TreeNode",
    "UnimputableColumn",
    "ZeroDenominator",
    "ampute",
    "bootstrap_indices",
    "chunk_sizes",
    "cholesky",
    "coef_relative_bias",
    "column_summaries",
    "fit_forest",
    "fit_tree",
    "generate_scenario",
    "imputation_order",
    "impute",
    "initialize_missing",
    "iteration_diff",
    "merge_forests",
    "metrics_csv_row",
    "metrics_header",
    "nrmse",
    "observed_mean",
    "oob_nrmse",
    "ols_fit",
    "parse_strategy",
    "pearson",
    "predict",
    "read_csv",
    "relative_bias_mean",
    "relative_bias_sd",
    "resolve_mtry",
    "run_replicate",
    "run_study",
    "sample_mvn",
    "scenario_mvn",
    "scenario_patterns",
    "scenario_truth",
    "strategy_label",
    "write_csv",
]
