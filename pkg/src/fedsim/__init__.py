"""Federated-learning simulation with pluggable server aggregation strategies."""

from .data import (
    ClientShard,
    Dataset,
    generate_blobs,
    load_csv,
    make_client_shards,
    stratified_partition,
    stratified_train_test_split,
)
from .exceptions import (
    ConfigError,
    CsvParseError,
    FedsimError,
    NumericError,
    ShapeMismatchError,
)
from .models import (
    ModelSpec,
    TrainConfig,
    evaluate,
    init_params,
    loss_and_gradient,
    predict_proba,
    sgd_train,
)
from .nelder_mead import MinimizeResult, SimplexConfig, minimize
from .orchestrator import (
    ClientRoundMetrics,
    ComparisonResult,
    FederationConfig,
    RoundReport,
    StrategyRun,
    compare_strategies,
    run_federation,
    weighted_accuracy,
)
from .params import (
    ParamVector,
    ShapeManifest,
    coordinate_median,
    l2_distance,
    l2_norm_sum,
    linear_combination,
    zeros_like,
)
from .strategies import (
    STRATEGIES,
    Aggregator,
    AlphaSolution,
    ClientUpdate,
    StrategyHyperparams,
    StrategyState,
    aggregate_fedavg,
    aggregate_fedavgm,
    aggregate_fedavgopt,
    aggregate_fedmedian,
    aggregate_fedopt,
    candidate_aggregate,
    default_hyperparams,
    objective_f,
)

__version__ = "0.1.0"

__all__ = [
    "Aggregator",
    "AlphaSolution",
    "ClientRoundMetrics",
    "ClientShard",
    "ClientUpdate",
    "ComparisonResult",
    "ConfigError",
    "CsvParseError",
    "Dataset",
    "FederationConfig",
    "FedsimError",
    "MinimizeResult",
    "ModelSpec",
    "NumericError",
    "ParamVector",
    "RoundReport",
    "STRATEGIES",
    "ShapeManifest",
    "ShapeMismatchError",
    "SimplexConfig",
    "StrategyHyperparams",
    "StrategyRun",
    "StrategyState",
    "TrainConfig",
    "aggregate_fedavg",
    "aggregate_fedavgm",
    "aggregate_fedavgopt",
    "aggregate_fedmedian",
    "aggregate_fedopt",
    "candidate_aggregate",
    "compare_strategies",
    "coordinate_median",
    "default_hyperparams",
    "evaluate",
    "generate_blobs",
    "init_params",
    "l2_distance",
    "l2_norm_sum",
    "linear_combination",
    "load_csv",
    "loss_and_gradient",
    "make_client_shards",
    "minimize",
    "objective_f",
    "predict_proba",
    "run_federation",
    "sgd_train",
    "stratified_partition",
    "stratified_train_test_split",
    "weighted_accuracy",
    "zeros_like",
]
