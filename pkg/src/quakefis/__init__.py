"""Coupled-earthquake alarm forecasting with a trainable Sugeno fuzzy system.

The pipeline: parse a seismic catalog, extract coupled-event feature
vectors, train a two-rule Sugeno system with hybrid least-squares /
backpropagation learning, and score fixed-horizon magnitude alarms
against the catalog.
"""

__version__ = "0.1.0"

from .fuzzy import (
    AND_OPERATORS,
    BellMF,
    FuzzyInferenceSystem,
    ModelFormatError,
    NoRuleFiresError,
    SugenoRule,
    firing_strength,
)
from .anfis import (
    BatchTrace,
    EpochStats,
    LayerTrace,
    TrainingConfig,
    TrainingDivergedError,
    TrainingReport,
    batch_forward,
    central_difference,
    evaluate_rmse,
    finite_difference_gradient,
    fit_consequents,
    forward,
    init_grid_fis,
    premise_gradients,
    squared_error,
    train,
)
from .catalog import (
    CatalogFormatError,
    CoupleRecord,
    CouplingConfig,
    SeismicEvent,
    assign_targets,
    extract_couples,
    haversine_km,
    parse_catalog,
    read_couples_csv,
    split_by_epoch,
    training_arrays,
    write_couples_csv,
)
from .evaluation import (
    AlarmRecord,
    EvaluationReport,
    EvaluationRow,
    build_report,
    emit_plot_data,
    predict_couples,
    score_alarms,
)
from .estimator import AnfisRegressor

__all__ = [
    "AND_OPERATORS",
    "AlarmRecord",
    "AnfisRegressor",
    "BatchTrace",
    "BellMF",
    "CatalogFormatError",
    "CoupleRecord",
    "CouplingConfig",
    "EpochStats",
    "EvaluationReport",
    "EvaluationRow",
    "FuzzyInferenceSystem",
    "LayerTrace",
    "ModelFormatError",
    "NoRuleFiresError",
    "SeismicEvent",
    "SugenoRule",
    "TrainingConfig",
    "TrainingDivergedError",
    "TrainingReport",
    "assign_targets",
    "batch_forward",
    "build_report",
    "central_difference",
    "emit_plot_data",
    "evaluate_rmse",
    "extract_couples",
    "finite_difference_gradient",
    "firing_strength",
    "fit_consequents",
    "forward",
    "haversine_km",
    "init_grid_fis",
    "parse_catalog",
    "predict_couples",
    "premise_gradients",
    "read_couples_csv",
    "score_alarms",
    "split_by_epoch",
    "squared_error",
    "train",
    "training_arrays",
    "write_couples_csv",
]
