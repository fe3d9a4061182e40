"""Synthetic tabular data generation with utility evaluation.

The package covers the full loop: load a schema-typed dataset, synthesize it
sequentially or jointly under a labelled configuration, combine estimates
across the m synthetic copies, and score utility through interval overlap,
distributional divergence, and analysis-level accuracy.
"""

from .analysis import (
    AdhocPredicate,
    ClassificationResult,
    Condition,
    CorrelationResult,
    adhoc_proportion,
    classify_compare,
    correlation_battery,
    load_adhoc,
    pearson,
)
from .dataset import (
    CATEGORICAL,
    NUMERIC,
    Column,
    ColumnKind,
    Dataset,
    LevelMapping,
    Schema,
    coarsen_levels,
    drop_column,
    head_n,
    load_csv,
    load_schema,
    replace_missing,
    write_csv,
)
from .errors import (
    AnalysisError,
    ConfigError,
    DataError,
    EstimandError,
    FitError,
    MetricError,
    SchemaError,
    SpecError,
    SynthbenchError,
    SynthesisError,
)
from .estimands import (
    CombinedEstimate,
    ConfidenceInterval,
    EstimateSet,
    FitSpec,
    ci,
    combine,
    load_fitspecs,
    mean_point_estimand,
    normal_interval,
    regression_estimands,
)
from .harness import (
    ExperimentConfig,
    MetricSettings,
    SynthesizerEntry,
    TimingRecord,
    benchmark_generation,
    emit_tables,
    load_config,
    load_original,
    metric_rows,
    read_report,
    run_experiment,
)
from .metrics import (
    AggregateResult,
    KlScore,
    Overlap,
    UtilityReport,
    aggregate,
    apo,
    cio,
    kl_divergence,
    normalize_kl,
)
from .synthesis import (
    Method,
    PredictorMatrix,
    SynthesizerSpec,
    SyntheticSet,
    VisitSequence,
    build_spec,
    load_synthetic_set,
    make_order,
    make_predictors,
    parse_label,
    save_synthetic_set,
    synthesize,
)

__version__ = "0.1.0"

__all__ = [
    "AdhocPredicate",
    "AggregateResult",
    "AnalysisError",
    "CATEGORICAL",
    "ClassificationResult",
    "Column",
    "ColumnKind",
    "CombinedEstimate",
    "Condition",
    "ConfidenceInterval",
    "ConfigError",
    "CorrelationResult",
    "DataError",
    "Dataset",
    "EstimandError",
    "EstimateSet",
    "ExperimentConfig",
    "FitError",
    "FitSpec",
    "KlScore",
    "LevelMapping",
    "Method",
    "MetricError",
    "MetricSettings",
    "NUMERIC",
    "Overlap",
    "PredictorMatrix",
    "Schema",
    "SchemaError",
    "SpecError",
    "SynthbenchError",
    "SynthesisError",
    "SynthesizerEntry",
    "SynthesizerSpec",
    "SyntheticSet",
    "TimingRecord",
    "UtilityReport",
    "VisitSequence",
    "adhoc_proportion",
    "aggregate",
    "apo",
    "benchmark_generation",
    "build_spec",
    "ci",
    "cio",
    "classify_compare",
    "coarsen_levels",
    "combine",
    "correlation_battery",
    "drop_column",
    "emit_tables",
    "head_n",
    "kl_divergence",
    "load_adhoc",
    "load_config",
    "load_csv",
    "load_fitspecs",
    "load_original",
    "load_schema",
    "load_synthetic_set",
    "make_order",
    "make_predictors",
    "mean_point_estimand",
    "metric_rows",
    "normal_interval",
    "normalize_kl",
    "parse_label",
    "pearson",
    "read_report",
    "regression_estimands",
    "replace_missing",
    "run_experiment",
    "save_synthetic_set",
    "synthesize",
    "write_csv",
]
