"""Bias-variance decomposition of pairwise ordering error for survival models.

Survival prediction is treated as classification of comparable observation
pairs (the pairs whose failure order right censoring leaves known). The
package fits unregularized Cox proportional-hazards models and L1-penalized
paths with model selection, and runs a resampling protocol that splits the
expected pairwise error of each fitter into variance and a bias-plus-noise
remainder as the training size grows.
"""

__version__ = "0.1.0"

from .biasvar import (
    DecompositionReport,
    PairOutcome,
    PairPredictionMatrix,
    aggregate_reports,
    decompose,
    pair_outcomes,
)
from .coxfit import (
    CoxModel,
    FitConfig,
    fit_cox,
    gradient,
    hessian,
    log_partial_likelihood,
    risk_scores,
)
from .coxpath import (
    CV_CINDEX,
    CV_DEVIANCE,
    FIXED_LAMBDA,
    PathConfig,
    PathSolution,
    fit_l1,
    fit_path,
    lambda_max,
    select_model,
)
from .dataio import (
    DatasetSchema,
    ExponentialBaseline,
    SyntheticSpec,
    SyntheticTruth,
    WeibullBaseline,
    dataset_hash,
    generate_synthetic,
    load_csv,
    read_curves,
    write_curves,
    write_dataset,
)
from .exceptions import (
    CalibrationFailed,
    DataError,
    DegenerateFold,
    DimensionMismatch,
    Diverged,
    EmptyAfterFiltering,
    EmptyInput,
    InsufficientData,
    NoComparablePairs,
    NoEvents,
    NumericalError,
    ParseError,
    SchemaError,
    SurvBVError,
    TooFewReplicates,
    TooManyDegenerateDraws,
    UsageError,
)
from .harness import (
    CoxPathAlgorithm,
    CoxPHAlgorithm,
    CurveCell,
    FitFailure,
    LearningCurve,
    ProtocolConfig,
    fit_and_score,
    run_protocol,
)
from .survival import (
    ComparablePair,
    ConcordanceCounts,
    Observation,
    PairLabel,
    SurvivalDataset,
    classify_pairs,
    concordance_counts,
    concordance_index,
    enumerate_comparable_pairs,
)
