"""scoresets: split-conformal prediction sets over classifier score matrices.

Calibrates a finite-sample coverage threshold on held-out softmax scores,
builds per-sample prediction sets, fuses multiple expert models by
probability averaging, evaluates the usual battery (coverage, stratified
set sizes, uncertainty histograms, macro classification metrics) and ships
a synthetic-data simulator that verifies the coverage interval end to end.
"""

from .conformal import calibrate, conformity_scores, coverage_bounds, predict_sets
from .core import (
    UNKNOWN_LABEL,
    CalibrationArtifact,
    EvaluationReport,
    Histogram,
    LabeledScores,
    PredictionSetBatch,
    ScoreKind,
    ScoreMatrix,
    softmax_rows,
    validate_score_matrix,
)
from .ensemble import align_by_id, average_scores
from .errors import ScoresetsError
from .metrics import (
    build_report,
    classification_metrics,
    coverage,
    coverage_by_set_size,
    set_size_stats,
    uncertainty_histograms,
    uncertainty_values,
)
from .simulator import SimulatorConfig, coverage_trial, default_config, simulate
from .splits import SplitManifest, apply_split, make_split, merge_labeled

__version__ = "0.1.0"

__all__ = [
    "CalibrationArtifact",
    "EvaluationReport",
    "Histogram",
    "LabeledScores",
    "PredictionSetBatch",
    "ScoreKind",
    "ScoreMatrix",
    "ScoresetsError",
    "SimulatorConfig",
    "SplitManifest",
    "UNKNOWN_LABEL",
    "align_by_id",
    "apply_split",
    "average_scores",
    "build_report",
    "calibrate",
    "classification_metrics",
    "conformity_scores",
    "coverage",
    "coverage_bounds",
    "coverage_by_set_size",
    "coverage_trial",
    "default_config",
    "make_split",
    "merge_labeled",
    "predict_sets",
    "set_size_stats",
    "simulate",
    "softmax_rows",
    "uncertainty_histograms",
    "uncertainty_values",
    "validate_score_matrix",
    "__version__",
]
