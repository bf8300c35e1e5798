"""Split conformal calibration and prediction-set construction.

Score convention, fixed across the toolkit: the conformity score of class
y at a sample with probability row p is ``1 - p[y]``, and class y enters
the prediction set iff ``1 - p[y] <= q_hat`` (closed inequality, so
threshold ties are included). The threshold is the ceil((n+1)(1-alpha))-th
smallest calibration score of the true classes; when that rank exceeds n
the threshold degenerates to 1.0 and every set is the full class list,
which keeps the finite-sample guarantee conservatively instead of erroring.

Membership is evaluated through the same ``1 - p`` expression used to
compute calibration scores, so a calibration row whose score equals q_hat
is covered exactly, with no floating-point asymmetry between the two sides.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import _kernels
from .core import CalibrationArtifact, LabeledScores, PredictionSetBatch, ScoreKind
from .errors import (
    AlphaOutOfRange,
    ClassCountMismatch,
    EmptyCalibrationSet,
    UnknownLabel,
)


def _require_known(data: LabeledScores, what: str) -> None:
    if not data.all_labels_known():
        i = int(np.argmax(~data.known_mask))
        raise UnknownLabel(f"{what} requires known labels; sample {data.ids[i]!r} has none")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0) or math.isnan(alpha):
        raise AlphaOutOfRange(f"alpha must be in (0, 1), got {alpha!r}")
    return alpha


def conformity_scores(data: LabeledScores) -> np.ndarray:
    """Per-sample true-class conformity scores 1 - p[y], in input order."""
    _require_known(data, "conformity_scores")
    return _kernels.conformity(data.scores.values, data.labels)


def quantile_rank(n: int, alpha: float) -> int:
    """ceil((n+1)(1-alpha)), evaluated exactly for the binary float alpha.

    Computed as (n+1) - floor((n+1)*alpha) in rational arithmetic; a plain
    float product can land a hair above or below an integer boundary and
    shift the rank by one.
    """
    return (n + 1) - math.floor(Fraction(alpha) * (n + 1))


def calibrate(calib: LabeledScores, alpha: float, created_from: str = "") -> CalibrationArtifact:
    """Compute the finite-sample-corrected empirical quantile threshold.

    The threshold is the rank-th smallest calibration score with
    rank = ceil((n+1)(1-alpha)), ties kept as duplicates; rank > n yields
    the degenerate full-set threshold 1.0.
    """
    alpha = _check_alpha(alpha)
    n = len(calib)
    if n < 1:
        raise EmptyCalibrationSet("calibration set is empty")
    scores = conformity_scores(calib)
    rank = quantile_rank(n, alpha)
    if rank > n:
        q_hat = 1.0
    else:
        q_hat = float(np.sort(scores)[rank - 1])
    return CalibrationArtifact(
        alpha=alpha,
        n_calibration=n,
        q_hat=q_hat,
        score_kind=ScoreKind.ONE_MINUS_TRUE_CLASS_PROB,
        created_from=created_from,
        num_classes=calib.num_classes,
    )


def predict_sets(
    test: LabeledScores,
    artifact: CalibrationArtifact,
    allow_empty: bool = True,
) -> PredictionSetBatch:
    """Apply a calibrated threshold to every row of ``test``.

    Labels in ``test`` may be unknown; only the score rows are used. With
    allow_empty=False, a row whose set would be empty gets its argmax
    class forced in (lowest index wins ties). Whenever the set is
    non-empty the argmax class is already a member, because it has the
    smallest conformity score in its row.
    """
    if artifact.num_classes is not None and artifact.num_classes != test.num_classes:
        raise ClassCountMismatch(
            f"test rows have {test.num_classes} classes but the threshold was "
            f"calibrated on {artifact.num_classes}"
        )
    indices, offsets = _kernels.build_sets(
        test.scores.values, artifact.q_hat, force_argmax=not allow_empty
    )
    return PredictionSetBatch(
        ids=test.ids,
        indices=indices,
        offsets=offsets,
        num_classes=test.num_classes,
        q_hat_used=artifact.q_hat,
        allow_empty=allow_empty,
    )


def coverage_bounds(alpha: float, n: int) -> tuple[float, float]:
    """Marginal coverage interval [1-alpha, 1-alpha + 1/(n+1)], upper clamped to 1."""
    alpha = _check_alpha(alpha)
    n = int(n)
    if n < 1:
        raise EmptyCalibrationSet(f"n must be >= 1, got {n}")
    lower = 1.0 - alpha
    upper = min(1.0, lower + 1.0 / (n + 1))
    return lower, upper
