"""Evaluation battery: coverage, set-size strata, per-size coverage curves,
uncertainty histograms, and argmax classification metrics.

Conventions that matter for comparability:

* "correct" always means argmax-of-row equals the true label, with the
  lowest class index winning argmax ties.
* The per-sample uncertainty value is 1 minus the row's top probability,
  which lands in [0, 1 - 1/K]. The definition is isolated in
  uncertainty_values so it can be swapped wholesale.
* Macro metrics average over all K classes, including classes never seen
  and never predicted, with 0/0 ratios defined as 0. This is the
  convention that penalizes a model for absent classes.
* Empty strata yield NaN averages, never errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .core import (
    UNKNOWN_LABEL,
    EvaluationReport,
    Histogram,
    LabeledScores,
    PredictionSetBatch,
    ScoreMatrix,
    SizeBucket,
)
from .errors import EmptyTestSet, IdSequenceMismatch, LengthMismatch, UnknownLabel


def _check_labels(labels, n: int) -> np.ndarray:
    arr = np.asarray(labels, dtype=np.int64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise LengthMismatch(f"expected {n} labels, got shape {arr.shape}")
    if np.any(arr == UNKNOWN_LABEL):
        raise UnknownLabel("evaluation requires every label to be known")
    return arr


def covered_mask(sets: PredictionSetBatch, labels) -> np.ndarray:
    """Boolean per-sample flags: true label is a member of the prediction set."""
    labels = _check_labels(labels, len(sets))
    return _kernels.set_membership(sets.indices, sets.offsets, labels).astype(bool)


def coverage(sets: PredictionSetBatch, labels) -> float:
    """Fraction of samples whose true label lies in their prediction set."""
    if len(sets) == 0:
        raise EmptyTestSet("coverage over zero samples is undefined")
    return float(covered_mask(sets, labels).mean())


def argmax_predictions(scores: ScoreMatrix) -> np.ndarray:
    """Argmax class per row; np.argmax takes the lowest index on ties."""
    return np.argmax(scores.values, axis=1)


class SetSizeStats(NamedTuple):
    avg_all: float
    avg_correct: float
    avg_incorrect: float


def set_size_stats(sets: PredictionSetBatch, scores: ScoreMatrix, labels) -> SetSizeStats:
    """Mean |C(x)| overall and within the argmax-correct/incorrect strata.

    An empty stratum yields NaN for its average.
    """
    n = len(sets)
    if scores.num_samples != n:
        raise LengthMismatch(f"{scores.num_samples} score rows for {n} sets")
    labels = _check_labels(labels, n)
    if n == 0:
        raise EmptyTestSet("set_size_stats over zero samples is undefined")
    sizes = sets.sizes().astype(np.float64)
    correct = argmax_predictions(scores) == labels

    def stratum_mean(mask: np.ndarray) -> float:
        return float(sizes[mask].mean()) if mask.any() else float("nan")

    return SetSizeStats(
        avg_all=float(sizes.mean()),
        avg_correct=stratum_mean(correct),
        avg_incorrect=stratum_mean(~correct),
    )


@dataclass(frozen=True)
class CoverageBySize:
    """Coverage conditioned on realized set size.

    per_size[k]   = (count, coverage among samples with |C| = k)
    cumulative[k] = (count, coverage among samples with |C| <= k)

    Both conditionings are computed because figure-style summaries in the
    wild use either one.
    """

    per_size: Mapping[int, SizeBucket]
    cumulative: Mapping[int, SizeBucket]


def coverage_by_set_size(sets: PredictionSetBatch, labels) -> CoverageBySize:
    if len(sets) == 0:
        raise EmptyTestSet("coverage_by_set_size over zero samples is undefined")
    covered = covered_mask(sets, labels)
    sizes = sets.sizes()
    per_size: dict[int, SizeBucket] = {}
    cumulative: dict[int, SizeBucket] = {}
    run_count = 0
    run_hits = 0
    for k in np.unique(sizes):
        mask = sizes == k
        count = int(mask.sum())
        hits = int(covered[mask].sum())
        per_size[int(k)] = SizeBucket(count, hits / count)
        run_count += count
        run_hits += hits
        cumulative[int(k)] = SizeBucket(run_count, run_hits / run_count)
    return CoverageBySize(per_size=per_size, cumulative=cumulative)


def uncertainty_values(scores: ScoreMatrix) -> np.ndarray:
    """Per-sample unpredictability: 1 minus the row's top probability."""
    return 1.0 - scores.values.max(axis=1)


def _bin_edges(bins: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, int(bins) + 1)


def uncertainty_histograms(
    scores: ScoreMatrix, labels, bins: int = 20
) -> tuple[Histogram, Histogram]:
    """Uncertainty histograms for argmax-correct and argmax-incorrect samples.

    Equal-width bins over [0, 1]; bins are left-closed/right-open except
    the final bin, which also includes 1.0 (numpy histogram semantics).
    """
    labels = _check_labels(labels, scores.num_samples)
    if int(bins) < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    u = uncertainty_values(scores)
    correct = argmax_predictions(scores) == labels
    edges = _bin_edges(bins)
    counts_c, _ = np.histogram(u[correct], bins=edges)
    counts_i, _ = np.histogram(u[~correct], bins=edges)
    return Histogram(edges, counts_c), Histogram(edges, counts_i)


class ClassificationMetrics(NamedTuple):
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float


def classification_metrics(scores: ScoreMatrix, labels) -> ClassificationMetrics:
    """Argmax accuracy plus macro precision/recall/F1 over all K classes."""
    labels = _check_labels(labels, scores.num_samples)
    if scores.num_samples == 0:
        raise EmptyTestSet("classification_metrics over zero samples is undefined")
    k = scores.num_classes
    preds = argmax_predictions(scores)
    confusion = np.bincount(labels * k + preds, minlength=k * k).reshape(k, k)
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp

    def safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
        out = np.zeros_like(num)
        np.divide(num, den, out=out, where=den > 0)
        return out

    precision = safe_div(tp, tp + fp)
    recall = safe_div(tp, tp + fn)
    f1 = safe_div(2.0 * precision * recall, precision + recall)
    return ClassificationMetrics(
        accuracy=float((preds == labels).mean()),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
    )


def build_report(test: LabeledScores, sets: PredictionSetBatch, bins: int = 20) -> EvaluationReport:
    """Assemble the full EvaluationReport for aligned test scores and sets."""
    if test.ids != sets.ids:
        raise IdSequenceMismatch("test scores and prediction sets are not aligned by id")
    if len(test) == 0:
        raise EmptyTestSet("cannot evaluate an empty test set")
    labels = _check_labels(test.labels, len(test))
    sizes = set_size_stats(sets, test.scores, labels)
    cls = classification_metrics(test.scores, labels)
    by_size = coverage_by_set_size(sets, labels)
    hist_c, hist_i = uncertainty_histograms(test.scores, labels, bins=bins)
    return EvaluationReport(
        coverage=coverage(sets, labels),
        avg_set_size=sizes.avg_all,
        avg_set_size_correct=sizes.avg_correct,
        avg_set_size_incorrect=sizes.avg_incorrect,
        accuracy=cls.accuracy,
        macro_precision=cls.macro_precision,
        macro_recall=cls.macro_recall,
        macro_f1=cls.macro_f1,
        coverage_by_set_size=by_size.per_size,
        uncertainty_histogram_correct=hist_c,
        uncertainty_histogram_incorrect=hist_i,
        n_test=len(test),
    )
