"""Domain types shared by every module, validated on construction.

All types are immutable after construction (backing arrays are marked
read-only) and safe to share across threads; every operation on them is a
pure function.

Two row-sum tolerances exist on purpose: matrices arriving from the
outside world (CSV files, foreign exporters) are accepted within 1e-6
because text round-tripping loses precision, while rows produced inside
this package must be tight to 1e-9. Out-of-tolerance input is rejected,
never silently renormalized.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    AlphaOutOfRange,
    DuplicateIds,
    EmptyCalibrationSet,
    EntryOutOfRange,
    LabelOutOfRange,
    LengthMismatch,
    MalformedSetCell,
    NegativeEntry,
    NonFiniteInput,
    QHatOutOfRange,
    RowSumOutOfTolerance,
    TooFewClasses,
)

EXTERNAL_ROW_SUM_TOL = 1e-6
INTERNAL_ROW_SUM_TOL = 1e-9

#: Sentinel for "true label not known" in label vectors and CSV files.
UNKNOWN_LABEL = -1


def _as_matrix(raw) -> np.ndarray:
    try:
        values = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"input is not a rectangular numeric matrix: {exc}") from None
    if values.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={values.ndim}")
    return np.ascontiguousarray(values)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """N x K row-stochastic matrix of per-sample class probabilities.

    Use :meth:`validate` (or :func:`validate_score_matrix`) to construct;
    direct construction runs the same checks at the external tolerance.
    """

    values: np.ndarray
    row_sum_tol: float = EXTERNAL_ROW_SUM_TOL

    def __post_init__(self) -> None:
        values = _as_matrix(self.values)
        if values.shape[1] < 2:
            raise TooFewClasses(f"need at least 2 classes, got {values.shape[1]}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteInput("score matrix contains NaN or infinity")
        if np.any(values < 0.0):
            i, j = np.argwhere(values < 0.0)[0]
            raise NegativeEntry(f"negative probability {float(values[i, j])!r} at row {i}, column {j}")
        if np.any(values > 1.0):
            i, j = np.argwhere(values > 1.0)[0]
            raise EntryOutOfRange(f"probability {float(values[i, j])!r} > 1 at row {i}, column {j}")
        if values.shape[0] > 0:
            sums = values.sum(axis=1)
            bad = np.abs(sums - 1.0) > self.row_sum_tol
            if np.any(bad):
                i = int(np.argmax(bad))
                raise RowSumOutOfTolerance(
                    f"row {i} sums to {float(sums[i])!r}, outside 1 +/- {self.row_sum_tol}"
                )
        object.__setattr__(self, "values", _freeze(values))

    @classmethod
    def validate(cls, raw, row_sum_tol: float = EXTERNAL_ROW_SUM_TOL) -> "ScoreMatrix":
        return cls(raw, row_sum_tol)

    @property
    def num_samples(self) -> int:
        return self.values.shape[0]

    @property
    def num_classes(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "ScoreMatrix":
        """Row subset, bypassing re-validation (rows are unchanged)."""
        picked = np.ascontiguousarray(self.values[np.asarray(indices, dtype=np.intp)])
        out = object.__new__(ScoreMatrix)
        object.__setattr__(out, "values", _freeze(picked))
        object.__setattr__(out, "row_sum_tol", self.row_sum_tol)
        return out


def validate_score_matrix(raw) -> ScoreMatrix:
    """Validate an externally produced probability matrix (tolerance 1e-6)."""
    return ScoreMatrix.validate(raw, EXTERNAL_ROW_SUM_TOL)


def softmax_rows(logits) -> ScoreMatrix:
    """Exp-normalize each row with max-subtraction for overflow safety."""
    x = _as_matrix(logits)
    if x.shape[1] < 2:
        raise TooFewClasses(f"need at least 2 classes, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("logits contain NaN or infinity")
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    return ScoreMatrix.validate(probs, INTERNAL_ROW_SUM_TOL)


def _as_labels(labels, n: int, num_classes: int) -> np.ndarray:
    arr = np.asarray(labels, dtype=np.int64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise LengthMismatch(f"expected {n} labels, got shape {arr.shape}")
    known = arr != UNKNOWN_LABEL
    if np.any(arr[known] < 0) or np.any(arr[known] >= num_classes):
        bad = arr[known][(arr[known] < 0) | (arr[known] >= num_classes)][0]
        raise LabelOutOfRange(f"label {bad} outside [0, {num_classes})")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True, eq=False)
class LabeledScores:
    """A ScoreMatrix joined with unique sample ids and (possibly unknown) labels."""

    ids: tuple[str, ...]
    labels: np.ndarray
    scores: ScoreMatrix

    def __post_init__(self) -> None:
        ids = tuple(str(i) for i in self.ids)
        if len(ids) != self.scores.num_samples:
            raise LengthMismatch(
                f"{len(ids)} ids for {self.scores.num_samples} score rows"
            )
        if len(set(ids)) != len(ids):
            seen: set[str] = set()
            dup = next(i for i in ids if i in seen or seen.add(i))
            raise DuplicateIds(f"duplicate sample id {dup!r}")
        labels = _as_labels(self.labels, len(ids), self.scores.num_classes)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", _freeze(labels))

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def num_classes(self) -> int:
        return self.scores.num_classes

    @property
    def known_mask(self) -> np.ndarray:
        return self.labels != UNKNOWN_LABEL

    def all_labels_known(self) -> bool:
        return bool(np.all(self.known_mask))

    def subset(self, indices) -> "LabeledScores":
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledScores(
            ids=tuple(self.ids[i] for i in idx),
            labels=self.labels[idx],
            scores=self.scores.take(idx),
        )


class ScoreKind(str, enum.Enum):
    """Conformity-score definitions this toolkit can calibrate."""

    ONE_MINUS_TRUE_CLASS_PROB = "one_minus_true_class_prob"


@dataclass(frozen=True)
class CalibrationArtifact:
    """Calibrated threshold with its provenance.

    ``num_classes`` records the width of the score space the threshold was
    computed from, when known, so prediction can refuse mismatched inputs.
    """

    alpha: float
    n_calibration: int
    q_hat: float
    score_kind: ScoreKind = ScoreKind.ONE_MINUS_TRUE_CLASS_PROB
    created_from: str = ""
    num_classes: int | None = None

    def __post_init__(self) -> None:
        if not (0.0 < float(self.alpha) < 1.0):
            raise AlphaOutOfRange(f"alpha must be in (0, 1), got {self.alpha!r}")
        if int(self.n_calibration) < 1:
            raise EmptyCalibrationSet(
                f"n_calibration must be >= 1, got {self.n_calibration!r}"
            )
        if not (0.0 <= float(self.q_hat) <= 1.0):
            raise QHatOutOfRange(f"q_hat must be in [0, 1], got {self.q_hat!r}")
        object.__setattr__(self, "score_kind", ScoreKind(self.score_kind))


@dataclass(frozen=True, eq=False)
class PredictionSetBatch:
    """Per-sample label sets in compressed sparse-row layout.

    ``indices[offsets[i]:offsets[i+1]]`` is sample i's set, strictly
    ascending. ``allow_empty`` records the empty-set policy that was in
    force when the sets were built; ``q_hat_used`` is NaN when unknown
    (e.g. a CSV read back without its sidecar).
    """

    ids: tuple[str, ...]
    indices: np.ndarray
    offsets: np.ndarray
    num_classes: int
    q_hat_used: float
    allow_empty: bool

    def __post_init__(self) -> None:
        ids = tuple(str(i) for i in self.ids)
        if len(set(ids)) != len(ids):
            raise DuplicateIds("duplicate sample id in prediction batch")
        indices = np.ascontiguousarray(np.asarray(self.indices, dtype=np.int32))
        offsets = np.ascontiguousarray(np.asarray(self.offsets, dtype=np.int64))
        if offsets.ndim != 1 or offsets.shape[0] != len(ids) + 1:
            raise LengthMismatch(
                f"offsets length {offsets.shape[0]} does not match {len(ids)} ids"
            )
        if offsets[0] != 0 or offsets[-1] != indices.shape[0] or np.any(np.diff(offsets) < 0):
            raise MalformedSetCell("offsets are not a monotone partition of indices")
        if indices.size:
            if indices.min() < 0 or indices.max() >= self.num_classes:
                raise LabelOutOfRange(
                    f"set contains a class outside [0, {self.num_classes})"
                )
            starts, ends = offsets[:-1], offsets[1:]
            inner = np.ones(indices.size, dtype=bool)
            inner[starts[starts < ends]] = False
            if np.any(indices[inner] <= indices[np.nonzero(inner)[0] - 1]):
                raise MalformedSetCell("a set is not strictly ascending")
        if not self.allow_empty and np.any(np.diff(offsets) == 0):
            raise MalformedSetCell("empty set present but allow_empty is false")
        qh = float(self.q_hat_used)
        if not math.isnan(qh) and not (0.0 <= qh <= 1.0):
            raise QHatOutOfRange(f"q_hat_used must be in [0, 1], got {qh!r}")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "indices", _freeze(indices))
        object.__setattr__(self, "offsets", _freeze(offsets))
        object.__setattr__(self, "num_classes", int(self.num_classes))
        object.__setattr__(self, "q_hat_used", qh)
        object.__setattr__(self, "allow_empty", bool(self.allow_empty))

    @classmethod
    def from_sets(
        cls,
        ids: Sequence[str],
        sets: Sequence[Sequence[int]],
        num_classes: int,
        q_hat_used: float = float("nan"),
        allow_empty: bool = True,
    ) -> "PredictionSetBatch":
        if len(ids) != len(sets):
            raise LengthMismatch(f"{len(ids)} ids for {len(sets)} sets")
        sizes = np.fromiter((len(s) for s in sets), dtype=np.int64, count=len(sets))
        offsets = np.zeros(len(sets) + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        flat = [c for s in sets for c in s]
        indices = np.asarray(flat, dtype=np.int32) if flat else np.zeros(0, dtype=np.int32)
        return cls(tuple(ids), indices, offsets, num_classes, q_hat_used, allow_empty)

    def __len__(self) -> int:
        return len(self.ids)

    def set_for(self, i: int) -> tuple[int, ...]:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return tuple(int(c) for c in self.indices[lo:hi])

    @property
    def sets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.set_for(i) for i in range(len(self)))

    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def subset(self, indices) -> "PredictionSetBatch":
        idx = np.asarray(indices, dtype=np.intp)
        return PredictionSetBatch.from_sets(
            ids=[self.ids[i] for i in idx],
            sets=[self.set_for(int(i)) for i in idx],
            num_classes=self.num_classes,
            q_hat_used=self.q_hat_used,
            allow_empty=self.allow_empty,
        )


@dataclass(frozen=True, eq=False)
class Histogram:
    """Binned counts over [0, 1]; edges strictly ascending, spanning 0 to 1."""

    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        edges = np.ascontiguousarray(np.asarray(self.bin_edges, dtype=np.float64))
        counts = np.ascontiguousarray(np.asarray(self.counts, dtype=np.int64))
        if edges.ndim != 1 or counts.ndim != 1 or counts.shape[0] != edges.shape[0] - 1:
            raise LengthMismatch(
                f"{counts.shape} counts do not fit {edges.shape} bin edges"
            )
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
            raise ValueError(
                f"bin edges must ascend strictly from 0 to 1, got {edges.tolist()}"
            )
        if np.any(counts < 0):
            raise ValueError("negative bin count")
        object.__setattr__(self, "bin_edges", _freeze(edges))
        object.__setattr__(self, "counts", _freeze(counts))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


class SizeBucket(NamedTuple):
    count: int
    coverage: float


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """The full evaluation battery for one (scores, prediction sets) pair."""

    coverage: float
    avg_set_size: float
    avg_set_size_correct: float
    avg_set_size_incorrect: float
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    coverage_by_set_size: Mapping[int, SizeBucket]
    uncertainty_histogram_correct: Histogram
    uncertainty_histogram_incorrect: Histogram
    n_test: int

    def __post_init__(self) -> None:
        for name in ("coverage", "accuracy", "macro_precision", "macro_recall", "macro_f1"):
            v = float(getattr(self, name))
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be a fraction in [0, 1], got {v!r}")
        for name in ("avg_set_size", "avg_set_size_correct", "avg_set_size_incorrect"):
            v = float(getattr(self, name))
            if not math.isnan(v) and v < 0.0:
                raise ValueError(f"{name} must be >= 0 or NaN, got {v!r}")
        buckets = {int(k): SizeBucket(int(v[0]), float(v[1]))
                   for k, v in dict(self.coverage_by_set_size).items()}
        for k, b in buckets.items():
            if k < 0 or b.count <= 0 or not (0.0 <= b.coverage <= 1.0):
                raise ValueError(f"bad coverage_by_set_size bucket {k}: {b}")
        if sum(b.count for b in buckets.values()) != int(self.n_test):
            raise LengthMismatch("coverage_by_set_size counts do not sum to n_test")
        n_corr = self.uncertainty_histogram_correct.total
        n_inc = self.uncertainty_histogram_incorrect.total
        if n_corr + n_inc != int(self.n_test):
            raise LengthMismatch("histogram counts do not sum to n_test")
        object.__setattr__(self, "coverage_by_set_size", buckets)
        object.__setattr__(self, "n_test", int(self.n_test))
