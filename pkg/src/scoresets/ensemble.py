"""Fusing several expert models' probability matrices into one.

Fusion is a per-sample, per-class arithmetic mean of the models'
probability rows (weighted when weights are supplied). It operates on
probabilities, not logits, and alignment is always by sample id, never by
row position, so mismatched exports fail loudly instead of averaging the
wrong rows together.

Weights are plumbing only: no fitting procedure is provided here, uniform
averaging is the calibrated path.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import INTERNAL_ROW_SUM_TOL, LabeledScores, ScoreMatrix
from .errors import (
    BadWeights,
    ClassCountMismatch,
    IdSequenceMismatch,
    IdSetMismatch,
    LabelMismatch,
    TooFewModels,
)


def align_by_id(models: Sequence[LabeledScores]) -> list[LabeledScores]:
    """Reorder every model's rows to the first model's id order.

    All models must cover exactly the same id set. Models already in the
    reference order are passed through unchanged.
    """
    if not models:
        raise TooFewModels("no models given")
    ref = models[0]
    ref_ids = ref.ids
    out = [ref]
    for m, model in enumerate(models[1:], start=1):
        if model.ids == ref_ids:
            out.append(model)
            continue
        row_of = {sid: i for i, sid in enumerate(model.ids)}
        if set(model.ids) != set(ref_ids):
            missing = (set(ref_ids) - set(model.ids)) | (set(model.ids) - set(ref_ids))
            raise IdSetMismatch(
                f"model {m} does not cover the same ids (e.g. {sorted(missing)[0]!r})"
            )
        out.append(model.subset([row_of[sid] for sid in ref_ids]))
    return out


def average_scores(
    models: Sequence[LabeledScores],
    weights: Sequence[float] | None = None,
) -> LabeledScores:
    """Weighted arithmetic mean of aligned models' probability rows.

    Models must present identical id sequences (use align_by_id first),
    identical class counts and identical labels. Omitted weights mean a
    plain average. Ids and labels carry through unchanged.
    """
    if len(models) < 2:
        raise TooFewModels(f"need at least 2 models to ensemble, got {len(models)}")
    ref = models[0]
    for m, model in enumerate(models[1:], start=1):
        if model.num_classes != ref.num_classes:
            raise ClassCountMismatch(
                f"model {m} has {model.num_classes} classes, expected {ref.num_classes}"
            )
        if model.ids != ref.ids:
            raise IdSequenceMismatch(
                f"model {m} id sequence differs from model 0; align_by_id first"
            )
        if not np.array_equal(model.labels, ref.labels):
            i = int(np.argmax(model.labels != ref.labels))
            raise LabelMismatch(
                f"label for id {ref.ids[i]!r} differs between model 0 and model {m}"
            )

    stack = np.stack([m.scores.values for m in models])
    if weights is None:
        fused = stack.mean(axis=0)
    else:
        w = np.asarray([float(x) for x in weights], dtype=np.float64)
        if w.shape[0] != len(models):
            raise BadWeights(f"{w.shape[0]} weights for {len(models)} models")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise BadWeights(f"weights must be finite and >= 0, got {w.tolist()}")
        if abs(w.sum() - 1.0) > 1e-9:
            raise BadWeights(f"weights sum to {w.sum()!r}, not 1")
        fused = np.tensordot(w, stack, axes=1)

    # convexity keeps each row inside the loosest input tolerance
    tol = max(m.scores.row_sum_tol for m in models)
    return LabeledScores(
        ids=ref.ids,
        labels=ref.labels,
        scores=ScoreMatrix.validate(fused, max(tol, INTERNAL_ROW_SUM_TOL)),
    )
