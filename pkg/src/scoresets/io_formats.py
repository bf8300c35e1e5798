"""File formats: the toolkit's public interchange contract.

Five formats, all UTF-8 with LF line endings and '.' decimals:

* scores CSV      header ``sample_id,true_label,p_0,...,p_{K-1}``;
                  true_label is -1 for unknown; probabilities printed with
                  12 significant digits so a write/read cycle stays within
                  1e-9 of the in-memory values and row sums stay inside
                  the 1e-6 read tolerance.
* split manifest  CSV ``sample_id,split`` plus a required JSON sidecar
                  (ratios, seed) at ``<path>.meta.json``.
* calibration     single JSON object.
* prediction sets CSV ``sample_id,set`` where set is a ``|``-joined
                  strictly ascending class list ('' = empty set); a JSON
                  sidecar carries q_hat_used / allow_empty / num_classes.
* report          single JSON object (NaN stratum averages serialize as
                  null).

JSON objects are strict: a ``format_version`` field (currently "1") is
required and unknown fields are rejected, so schema drift fails loudly.
Readers validate everything and repair nothing.

Writers accept an optional provenance mapping (tool_version, invocation);
the CLI always supplies one. Provenance lands inside JSON documents and in
the ``.meta.json`` sidecar next to CSV files.
"""

from __future__ import annotations

import csv
import json
import math
import os
from typing import Mapping, Sequence

import numpy as np

from .core import (
    UNKNOWN_LABEL,
    CalibrationArtifact,
    EvaluationReport,
    Histogram,
    LabeledScores,
    PredictionSetBatch,
    ScoreKind,
    SizeBucket,
    validate_score_matrix,
)
from .errors import (
    DuplicateSampleId,
    LabelOutOfRange,
    MalformedSetCell,
    MissingHeader,
    NonNumericCell,
    RaggedRow,
    SchemaVersionMismatch,
    TooFewClasses,
)
from .splits import SPLIT_TAGS, SplitManifest

FORMAT_VERSION = "1"

_PROVENANCE_FIELDS = {"tool_version", "invocation"}


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def sidecar_path(path) -> str:
    return f"{os.fspath(path)}.meta.json"


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaVersionMismatch(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise SchemaVersionMismatch(f"{path}: expected a JSON object")
    return obj


def _check_schema(obj: dict, required: set[str], optional: set[str], what: str) -> None:
    optional = optional | _PROVENANCE_FIELDS
    unknown = set(obj) - required - optional
    if unknown:
        raise SchemaVersionMismatch(f"{what}: unknown fields {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SchemaVersionMismatch(f"{what}: missing fields {sorted(missing)}")
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaVersionMismatch(
            f"{what}: format_version {version!r} is not {FORMAT_VERSION!r}"
        )


def _provenance_payload(provenance: Mapping[str, str] | None) -> dict:
    if not provenance:
        return {}
    unknown = set(provenance) - _PROVENANCE_FIELDS
    if unknown:
        raise SchemaVersionMismatch(f"unsupported provenance fields {sorted(unknown)}")
    return {k: str(v) for k, v in provenance.items()}


def _write_sidecar(path, payload: dict, provenance: Mapping[str, str] | None) -> None:
    body = {"format_version": FORMAT_VERSION, **payload, **_provenance_payload(provenance)}
    _write_json(sidecar_path(path), body)


def _open_csv_rows(path) -> list[list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


# ---------------------------------------------------------------- scores CSV


def write_scores_csv(data: LabeledScores, path, provenance: Mapping[str, str] | None = None) -> None:
    k = data.num_classes
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["sample_id", "true_label"] + [f"p_{j}" for j in range(k)])
        for i, sid in enumerate(data.ids):
            row = [sid, str(int(data.labels[i]))]
            row.extend(_fmt(v) for v in data.scores.values[i])
            w.writerow(row)
    if provenance:
        _write_sidecar(path, {"kind": "scores"}, provenance)


def read_scores_csv(path) -> LabeledScores:
    rows = _open_csv_rows(path)
    if not rows:
        raise MissingHeader(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[0] != "sample_id" or header[1] != "true_label":
        raise MissingHeader(f"{path}: header must start 'sample_id,true_label'")
    k = len(header) - 2
    if header[2:] != [f"p_{j}" for j in range(k)]:
        raise MissingHeader(f"{path}: probability columns must be p_0..p_{{K-1}}")
    if k < 2:
        raise TooFewClasses(f"{path}: header defines {k} probability columns")

    ids: list[str] = []
    labels: list[int] = []
    values = np.empty((len(rows) - 1, k), dtype=np.float64)
    seen: set[str] = set()
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != k + 2:
            raise RaggedRow(f"{path}:{r}: expected {k + 2} cells, got {len(row)}")
        sid = row[0]
        if sid in seen:
            raise DuplicateSampleId(f"{path}:{r}: duplicate sample_id {sid!r}")
        seen.add(sid)
        try:
            label = int(row[1])
        except ValueError:
            raise NonNumericCell(f"{path}:{r}: true_label {row[1]!r} is not an integer") from None
        if label != UNKNOWN_LABEL and not (0 <= label < k):
            raise LabelOutOfRange(f"{path}:{r}: true_label {label} outside [0, {k})")
        try:
            values[r - 2] = [float(c) for c in row[2:]]
        except ValueError:
            raise NonNumericCell(f"{path}:{r}: non-numeric probability cell") from None
        ids.append(sid)
        labels.append(label)
    return LabeledScores(
        ids=tuple(ids),
        labels=np.asarray(labels, dtype=np.int64),
        scores=validate_score_matrix(values),
    )


def write_labels_csv(ids: Sequence[str], labels, path) -> None:
    """Two-column companion format ``sample_id,true_label`` (-1 = unknown)."""
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["sample_id", "true_label"])
        for sid, label in zip(ids, labels):
            w.writerow([sid, str(int(label))])


def read_labels_csv(path) -> tuple[list[str], np.ndarray]:
    rows = _open_csv_rows(path)
    if not rows:
        raise MissingHeader(f"{path}: empty file")
    if rows[0] != ["sample_id", "true_label"]:
        raise MissingHeader(f"{path}: header must be 'sample_id,true_label'")
    ids: list[str] = []
    labels: list[int] = []
    seen: set[str] = set()
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise RaggedRow(f"{path}:{r}: expected 2 cells, got {len(row)}")
        sid, cell = row
        if sid in seen:
            raise DuplicateSampleId(f"{path}:{r}: duplicate sample_id {sid!r}")
        seen.add(sid)
        try:
            labels.append(int(cell))
        except ValueError:
            raise NonNumericCell(f"{path}:{r}: true_label {cell!r} is not an integer") from None
        ids.append(sid)
    return ids, np.asarray(labels, dtype=np.int64)


# ------------------------------------------------------------ split manifest


def write_manifest(manifest: SplitManifest, path, provenance: Mapping[str, str] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["sample_id", "split"])
        for sid, tag in manifest.assignments.items():
            w.writerow([sid, tag])
    _write_sidecar(
        path,
        {"kind": "split_manifest", "ratios": [float(r) for r in manifest.ratios], "seed": manifest.seed},
        provenance,
    )


def read_manifest(path) -> SplitManifest:
    rows = _open_csv_rows(path)
    if not rows:
        raise MissingHeader(f"{path}: empty file")
    if rows[0] != ["sample_id", "split"]:
        raise MissingHeader(f"{path}: header must be 'sample_id,split'")
    assignments: dict[str, str] = {}
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise RaggedRow(f"{path}:{r}: expected 2 cells, got {len(row)}")
        sid, tag = row
        if sid in assignments:
            raise DuplicateSampleId(f"{path}:{r}: duplicate sample_id {sid!r}")
        if tag not in SPLIT_TAGS:
            raise MalformedSetCell(f"{path}:{r}: unknown split tag {tag!r}")
        assignments[sid] = tag
    side = sidecar_path(path)
    if not os.path.exists(side):
        raise SchemaVersionMismatch(f"{path}: manifest sidecar {side} is missing")
    meta = _read_json(side)
    _check_schema(
        meta,
        required={"format_version", "kind", "ratios", "seed"},
        optional=set(),
        what=side,
    )
    if meta["kind"] != "split_manifest":
        raise SchemaVersionMismatch(f"{side}: kind {meta['kind']!r} is not 'split_manifest'")
    return SplitManifest(
        assignments=assignments,
        ratios=tuple(float(r) for r in meta["ratios"]),
        seed=int(meta["seed"]),
    )


# ------------------------------------------------------- calibration artifact


def write_calibration(
    artifact: CalibrationArtifact, path, provenance: Mapping[str, str] | None = None
) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "alpha": float(artifact.alpha),
        "n_calibration": int(artifact.n_calibration),
        "q_hat": float(artifact.q_hat),
        "score_kind": artifact.score_kind.value,
        "created_from": artifact.created_from,
        "num_classes": artifact.num_classes,
        **_provenance_payload(provenance),
    }
    _write_json(path, payload)


def read_calibration(path) -> CalibrationArtifact:
    obj = _read_json(path)
    _check_schema(
        obj,
        required={"format_version", "alpha", "n_calibration", "q_hat", "score_kind", "created_from"},
        optional={"num_classes"},
        what=str(path),
    )
    try:
        kind = ScoreKind(obj["score_kind"])
    except ValueError:
        raise SchemaVersionMismatch(
            f"{path}: unsupported score_kind {obj['score_kind']!r}"
        ) from None
    num_classes = obj.get("num_classes")
    return CalibrationArtifact(
        alpha=float(obj["alpha"]),
        n_calibration=int(obj["n_calibration"]),
        q_hat=float(obj["q_hat"]),
        score_kind=kind,
        created_from=str(obj["created_from"]),
        num_classes=None if num_classes is None else int(num_classes),
    )


# ------------------------------------------------------------ prediction sets


def _set_cell(members: tuple[int, ...]) -> str:
    return "|".join(str(c) for c in members)


def _parse_set_cell(cell: str, where: str) -> tuple[int, ...]:
    if cell == "":
        return ()
    parts = cell.split("|")
    try:
        members = tuple(int(p) for p in parts)
    except ValueError:
        raise MalformedSetCell(f"{where}: set cell {cell!r} has a non-integer entry") from None
    if any(b <= a for a, b in zip(members, members[1:])) or any(m < 0 for m in members):
        raise MalformedSetCell(f"{where}: set cell {cell!r} is not strictly ascending")
    return members


def write_prediction_sets(
    batch: PredictionSetBatch, path, provenance: Mapping[str, str] | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["sample_id", "set"])
        for i, sid in enumerate(batch.ids):
            w.writerow([sid, _set_cell(batch.set_for(i))])
    q = float(batch.q_hat_used)
    _write_sidecar(
        path,
        {
            "kind": "prediction_sets",
            "q_hat_used": None if math.isnan(q) else q,
            "allow_empty": bool(batch.allow_empty),
            "num_classes": int(batch.num_classes),
        },
        provenance,
    )


def read_prediction_sets(path) -> PredictionSetBatch:
    rows = _open_csv_rows(path)
    if not rows:
        raise MissingHeader(f"{path}: empty file")
    if rows[0] != ["sample_id", "set"]:
        raise MissingHeader(f"{path}: header must be 'sample_id,set'")
    ids: list[str] = []
    sets: list[tuple[int, ...]] = []
    seen: set[str] = set()
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise RaggedRow(f"{path}:{r}: expected 2 cells, got {len(row)}")
        sid, cell = row
        if sid in seen:
            raise DuplicateSampleId(f"{path}:{r}: duplicate sample_id {sid!r}")
        seen.add(sid)
        ids.append(sid)
        sets.append(_parse_set_cell(cell, f"{path}:{r}"))

    q_hat_used = float("nan")
    allow_empty = True
    max_index = max((s[-1] for s in sets if s), default=1)
    num_classes = max_index + 1
    side = sidecar_path(path)
    if os.path.exists(side):
        meta = _read_json(side)
        _check_schema(
            meta,
            required={"format_version", "kind", "q_hat_used", "allow_empty", "num_classes"},
            optional=set(),
            what=side,
        )
        if meta["kind"] != "prediction_sets":
            raise SchemaVersionMismatch(f"{side}: kind {meta['kind']!r} is not 'prediction_sets'")
        q_hat_used = float("nan") if meta["q_hat_used"] is None else float(meta["q_hat_used"])
        allow_empty = bool(meta["allow_empty"])
        num_classes = int(meta["num_classes"])
    return PredictionSetBatch.from_sets(
        ids=ids,
        sets=sets,
        num_classes=max(num_classes, 2),
        q_hat_used=q_hat_used,
        allow_empty=allow_empty,
    )


# ---------------------------------------------------------- evaluation report

_REPORT_SCALARS = (
    "coverage",
    "avg_set_size",
    "avg_set_size_correct",
    "avg_set_size_incorrect",
    "accuracy",
    "macro_precision",
    "macro_recall",
    "macro_f1",
)


def _nan_to_null(x: float) -> float | None:
    return None if math.isnan(x) else float(x)


def _null_to_nan(x) -> float:
    return float("nan") if x is None else float(x)


def _histogram_payload(h: Histogram) -> dict:
    return {"bin_edges": [float(e) for e in h.bin_edges], "counts": [int(c) for c in h.counts]}


def _histogram_from(obj: dict, what: str) -> Histogram:
    if not isinstance(obj, dict) or set(obj) != {"bin_edges", "counts"}:
        raise SchemaVersionMismatch(f"{what}: histogram needs exactly bin_edges and counts")
    return Histogram(np.asarray(obj["bin_edges"], dtype=np.float64),
                     np.asarray(obj["counts"], dtype=np.int64))


def write_report(report: EvaluationReport, path, provenance: Mapping[str, str] | None = None) -> None:
    payload: dict = {"format_version": FORMAT_VERSION}
    for name in _REPORT_SCALARS:
        payload[name] = _nan_to_null(float(getattr(report, name)))
    payload["coverage_by_set_size"] = {
        str(k): {"count": b.count, "coverage": b.coverage}
        for k, b in sorted(report.coverage_by_set_size.items())
    }
    payload["uncertainty_histogram_correct"] = _histogram_payload(report.uncertainty_histogram_correct)
    payload["uncertainty_histogram_incorrect"] = _histogram_payload(report.uncertainty_histogram_incorrect)
    payload["n_test"] = report.n_test
    payload.update(_provenance_payload(provenance))
    _write_json(path, payload)


def read_report(path) -> EvaluationReport:
    obj = _read_json(path)
    _check_schema(
        obj,
        required={
            "format_version",
            *_REPORT_SCALARS,
            "coverage_by_set_size",
            "uncertainty_histogram_correct",
            "uncertainty_histogram_incorrect",
            "n_test",
        },
        optional=set(),
        what=str(path),
    )
    buckets: dict[int, SizeBucket] = {}
    for key, b in obj["coverage_by_set_size"].items():
        if not isinstance(b, dict) or set(b) != {"count", "coverage"}:
            raise SchemaVersionMismatch(f"{path}: bad coverage_by_set_size entry {key!r}")
        buckets[int(key)] = SizeBucket(int(b["count"]), float(b["coverage"]))
    return EvaluationReport(
        coverage=float(obj["coverage"]),
        avg_set_size=float(obj["avg_set_size"]),
        avg_set_size_correct=_null_to_nan(obj["avg_set_size_correct"]),
        avg_set_size_incorrect=_null_to_nan(obj["avg_set_size_incorrect"]),
        accuracy=float(obj["accuracy"]),
        macro_precision=float(obj["macro_precision"]),
        macro_recall=float(obj["macro_recall"]),
        macro_f1=float(obj["macro_f1"]),
        coverage_by_set_size=buckets,
        uncertainty_histogram_correct=_histogram_from(
            obj["uncertainty_histogram_correct"], str(path)
        ),
        uncertainty_histogram_incorrect=_histogram_from(
            obj["uncertainty_histogram_incorrect"], str(path)
        ),
        n_test=int(obj["n_test"]),
    )
