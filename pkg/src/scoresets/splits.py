"""Deterministic train/val/calib/test partitioning.

Fractional split sizes are resolved by largest-remainder apportionment
(exact, deterministic, independent of id order). The shuffle is a
Fisher-Yates pass driven by SplitMix64, a published 64-bit generator small
enough to restate exactly (see _splitmix64), so a (ids, labels, ratios,
seed) tuple reproduces the same manifest on any platform or language.

Stratification is applied per class: each class's members are apportioned
separately and concatenated, which keeps rare classes represented in every
split. It defaults on in the CLI whenever labels are known, because the
kind of data this feeds is typically class-imbalanced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import UNKNOWN_LABEL, LabeledScores, ScoreMatrix
from .errors import (
    ClassCountMismatch,
    DuplicateIdAfterNamespacing,
    DuplicateIds,
    IdMissingFromManifest,
    InvalidConfig,
    LengthMismatch,
    RatiosDoNotSumToOne,
    UnknownLabelWithStratification,
)

SPLIT_TAGS = ("train", "val", "calib", "test")

#: The conformal-workflow ratios this toolkit defaults to.
DEFAULT_RATIOS = (0.6, 0.1, 0.2, 0.1)

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (output, next_state).

    state' = state + 0x9E3779B97F4A7C15 (mod 2^64)
    z = state'; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB; output = z ^ (z >> 31)
    """
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)), state


def seeded_shuffle(items: Sequence[str], seed: int) -> list[str]:
    """Fisher-Yates shuffle with SplitMix64 index draws (j = output mod (i+1))."""
    out = list(items)
    state = int(seed) & _MASK64
    for i in range(len(out) - 1, 0, -1):
        z, state = _splitmix64(state)
        j = z % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def largest_remainder(n: int, ratios: Sequence[float]) -> tuple[int, ...]:
    """Apportion n into integer parts proportional to ratios.

    Floors first, then hands the leftover units to the largest fractional
    remainders; remainder ties break toward the earlier position. Every
    part differs from n*ratio by strictly less than 1.
    """
    quotas = [n * float(r) for r in ratios]
    sizes = [int(q) for q in quotas]
    leftover = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return tuple(sizes)


def _check_ratios(ratios: Sequence[float]) -> tuple[float, float, float, float]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != len(SPLIT_TAGS):
        raise InvalidConfig(f"expected {len(SPLIT_TAGS)} ratios, got {len(ratios)}")
    if any(r < 0.0 or r > 1.0 for r in ratios):
        raise InvalidConfig(f"ratios must lie in [0, 1], got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise RatiosDoNotSumToOne(f"ratios sum to {sum(ratios)!r}, not 1")
    return ratios


@dataclass(frozen=True)
class SplitManifest:
    """Immutable id -> split-tag assignment plus the inputs that created it."""

    assignments: Mapping[str, str]
    ratios: tuple[float, float, float, float]
    seed: int

    def __post_init__(self) -> None:
        assignments = dict(self.assignments)
        for sid, tag in assignments.items():
            if tag not in SPLIT_TAGS:
                raise InvalidConfig(f"unknown split tag {tag!r} for id {sid!r}")
        object.__setattr__(self, "assignments", assignments)
        object.__setattr__(self, "ratios", _check_ratios(self.ratios))
        object.__setattr__(self, "seed", int(self.seed))

    def counts(self) -> dict[str, int]:
        out = {tag: 0 for tag in SPLIT_TAGS}
        for tag in self.assignments.values():
            out[tag] += 1
        return out

    def ids_for(self, tag: str) -> list[str]:
        return [sid for sid, t in self.assignments.items() if t == tag]


def make_split(
    ids: Sequence[str],
    labels: Sequence[int] | None,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
    stratified: bool = True,
) -> SplitManifest:
    """Assign each id to train/val/calib/test, deterministically in (inputs, seed)."""
    ids = [str(i) for i in ids]
    if len(set(ids)) != len(ids):
        seen: set[str] = set()
        dup = next(i for i in ids if i in seen or seen.add(i))
        raise DuplicateIds(f"duplicate id {dup!r}")
    ratios = _check_ratios(ratios)

    if stratified:
        if labels is None:
            raise UnknownLabelWithStratification("stratified split needs labels")
        labels_arr = np.asarray(labels, dtype=np.int64)
        if labels_arr.shape[0] != len(ids):
            raise LengthMismatch(f"{len(ids)} ids but {labels_arr.shape[0]} labels")
        if np.any(labels_arr == UNKNOWN_LABEL):
            i = int(np.argmax(labels_arr == UNKNOWN_LABEL))
            raise UnknownLabelWithStratification(
                f"id {ids[i]!r} has an unknown label; pass stratified=False"
            )
        shuffled = seeded_shuffle(ids, seed)
        label_of = dict(zip(ids, labels_arr.tolist()))
        assignments: dict[str, str] = {}
        for cls in sorted(set(labels_arr.tolist())):
            members = [sid for sid in shuffled if label_of[sid] == cls]
            sizes = largest_remainder(len(members), ratios)
            pos = 0
            for tag, size in zip(SPLIT_TAGS, sizes):
                for sid in members[pos : pos + size]:
                    assignments[sid] = tag
                pos += size
    else:
        shuffled = seeded_shuffle(ids, seed)
        sizes = largest_remainder(len(ids), ratios)
        assignments = {}
        pos = 0
        for tag, size in zip(SPLIT_TAGS, sizes):
            for sid in shuffled[pos : pos + size]:
                assignments[sid] = tag
            pos += size

    # manifest rows keep the caller's id order, independent of the shuffle
    ordered = {sid: assignments[sid] for sid in ids}
    return SplitManifest(assignments=ordered, ratios=ratios, seed=seed)


def apply_split(data: LabeledScores, manifest: SplitManifest, tag: str) -> LabeledScores:
    """Sub-collection carrying the given tag, in the data's input order."""
    if tag not in SPLIT_TAGS:
        raise InvalidConfig(f"unknown split tag {tag!r}")
    picked = []
    for i, sid in enumerate(data.ids):
        assigned = manifest.assignments.get(sid)
        if assigned is None:
            raise IdMissingFromManifest(f"id {sid!r} is not in the manifest")
        if assigned == tag:
            picked.append(i)
    return data.subset(picked)


def merge_labeled(parts: Sequence[tuple[str, LabeledScores]]) -> LabeledScores:
    """Concatenate tagged collections, namespacing ids as '<tag>/<id>'."""
    if not parts:
        raise InvalidConfig("nothing to merge")
    k = parts[0][1].num_classes
    for tag, part in parts[1:]:
        if part.num_classes != k:
            raise ClassCountMismatch(
                f"part {tag!r} has {part.num_classes} classes, expected {k}"
            )
    ids: list[str] = []
    for tag, part in parts:
        ids.extend(f"{tag}/{sid}" for sid in part.ids)
    if len(set(ids)) != len(ids):
        seen: set[str] = set()
        dup = next(i for i in ids if i in seen or seen.add(i))
        raise DuplicateIdAfterNamespacing(f"id {dup!r} occurs twice after namespacing")
    labels = np.concatenate([part.labels for _, part in parts])
    values = np.concatenate([part.scores.values for _, part in parts], axis=0)
    tol = max(part.scores.row_sum_tol for _, part in parts)
    return LabeledScores(
        ids=tuple(ids),
        labels=labels,
        scores=ScoreMatrix.validate(values, tol),
    )
