"""Kernel backend selection.

The compiled Cython extension is preferred when present; the numpy
fallback is functionally and bit-for-bit equivalent. Override with
SCORESETS_BACKEND=python or SCORESETS_BACKEND=cython (the latter raises
if the extension was not built).
"""

from __future__ import annotations

import os

import numpy as np

from . import _pure

_requested = os.environ.get("SCORESETS_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _pure
    BACKEND = "python"
else:
    try:
        from . import _setops as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "SCORESETS_BACKEND=cython but the compiled extension is missing; "
                "reinstall with the extension or unset the variable"
            )
        _impl = _pure
        BACKEND = "python"


def _prep_probs(probs: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(probs, dtype=np.float64)


def _prep_labels(labels: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(labels, dtype=np.int64)


def conformity(probs, labels):
    return _impl.conformity(_prep_probs(probs), _prep_labels(labels))


def count_covered(probs, labels, q_hat):
    return _impl.count_covered(_prep_probs(probs), _prep_labels(labels), float(q_hat))


def build_sets(probs, q_hat, force_argmax):
    return _impl.build_sets(_prep_probs(probs), float(q_hat), bool(force_argmax))


def set_membership(indices, offsets, labels):
    return _impl.set_membership(
        np.ascontiguousarray(indices, dtype=np.int32),
        np.ascontiguousarray(offsets, dtype=np.int64),
        _prep_labels(labels),
    )
