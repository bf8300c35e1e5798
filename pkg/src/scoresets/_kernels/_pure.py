"""Numpy implementations of the hot per-sample kernels.

This is the fallback backend; `scoresets._kernels._setops` is the compiled
twin. Both must produce bit-identical outputs: the operations are pure
comparisons, gathers and integer counting, so exact agreement is required,
not approximate.
"""

from __future__ import annotations

import numpy as np


def conformity(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """1 - p[i, y_i] for each row, in row order."""
    return 1.0 - probs[np.arange(probs.shape[0]), labels]


def count_covered(probs: np.ndarray, labels: np.ndarray, q_hat: float) -> int:
    """Number of rows whose true-class conformity score is <= q_hat."""
    return int(np.count_nonzero(conformity(probs, labels) <= q_hat))


def build_sets(
    probs: np.ndarray, q_hat: float, force_argmax: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Threshold every row into a CSR batch of ascending class-index sets.

    Class y enters row i's set iff 1 - probs[i, y] <= q_hat (closed
    inequality: threshold ties are kept). With force_argmax, rows whose
    set would be empty get their argmax class (lowest index on ties).
    """
    n = probs.shape[0]
    include = (1.0 - probs) <= q_hat
    if force_argmax and n > 0:
        empty = ~include.any(axis=1)
        if empty.any():
            rows = np.nonzero(empty)[0]
            include[rows, np.argmax(probs[rows], axis=1)] = True
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(include.sum(axis=1), out=offsets[1:])
    indices = np.nonzero(include)[1].astype(np.int32)
    return indices, offsets


def set_membership(
    indices: np.ndarray, offsets: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """covered[i] = 1 iff labels[i] appears in row i's set."""
    n = offsets.shape[0] - 1
    if n == 0:
        return np.zeros(0, dtype=np.uint8)
    width = 1 + max(
        int(indices.max()) if indices.size else 0,
        int(labels.max()) if labels.size else 0,
    )
    dense = np.zeros((n, width), dtype=bool)
    rows = np.repeat(np.arange(n), np.diff(offsets))
    dense[rows, indices] = True
    return dense[np.arange(n), labels].astype(np.uint8)
