import numpy as np
import pytest

from scoresets.core import INTERNAL_ROW_SUM_TOL, LabeledScores, ScoreMatrix


def make_labeled(rows, labels, ids=None, tol=INTERNAL_ROW_SUM_TOL) -> LabeledScores:
    rows = np.asarray(rows, dtype=np.float64)
    if ids is None:
        ids = tuple(f"s{i}" for i in range(rows.shape[0]))
    return LabeledScores(
        ids=tuple(ids),
        labels=np.asarray(labels, dtype=np.int64),
        scores=ScoreMatrix.validate(rows, tol),
    )


def random_prob_rows(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Valid probability rows (Dirichlet draws sum to 1 to float precision)."""
    return rng.dirichlet(np.full(k, 0.7), size=n)


def random_labeled(rng: np.random.Generator, n: int, k: int) -> LabeledScores:
    return make_labeled(
        random_prob_rows(rng, n, k), rng.integers(0, k, size=n), ids=None
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20250809)
