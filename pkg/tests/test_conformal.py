import numpy as np
import pytest

from scoresets.conformal import (
    calibrate,
    conformity_scores,
    coverage_bounds,
    predict_sets,
    quantile_rank,
)
from scoresets.core import CalibrationArtifact
from scoresets.errors import (
    AlphaOutOfRange,
    ClassCountMismatch,
    EmptyCalibrationSet,
    UnknownLabel,
)

from conftest import make_labeled, random_labeled
from oracles import quantile_oracle


def from_true_probs(true_probs):
    """Two-class rows whose true-class probabilities are as given."""
    rows = np.array([[p, 1.0 - p] for p in true_probs], dtype=np.float64).reshape(-1, 2)
    return make_labeled(rows, [0] * len(true_probs))


class TestConformityScores:
    def test_examples(self):
        data = make_labeled([[0.7, 0.2, 0.1], [0.7, 0.2, 0.1], [1.0, 0.0, 0.0]], [0, 2, 0])
        np.testing.assert_allclose(conformity_scores(data), [0.3, 0.9, 0.0], atol=1e-15)

    def test_unknown_label_rejected(self):
        data = make_labeled([[0.5, 0.5]], [-1])
        with pytest.raises(UnknownLabel):
            conformity_scores(data)

    def test_scores_in_unit_interval(self, rng):
        data = random_labeled(rng, 200, 6)
        s = conformity_scores(data)
        assert np.all(s >= 0.0) and np.all(s <= 1.0)


class TestCalibrate:
    def test_quarter_alpha(self):
        # true-class probs [0.9, 0.8, 0.5, 0.7] -> scores [0.1, 0.2, 0.5, 0.3]
        data = from_true_probs([0.9, 0.8, 0.5, 0.7])
        art = calibrate(data, alpha=0.25)
        assert art.q_hat == pytest.approx(0.5, abs=1e-15)
        assert art.n_calibration == 4

    def test_half_alpha(self):
        data = from_true_probs([0.9, 0.8, 0.5, 0.7])
        art = calibrate(data, alpha=0.5)
        assert art.q_hat == pytest.approx(0.3, abs=1e-15)

    def test_rank_beyond_n_degenerates(self):
        data = from_true_probs([0.9])
        art = calibrate(data, alpha=0.1)
        assert art.q_hat == 1.0

    def test_empty_calibration(self):
        data = from_true_probs([])
        with pytest.raises(EmptyCalibrationSet):
            calibrate(data, alpha=0.1)

    def test_alpha_range(self):
        data = from_true_probs([0.9])
        for alpha in (0.0, 1.0, -1.0, 2.0):
            with pytest.raises(AlphaOutOfRange):
                calibrate(data, alpha=alpha)

    def test_rank_float_boundaries(self):
        # (n+1)(1-alpha) sits exactly on an integer in real arithmetic
        assert quantile_rank(9, 0.1) == 9
        assert quantile_rank(4, 0.2) == 4
        assert quantile_rank(1, 0.5) == 1
        assert quantile_rank(99, 0.1) == 90

    def test_matches_oracle_small(self, rng):
        for _ in range(500):
            n = int(rng.integers(1, 200))
            alpha = float(rng.uniform(0.001, 0.999))
            if rng.random() < 0.3:
                scores = rng.integers(0, 5, size=n) / 4.0  # force ties
            else:
                scores = rng.random(n)
            data = from_true_probs(1.0 - scores)
            assert calibrate(data, alpha).q_hat == quantile_oracle(scores, alpha)

    def test_q_hat_nondecreasing_in_confidence(self, rng):
        data = random_labeled(rng, 60, 4)
        alphas = np.sort(rng.uniform(0.01, 0.99, size=25))[::-1]  # confidence rising
        q_hats = [calibrate(data, float(a)).q_hat for a in alphas]
        assert all(a <= b for a, b in zip(q_hats, q_hats[1:]))

    def test_records_provenance_fields(self):
        data = from_true_probs([0.9, 0.8])
        art = calibrate(data, 0.5, created_from="unit test")
        assert art.created_from == "unit test"
        assert art.num_classes == 2


class TestPredictSets:
    def test_threshold_example(self):
        data = make_labeled([[0.7, 0.2, 0.1]], [0])
        art = CalibrationArtifact(alpha=0.5, n_calibration=9, q_hat=0.5)
        assert predict_sets(data, art).sets == ((0,),)

    def test_full_sets_at_degenerate_threshold(self):
        data = make_labeled([[0.7, 0.2, 0.1]], [0])
        art = CalibrationArtifact(alpha=0.5, n_calibration=9, q_hat=1.0)
        assert predict_sets(data, art).sets == ((0, 1, 2),)

    def test_empty_versus_forced_argmax(self):
        data = make_labeled([[0.7, 0.2, 0.1]], [0])
        art = CalibrationArtifact(alpha=0.5, n_calibration=9, q_hat=0.25)
        assert predict_sets(data, art, allow_empty=True).sets == ((),)
        assert predict_sets(data, art, allow_empty=False).sets == ((0,),)

    def test_threshold_tie_included(self):
        data = make_labeled([[0.75, 0.25]], [0])
        art = CalibrationArtifact(alpha=0.5, n_calibration=9, q_hat=0.25)
        # score of class 0 is exactly 1 - 0.75 = 0.25 = q_hat: closed inequality
        assert predict_sets(data, art).sets == ((0,),)

    def test_class_count_mismatch(self):
        data = make_labeled([[0.5, 0.5]], [0])
        art = CalibrationArtifact(alpha=0.5, n_calibration=9, q_hat=0.5, num_classes=3)
        with pytest.raises(ClassCountMismatch):
            predict_sets(data, art)

    def test_unlabeled_rows_predict_fine(self):
        data = make_labeled([[0.6, 0.4]], [-1])
        art = CalibrationArtifact(alpha=0.5, n_calibration=9, q_hat=0.5)
        assert predict_sets(data, art).sets == ((0,),)

    def test_nested_under_growing_threshold(self, rng):
        data = random_labeled(rng, 80, 5)
        q_values = np.sort(rng.random(12))
        prev = None
        for q in q_values:
            art = CalibrationArtifact(alpha=0.5, n_calibration=9, q_hat=float(q))
            batch = predict_sets(data, art)
            if prev is not None:
                for small, big in zip(prev.sets, batch.sets):
                    assert set(small) <= set(big)
                assert np.all(batch.sizes() >= prev.sizes())
            prev = batch

    def test_argmax_membership(self, rng):
        data = random_labeled(rng, 100, 6)
        top = data.scores.values.max(axis=1)
        for q in rng.random(8):
            art = CalibrationArtifact(alpha=0.5, n_calibration=9, q_hat=float(q))
            batch = predict_sets(data, art)
            argmax = np.argmax(data.scores.values, axis=1)
            for i in range(len(data)):
                if q >= 1.0 - top[i]:
                    assert int(argmax[i]) in batch.set_for(i)
        forced = predict_sets(data, art, allow_empty=False)
        argmax = np.argmax(data.scores.values, axis=1)
        for i in range(len(data)):
            assert int(argmax[i]) in forced.set_for(i)


class TestCoverageBounds:
    def test_examples(self):
        assert coverage_bounds(0.1, 99) == pytest.approx((0.9, 0.91))
        assert coverage_bounds(0.1, 9) == (pytest.approx(0.9), 1.0)
        assert coverage_bounds(0.5, 1) == (0.5, 1.0)

    def test_alpha_validation(self):
        with pytest.raises(AlphaOutOfRange):
            coverage_bounds(1.0, 10)
