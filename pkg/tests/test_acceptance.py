"""Acceptance gate: one test per release criterion, at full stated scale.

Each test prints a machine-greppable ``ACCEPTANCE <name>: PASS`` line
(pytest -s shows them live). Tolerances are pinned here, not configurable.

Run with:  pytest tests/test_acceptance.py -v -s
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from scoresets import _kernels
from scoresets.conformal import calibrate, predict_sets
from scoresets.core import (
    CalibrationArtifact,
    LabeledScores,
    PredictionSetBatch,
    ScoreMatrix,
)
from scoresets.ensemble import average_scores
from scoresets.io_formats import (
    read_calibration,
    read_manifest,
    read_prediction_sets,
    read_report,
    read_scores_csv,
    write_calibration,
    write_manifest,
    write_prediction_sets,
    write_report,
    write_scores_csv,
)
from scoresets.metrics import (
    build_report,
    classification_metrics,
    coverage,
    coverage_by_set_size,
    set_size_stats,
)
from scoresets.simulator import SimulatorConfig, simulate
from scoresets.splits import make_split

from conftest import make_labeled, random_labeled
from oracles import confusion_metrics_oracle, quantile_oracle


def report_line(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, f"{name}: {detail}"


def scores_as_two_class(scores: np.ndarray, ids: tuple) -> LabeledScores:
    rows = np.empty((scores.shape[0], 2))
    rows[:, 0] = 1.0 - scores
    rows[:, 1] = scores
    return LabeledScores(
        ids=ids[: scores.shape[0]],
        labels=np.zeros(scores.shape[0], dtype=np.int64),
        scores=ScoreMatrix.validate(rows, 1e-6),
    )


class TestCoverageGuarantee:
    """Mean Monte Carlo coverage sits inside [1-a, 1-a+1/(n+1)] +/- 0.01."""

    @pytest.mark.parametrize("alpha", [0.1, 0.05, 0.2])
    def test_coverage_check_cli(self, alpha, tmp_path):
        t0 = time.perf_counter()
        proc = subprocess.run(
            [
                sys.executable, "-m", "scoresets.cli", "coverage-check",
                "--alpha", str(alpha), "--n-calib", "500", "--n-test", "500",
                "--trials", "1000", "--tolerance", "0.01",
            ],
            cwd=tmp_path,
            capture_output=True,
            text=True,
        )
        elapsed = time.perf_counter() - t0
        mean = float(
            next(l for l in proc.stdout.splitlines() if l.startswith("mean_coverage")).split()[1]
        )
        lower, upper = 1.0 - alpha, 1.0 - alpha + 1.0 / 501.0
        ok = (
            proc.returncode == 0
            and lower - 0.01 <= mean <= upper + 0.01
            and elapsed < 60.0
        )
        report_line(
            f"coverage-guarantee alpha={alpha}",
            ok,
            f"mean={mean:.4f} target=[{lower:.4f},{upper:.4f}]+/-0.01 runtime={elapsed:.1f}s",
        )


class TestQuantileOracle:
    """calibrate == brute-force sort-and-index oracle on 10,000 random instances."""

    def test_exact_equivalence(self):
        rng = np.random.default_rng(424242)
        master_ids = tuple(f"c{i}" for i in range(1000))
        mismatches = 0
        for i in range(10_000):
            n = int(rng.integers(1, 1001))
            if rng.random() < 0.2:
                # alpha on an exact rank boundary m/(n+1)
                alpha = float(int(rng.integers(1, n + 1)) / (n + 1))
                alpha = min(max(alpha, 1e-9), 1 - 1e-9)
            else:
                alpha = float(rng.uniform(0.001, 0.999))
            if rng.random() < 0.3:
                scores = rng.integers(0, 5, size=n) / 4.0  # heavy ties
            else:
                scores = rng.random(n)
            data = scores_as_two_class(scores, master_ids)
            got = calibrate(data, alpha).q_hat
            want = quantile_oracle(scores.tolist(), alpha)
            if got != want:
                mismatches += 1
        report_line(
            "quantile-oracle", mismatches == 0, f"{mismatches} mismatches in 10000 instances"
        )


class TestSetMonotonicity:
    """Nested sets under growing q_hat; argmax membership at its threshold."""

    def test_nesting_and_argmax(self):
        rng = np.random.default_rng(7171)
        violations = 0
        checked = 0
        for _ in range(50):
            data = random_labeled(rng, int(rng.integers(1, 120)), int(rng.integers(2, 9)))
            top = data.scores.values.max(axis=1)
            argmax = np.argmax(data.scores.values, axis=1)
            q_grid = np.sort(rng.random(10))
            prev = None
            for q in q_grid:
                art = CalibrationArtifact(alpha=0.5, n_calibration=9, q_hat=float(q))
                batch = predict_sets(data, art)
                if prev is not None:
                    for small, big in zip(prev.sets, batch.sets):
                        checked += 1
                        if not set(small) <= set(big):
                            violations += 1
                    if np.any(batch.sizes() < prev.sizes()):
                        violations += 1
                for i in range(len(data)):
                    if q >= 1.0 - top[i] and int(argmax[i]) not in batch.set_for(i):
                        violations += 1
                prev = batch
        report_line(
            "set-monotonicity", violations == 0, f"{violations} violations over {checked} nested pairs"
        )


class TestMetricIdentities:
    """Coverage and set-size strata recombine exactly from their pieces."""

    def test_identities(self):
        rng = np.random.default_rng(909090)
        worst_cov = 0.0
        worst_size = 0.0
        for _ in range(200):
            n, k = int(rng.integers(1, 150)), int(rng.integers(2, 8))
            data = random_labeled(rng, n, k)
            sets = [
                tuple(sorted(rng.choice(k, size=rng.integers(0, k + 1), replace=False).tolist()))
                for _ in range(n)
            ]
            batch = PredictionSetBatch.from_sets(data.ids, sets, num_classes=k)
            cov = coverage(batch, data.labels)
            by_size = coverage_by_set_size(batch, data.labels)
            hits = sum(round(b.count * b.coverage) for b in by_size.per_size.values())
            counts = sum(b.count for b in by_size.per_size.values())
            assert counts == n
            worst_cov = max(worst_cov, abs(hits / n - cov))
            weighted = sum(b.count * b.coverage for b in by_size.per_size.values()) / n
            worst_cov = max(worst_cov, abs(weighted - cov))

            stats = set_size_stats(batch, data.scores, data.labels)
            correct = np.argmax(data.scores.values, axis=1) == data.labels
            n_c, n_i = int(correct.sum()), n - int(correct.sum())
            if n_c and n_i:
                recombined = (n_c * stats.avg_correct + n_i * stats.avg_incorrect) / n
                worst_size = max(worst_size, abs(recombined - stats.avg_all))
        ok = worst_cov <= 1e-12 and worst_size <= 1e-12
        report_line(
            "metric-identities", ok, f"worst coverage gap {worst_cov:.2e}, worst size gap {worst_size:.2e}"
        )


class TestMacroMetricsOracle:
    """classification_metrics == brute-force confusion metrics on 1,000 instances."""

    def test_against_oracle(self):
        rng = np.random.default_rng(31337)
        worst = 0.0
        for _ in range(1000):
            n, k = int(rng.integers(1, 201)), int(rng.integers(2, 11))
            data = random_labeled(rng, n, k)
            preds = np.argmax(data.scores.values, axis=1)
            want = confusion_metrics_oracle(data.labels.tolist(), preds.tolist(), k)
            got = classification_metrics(data.scores, data.labels)
            worst = max(worst, max(abs(a - b) for a, b in zip(got, want)))
        report_line("macro-metrics-oracle", worst <= 1e-12, f"worst abs deviation {worst:.2e}")


class TestEnsembleDirection:
    """Domain-specialist experts calibrated in-domain undercover on merged
    test data; the merged-calibrated ensemble keeps the guarantee and must
    beat every single expert's coverage by at least 2 percentage points."""

    ALPHA = 0.1
    TRIALS = 200
    PER_DOMAIN = 260

    def _trial(self, seed: int):
        per_dom = self.PER_DOMAIN
        cfg = SimulatorConfig(
            num_classes=7,
            num_domains=3,
            per_domain_concentration=(0.5, 0.5, 0.5),
            per_domain_fidelity=(0.85, 0.85, 0.85),
            samples_per_domain=(per_dom, per_dom, per_dom),
            seed=seed,
            off_domain_fidelity=0.05,
        )
        models = simulate(cfg)
        half = per_dom // 2
        calib_idx = {d: list(range(d * per_dom, d * per_dom + half)) for d in range(3)}
        test_idx = [
            i for d in range(3) for i in range(d * per_dom + half, (d + 1) * per_dom)
        ]
        singles = []
        for m, model in enumerate(models):
            art = calibrate(model.subset(calib_idx[m]), self.ALPHA)
            test = model.subset(test_idx)
            singles.append(
                _kernels.count_covered(test.scores.values, test.labels, art.q_hat)
                / len(test)
            )
        fused = average_scores(models)
        merged_calib = fused.subset([i for d in range(3) for i in calib_idx[d]])
        art = calibrate(merged_calib, self.ALPHA)
        test = fused.subset(test_idx)
        ens = _kernels.count_covered(test.scores.values, test.labels, art.q_hat) / len(test)
        return np.asarray(singles), ens

    def test_ensemble_beats_every_single_expert(self):
        singles = np.zeros(3)
        ens = 0.0
        for t in range(self.TRIALS):
            s, e = self._trial(61000 + t)
            singles += s
            ens += e
        singles /= self.TRIALS
        ens /= self.TRIALS
        gap = (ens - singles.max()) * 100.0
        ok = bool(np.all(ens >= singles + 0.02))
        report_line(
            "ensemble-direction",
            ok,
            f"ensemble={ens:.4f} singles={np.round(singles, 4).tolist()} min_gap={gap:.1f}pp (>=2pp)",
        )

    def test_ensemble_at_least_worst_single(self):
        # weaker qualitative floor: never worse than the worst expert
        singles = np.zeros(3)
        ens = 0.0
        for t in range(50):
            s, e = self._trial(71000 + t)
            singles += s
            ens += e
        assert ens / 50 >= singles.min() / 50 - 0.02


class TestFormatRoundTrips:
    """All five formats reproduce ids/labels/sets exactly and numbers to spec."""

    def test_randomized_round_trips(self, tmp_path):
        rng = np.random.default_rng(2468)
        worst_prob = 0.0
        for case in range(25):
            n, k = int(rng.integers(1, 60)), int(rng.integers(2, 9))
            data = random_labeled(rng, n, k)

            p = tmp_path / f"scores_{case}.csv"
            write_scores_csv(data, p)
            back = read_scores_csv(p)
            assert back.ids == data.ids
            assert np.array_equal(back.labels, data.labels)
            worst_prob = max(
                worst_prob, float(np.abs(back.scores.values - data.scores.values).max())
            )

            manifest = make_split(
                list(data.ids), data.labels.tolist(), seed=case, stratified=False
            )
            p = tmp_path / f"manifest_{case}.csv"
            write_manifest(manifest, p)
            assert read_manifest(p) == manifest

            artifact = calibrate(data, float(rng.uniform(0.05, 0.5)))
            p = tmp_path / f"calib_{case}.json"
            write_calibration(artifact, p)
            assert read_calibration(p) == artifact

            batch = predict_sets(data, artifact, allow_empty=True)
            p = tmp_path / f"sets_{case}.csv"
            write_prediction_sets(batch, p)
            back_sets = read_prediction_sets(p)
            assert back_sets.ids == batch.ids
            assert back_sets.sets == batch.sets
            assert back_sets.q_hat_used == batch.q_hat_used
            assert back_sets.allow_empty == batch.allow_empty
            assert back_sets.num_classes == batch.num_classes

            report = build_report(data, batch, bins=int(rng.integers(1, 30)))
            p = tmp_path / f"report_{case}.json"
            write_report(report, p)
            back_report = read_report(p)
            for name in (
                "coverage", "avg_set_size", "accuracy",
                "macro_precision", "macro_recall", "macro_f1", "n_test",
            ):
                a, b = getattr(report, name), getattr(back_report, name)
                assert a == b or abs(a - b) <= 1e-12
            assert back_report.coverage_by_set_size == report.coverage_by_set_size
        ok = worst_prob <= 1e-9
        report_line("format-round-trips", ok, f"worst probability drift {worst_prob:.2e}")


class TestPipelineDeterminism:
    """The whole CLI chain, run twice from clean directories, is byte-identical."""

    STEPS = [
        ["simulate", "--out-dir", "sim"],
        ["ensemble", "--scores", "sim/expert_0.csv", "sim/expert_1.csv",
         "sim/expert_2.csv", "--out", "ens.csv"],
        ["split", "--labels", "ens.csv", "--seed", "2024", "--out", "manifest.csv"],
        ["calibrate", "--scores", "ens.csv", "--manifest", "manifest.csv",
         "--alpha", "0.1", "--out", "calib.json"],
        ["predict", "--scores", "ens.csv", "--calibration", "calib.json",
         "--manifest", "manifest.csv", "--tag", "test", "--out", "sets.csv"],
        ["evaluate", "--scores", "ens.csv", "--sets", "sets.csv", "--manifest",
         "manifest.csv", "--tag", "test", "--out", "report.json"],
    ]

    def _run_all(self, workdir):
        for step in self.STEPS:
            proc = subprocess.run(
                [sys.executable, "-m", "scoresets.cli", *step],
                cwd=workdir,
                capture_output=True,
                text=True,
            )
            assert proc.returncode == 0, f"{step}: {proc.stderr}"

    def test_byte_identical_reports(self, tmp_path):
        run_a, run_b = tmp_path / "a", tmp_path / "b"
        run_a.mkdir()
        run_b.mkdir()
        self._run_all(run_a)
        self._run_all(run_b)
        artifacts = ["ens.csv", "manifest.csv", "calib.json", "sets.csv", "report.json"]
        different = [
            name
            for name in artifacts
            if (run_a / name).read_bytes() != (run_b / name).read_bytes()
        ]
        report_line(
            "pipeline-determinism",
            not different,
            "all artifacts byte-identical" if not different else f"differs: {different}",
        )
