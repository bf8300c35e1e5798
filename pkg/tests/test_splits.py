import numpy as np
import pytest

from scoresets.errors import (
    ClassCountMismatch,
    DuplicateIdAfterNamespacing,
    DuplicateIds,
    IdMissingFromManifest,
    RatiosDoNotSumToOne,
    UnknownLabelWithStratification,
)
from scoresets.splits import (
    SPLIT_TAGS,
    SplitManifest,
    _splitmix64,
    apply_split,
    largest_remainder,
    make_split,
    merge_labeled,
    seeded_shuffle,
)

from conftest import make_labeled, random_labeled
from oracles import SPLITMIX64_SEED0, apportion_oracle

RATIOS = (0.6, 0.1, 0.2, 0.1)


class TestPrng:
    def test_splitmix64_reference_vectors(self):
        state = 0
        outs = []
        for _ in range(3):
            z, state = _splitmix64(state)
            outs.append(z)
        assert tuple(outs) == SPLITMIX64_SEED0

    def test_shuffle_deterministic(self):
        ids = [f"x{i}" for i in range(50)]
        assert seeded_shuffle(ids, 7) == seeded_shuffle(ids, 7)
        assert seeded_shuffle(ids, 7) != seeded_shuffle(ids, 8)

    def test_shuffle_is_permutation(self):
        ids = [f"x{i}" for i in range(31)]
        assert sorted(seeded_shuffle(ids, 123)) == sorted(ids)


class TestApportionment:
    def test_default_ratios_ten_samples(self):
        assert largest_remainder(10, RATIOS) == (6, 1, 2, 1)

    def test_all_in_train(self):
        assert largest_remainder(1, (1.0, 0.0, 0.0, 0.0)) == (1, 0, 0, 0)

    def test_matches_oracle(self, rng):
        for _ in range(200):
            n = int(rng.integers(0, 500))
            raw = rng.random(4) + 1e-3
            ratios = tuple(raw / raw.sum())
            assert list(largest_remainder(n, ratios)) == apportion_oracle(n, ratios)

    def test_within_one_of_quota(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 1000))
            raw = rng.random(4)
            ratios = tuple(raw / raw.sum())
            sizes = largest_remainder(n, ratios)
            assert sum(sizes) == n
            for size, r in zip(sizes, ratios):
                assert abs(size - n * r) < 1.0


class TestMakeSplit:
    def test_sizes_unstratified(self):
        ids = [f"i{k}" for k in range(10)]
        manifest = make_split(ids, None, RATIOS, seed=5, stratified=False)
        counts = manifest.counts()
        assert tuple(counts[t] for t in SPLIT_TAGS) == (6, 1, 2, 1)

    def test_degenerate_single_id(self):
        manifest = make_split(["only"], None, (1.0, 0.0, 0.0, 0.0), seed=9, stratified=False)
        assert manifest.assignments == {"only": "train"}

    def test_deterministic(self):
        ids = [f"i{k}" for k in range(40)]
        labels = [k % 3 for k in range(40)]
        a = make_split(ids, labels, RATIOS, seed=11, stratified=True)
        b = make_split(ids, labels, RATIOS, seed=11, stratified=True)
        assert a == b

    def test_ratio_validation(self):
        with pytest.raises(RatiosDoNotSumToOne):
            make_split(["a"], None, (0.5, 0.2, 0.2, 0.2), seed=1, stratified=False)

    def test_duplicate_ids(self):
        with pytest.raises(DuplicateIds):
            make_split(["a", "a"], None, RATIOS, seed=1, stratified=False)

    def test_stratified_needs_known_labels(self):
        with pytest.raises(UnknownLabelWithStratification):
            make_split(["a", "b"], [0, -1], RATIOS, seed=1, stratified=True)

    def test_stratified_apportions_per_class(self):
        ids = [f"i{k}" for k in range(100)]
        labels = [0] * 50 + [1] * 50
        manifest = make_split(ids, labels, RATIOS, seed=3, stratified=True)
        for cls in (0, 1):
            members = [sid for sid, lab in zip(ids, labels) if lab == cls]
            tags = [manifest.assignments[sid] for sid in members]
            assert tuple(tags.count(t) for t in SPLIT_TAGS) == (30, 5, 10, 5)

    def test_partition_property(self, rng):
        for trial in range(20):
            n = int(rng.integers(1, 120))
            ids = [f"id{trial}_{k}" for k in range(n)]
            labels = rng.integers(0, 4, size=n).tolist()
            raw = rng.random(4) + 0.05
            ratios = tuple(raw / raw.sum())
            manifest = make_split(ids, labels, ratios, seed=trial, stratified=True)
            assert sorted(manifest.assignments) == sorted(ids)
            data = random_labeled(rng, n, 5)
            data = make_labeled(data.scores.values, labels, ids=ids)
            parts = [apply_split(data, manifest, tag) for tag in SPLIT_TAGS]
            all_ids = [sid for p in parts for sid in p.ids]
            assert sorted(all_ids) == sorted(ids)
            assert len(set(all_ids)) == len(all_ids)


class TestApplySplit:
    def test_picks_tagged_rows(self):
        data = make_labeled([[0.5, 0.5], [0.4, 0.6]], [0, 1], ids=("a", "b"))
        manifest = SplitManifest({"a": "calib", "b": "test"}, RATIOS, seed=0)
        sub = apply_split(data, manifest, "calib")
        assert sub.ids == ("a",)

    def test_empty_tag_gives_empty_collection(self):
        data = make_labeled([[0.5, 0.5]], [0], ids=("a",))
        manifest = SplitManifest({"a": "calib"}, RATIOS, seed=0)
        sub = apply_split(data, manifest, "val")
        assert len(sub) == 0 and sub.num_classes == 2

    def test_missing_id(self):
        data = make_labeled([[0.5, 0.5]], [0], ids=("ghost",))
        manifest = SplitManifest({"a": "calib"}, RATIOS, seed=0)
        with pytest.raises(IdMissingFromManifest):
            apply_split(data, manifest, "calib")

    def test_preserves_input_order(self):
        data = make_labeled(
            [[0.5, 0.5], [0.4, 0.6], [0.3, 0.7]], [0, 1, 0], ids=("c", "a", "b")
        )
        manifest = SplitManifest(
            {"a": "test", "b": "test", "c": "test"}, RATIOS, seed=0
        )
        assert apply_split(data, manifest, "test").ids == ("c", "a", "b")


class TestMergeLabeled:
    def test_concatenates_and_namespaces(self):
        a = make_labeled([[0.5, 0.5]] * 3, [0, 1, 0])
        b = make_labeled([[0.4, 0.6]] * 2, [1, 1])
        merged = merge_labeled([("ham", a), ("dmf", b)])
        assert len(merged) == 5
        assert merged.ids[0] == "ham/s0" and merged.ids[3] == "dmf/s0"

    def test_class_count_mismatch(self):
        a = make_labeled([[0.5, 0.5]], [0])
        b = make_labeled([[0.2, 0.3, 0.5]], [2])
        with pytest.raises(ClassCountMismatch):
            merge_labeled([("x", a), ("y", b)])

    def test_single_part_identity_up_to_naming(self):
        a = make_labeled([[0.5, 0.5], [0.4, 0.6]], [0, 1])
        merged = merge_labeled([("solo", a)])
        assert merged.ids == ("solo/s0", "solo/s1")
        np.testing.assert_array_equal(merged.scores.values, a.scores.values)
        np.testing.assert_array_equal(merged.labels, a.labels)

    def test_duplicate_after_namespacing(self):
        a = make_labeled([[0.5, 0.5]], [0])
        with pytest.raises(DuplicateIdAfterNamespacing):
            merge_labeled([("t", a), ("t", a)])
