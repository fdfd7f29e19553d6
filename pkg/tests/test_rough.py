import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import centroid_clustering_bruteforce
from trendclass.rough import (DOWNWARD, FLAT, UPWARD, ClassificationError, TargetPair,
                              centroid_cluster, centroid_linkage, classify_by_sign, cut_tree,
                              default_targets, discriminant_scores, divergence, rough_classify,
                              user_targets)


def test_default_targets_n3():
    t = default_targets(3)
    np.testing.assert_array_equal(t.T1, [-1, 0, 1])
    np.testing.assert_array_equal(t.T2, [1, 0, -1])


@pytest.mark.parametrize("N", [2, 5, 20, 31])
def test_default_targets_mirror(N):
    t = default_targets(N)
    np.testing.assert_array_equal(t.T1 + t.T2, np.zeros(N))
    zero = np.zeros(N)
    assert divergence(zero, t.T1) == divergence(zero, t.T2)


def test_hand_computed_score():
    t = default_targets(3)
    scores = discriminant_scores({"x": np.array([0.0, 0.0, 1.0])}, t)
    # L(t:T2) = 1 + 0 + 4, L(t:T1) = 1 + 0 + 0
    assert scores["x"] == 4.0
    assert classify_by_sign(scores).groups["x"] == UPWARD


def test_self_and_midpoint_scores():
    t = default_targets(7)
    s = discriminant_scores({"a": t.T1, "mid": (t.T1 + t.T2) / 2}, t)
    assert s["a"] == divergence(t.T1, t.T2) > 0
    assert s["mid"] == 0


def test_length_mismatch():
    with pytest.raises(ClassificationError):
        discriminant_scores({"a": np.zeros(4)}, default_targets(5))


def test_user_targets(example_fits):
    t = user_targets(["V2", "V7"], example_fits)
    np.testing.assert_array_equal(t.T1, example_fits["V2"].fitted)
    np.testing.assert_array_equal(t.T2, example_fits["V7"].fitted)
    with pytest.raises(ClassificationError, match="different"):
        user_targets(["V1", "V1"], example_fits)
    with pytest.raises(ClassificationError, match="available"):
        user_targets(["V1", "V42"], example_fits)


def test_user_target_swap_negates(example_fits):
    a = discriminant_scores(example_fits, user_targets(["V9", "V2"], example_fits))
    b = discriminant_scores(example_fits, user_targets(["V2", "V9"], example_fits))
    for k in a:
        assert a[k] == -b[k]


def test_swap_antisymmetry_random(rng):
    for _ in range(100):
        N = int(rng.integers(3, 30))
        T1, T2 = rng.normal(size=N), rng.normal(size=N)
        trends = {f"v{i}": rng.normal(size=N) for i in range(5)}
        s12 = discriminant_scores(trends, TargetPair(T1, T2))
        s21 = discriminant_scores(trends, TargetPair(T2, T1))
        for k in trends:
            assert abs(s12[k] + s21[k]) <= 1e-12 * max(1.0, abs(s12[k]))
        g12 = classify_by_sign(s12).groups
        g21 = classify_by_sign(s21).groups
        for k in trends:
            if s12[k] != 0:
                assert g12[k] != g21[k]


def test_sign_rule_and_tie():
    res = classify_by_sign({"A": 4.0, "B": -4.0, "C": 0.0}, 2)
    assert res.groups == {"A": UPWARD, "B": DOWNWARD, "C": DOWNWARD}
    assert res.not_applicable == []


def test_three_groups_flat_not_applicable():
    N = 10
    t = default_targets(N)
    trends = {"up": 1.6 * t.T1, "up2": 1.2 * t.T1, "down": 1.5 * t.T2}
    res = classify_by_sign(discriminant_scores(trends, t), 3, fits=trends, targets=t)
    assert res.not_applicable == [FLAT]
    assert res.groups == {"up": UPWARD, "up2": UPWARD, "down": DOWNWARD}


def test_three_groups_flat_member():
    t = default_targets(10)
    trends = {"up": t.T1, "flatish": 0.3 * t.T1, "dip": np.cos(np.linspace(0, 2 * np.pi, 10)) * 0.4}
    res = classify_by_sign(discriminant_scores(trends, t), 3, fits=trends, targets=t)
    assert res.groups["flatish"] == FLAT and res.groups["dip"] == FLAT
    assert res.not_applicable == [DOWNWARD]


def test_cluster_separated():
    res = centroid_cluster({"A": 10.0, "B": 9.0, "C": -10.0}, 2)
    assert res.groups == {"A": UPWARD, "B": UPWARD, "C": DOWNWARD}
    assert res.method == "clustering"


def test_cluster_two_points():
    res = centroid_cluster({"A": 3.0, "B": -1.5}, 2)
    assert res.groups == {"A": UPWARD, "B": DOWNWARD}
    assert len(res.dendrogram.merges) == 1
    assert res.dendrogram.merges[0].height == 4.5


def test_cluster_too_few():
    with pytest.raises(ClassificationError):
        centroid_cluster({"A": 1.0, "B": 2.0}, 3)


@pytest.mark.parametrize("k", [2, 3])
def test_cluster_matches_bruteforce(k, rng):
    for _ in range(100):
        n = int(rng.integers(k, 9))
        values = list(rng.normal(0, 20, size=n))
        dend = centroid_linkage(values)
        expected, heights = centroid_clustering_bruteforce(values, k)
        assert cut_tree(dend, k) == expected
        np.testing.assert_allclose([m.height for m in dend.merges[: n - k]], heights, rtol=1e-12)


def test_tie_break_smallest_index():
    # pairs (0,1) and (1,2) and (2,3) all at distance 1
    dend = centroid_linkage([0.0, 1.0, 2.0, 3.0])
    first = dend.merges[0]
    assert (first.left, first.right) == (0, 1)


def test_merge_order_shift_invariant(rng):
    for _ in range(30):
        values = rng.normal(size=7).round(3)
        a = centroid_linkage(values)
        b = centroid_linkage(values + 1000.0 * rng.integers(-3, 4))
        assert [(m.left, m.right) for m in a.merges] == [(m.left, m.right) for m in b.merges]


def test_dendrogram_structure(rng):
    names = [f"V{i}" for i in range(1, 8)]
    dend = centroid_linkage(rng.normal(size=7), names)
    assert len(dend.merges) == 6
    assert sorted(dend.leaf_order()) == sorted(names)
    text = dend.to_text()
    assert text.endswith(";") and all(n in text for n in names)
    assert text.count("(") == 6


def test_leaf_order_is_contiguous_per_subtree(rng):
    dend = centroid_linkage(rng.normal(size=8), [str(i) for i in range(8)])
    order = dend.leaf_order()
    n = 8
    members = {i: [str(i)] for i in range(n)}
    for k, m in enumerate(dend.merges):
        members[n + k] = members[m.left] + members[m.right]
        pos = sorted(order.index(x) for x in members[n + k])
        assert pos == list(range(pos[0], pos[0] + len(pos)))


def test_sign_and_cluster_agree_when_well_separated(rng):
    for _ in range(20):
        ups = rng.uniform(40, 44, size=4)
        downs = rng.uniform(-44, -40, size=5)
        scores = {f"u{i}": v for i, v in enumerate(ups)} | {f"d{i}": v for i, v in enumerate(downs)}
        assert classify_by_sign(scores, 2).groups == centroid_cluster(scores, 2).groups


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=12), st.sampled_from([2, 3]))
def test_groups_partition(values, k):
    scores = {f"v{i}": v for i, v in enumerate(values)}
    res = centroid_cluster(scores, k)
    assert set(res.groups) == set(scores)
    assert sorted(sum((res.members(g) for g in (UPWARD, FLAT, DOWNWARD)), [])) == sorted(scores)
    assert set(res.dendrogram.leaves) == set(scores)


def test_example_paths(example_fits):
    r3 = rough_classify(example_fits, 3, clustering=True)
    r2 = rough_classify(example_fits, 2, clustering=True)
    assert r3.members(FLAT) == ["V2"]
    assert r2.groups["V2"] == UPWARD
    assert r3.members(UPWARD) == ["V5", "V7", "V8"]
    assert r3.members(DOWNWARD) == ["V1", "V3", "V4", "V6", "V9"]
    assert r3.dendrogram is not None
    d = rough_classify(example_fits, 2, clustering=False)
    assert d.dendrogram is None and d.method == "discriminant-only"


def test_targets_differ():
    with pytest.raises(ClassificationError):
        TargetPair(np.ones(3), np.ones(3))
