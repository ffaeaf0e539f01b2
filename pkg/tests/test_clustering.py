import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trialflow.clustering import (
    ClusterAssignment,
    Dendrogram,
    Method,
    display_name,
    kmeans,
    ward_cluster,
    within_cluster_sse,
)
from trialflow.errors import DegenerateInput, InvalidK, ValidationError


# ---- independent Ward oracle --------------------------------------------
# Recomputes every candidate merge cost from scratch as the increase in
# within-cluster sum of squares, never via the recurrence the
# implementation uses. Same tie rule: smallest (left, right) id pair.

def _ess(points: np.ndarray) -> float:
    return float(np.sum((points - points.mean(axis=0)) ** 2))


def oracle_ward(x: np.ndarray):
    n = len(x)
    clusters = {i: [i] for i in range(n)}  # node id -> member rows
    merges = []
    for step in range(n - 1):
        best = None
        for a in sorted(clusters):
            for b in sorted(clusters):
                if a >= b:
                    continue
                both = clusters[a] + clusters[b]
                cost = _ess(x[both]) - _ess(x[clusters[a]]) - _ess(x[clusters[b]])
                if best is None or cost < best[0] - 1e-12 or (
                        abs(cost - best[0]) <= 1e-12 and (a, b) < best[1:]):
                    best = (cost, a, b)
        cost, a, b = best
        new_id = n + step
        clusters[new_id] = clusters.pop(a) + clusters.pop(b)
        merges.append((a, b, cost, len(clusters[new_id])))
    return merges


def test_ward_matches_exhaustive_oracle_on_random_instances():
    rng = np.random.default_rng(42)
    t0 = time.time()
    for trial in range(50):
        n = int(rng.integers(2, 13))
        d = int(rng.integers(1, 5))
        x = rng.normal(size=(n, d))
        _, dendro = ward_cluster(x, 1)
        expected = oracle_ward(x)
        assert len(dendro.merges) == len(expected)
        for got, want in zip(dendro.merges, expected):
            assert got[:2] == want[:2], f"trial {trial}: merge order differs"
            assert got[3] == want[3]
            rel = abs(got[2] - want[2]) / max(abs(want[2]), 1e-30)
            assert rel < 1e-9 or abs(got[2] - want[2]) < 1e-12
    assert time.time() - t0 < 10.0


def test_ward_heights_monotone(rng):
    for _ in range(20):
        x = rng.normal(size=(rng.integers(3, 30), 3))
        _, dendro = ward_cluster(x, 1)
        heights = [m[2] for m in dendro.merges]
        assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))


def test_ward_two_point_height_is_half_squared_distance():
    x = np.array([[0.0, 0.0], [3.0, 4.0]])
    _, dendro = ward_cluster(x, 1)
    (left, right, height, size), = dendro.merges
    assert (left, right, size) == (0, 1, 2)
    assert height == pytest.approx(12.5)  # 25 / 2


def test_ward_ties_break_by_smallest_id_pair():
    x = np.zeros((4, 2))  # four coincident points, all costs zero
    _, dendro = ward_cluster(x, 1)
    assert [m[:2] for m in dendro.merges] == [(0, 1), (2, 3), (4, 5)]
    assert all(m[2] == 0.0 for m in dendro.merges)


def test_cut_extremes(rng):
    x = rng.normal(size=(6, 2))
    assignment, dendro = ward_cluster(x, 6)
    np.testing.assert_array_equal(assignment.labels, np.arange(6))
    one, _ = ward_cluster(x, 1)
    assert np.all(one.labels == 0)
    with pytest.raises(InvalidK):
        dendro.cut(0)
    with pytest.raises(InvalidK):
        dendro.cut(7)


def test_cut_numbers_clusters_by_smallest_leaf():
    # two well-separated pairs; cluster containing row 0 must get label 0
    x = np.array([[0.0], [0.1], [10.0], [10.1]])
    assignment, _ = ward_cluster(x, 2)
    assert assignment.labels[0] == 0
    assert assignment.labels[2] == 1


def test_ward_scaling_covariance(rng):
    x = rng.normal(size=(12, 3))
    a1, d1 = ward_cluster(x, 3)
    a2, d2 = ward_cluster(x * 2.5, 3)
    np.testing.assert_array_equal(a1.labels, a2.labels)
    for m1, m2 in zip(d1.merges, d2.merges):
        assert m1[:2] == m2[:2]
        assert m2[2] == pytest.approx(m1[2] * 2.5 ** 2)


def test_ward_dimension_weights_equal_column_scaling(rng):
    x = rng.normal(size=(10, 4))
    w = np.array([4.0, 1.0, 0.25, 9.0])
    a1, d1 = ward_cluster(x, 3, weights=w)
    a2, d2 = ward_cluster(x * np.sqrt(w), 3)
    np.testing.assert_array_equal(a1.labels, a2.labels)
    for m1, m2 in zip(d1.merges, d2.merges):
        assert m1[:2] == m2[:2]
        assert m1[2] == pytest.approx(m2[2], rel=1e-12)


def test_ward_rejects_bad_weights(rng):
    x = rng.normal(size=(5, 2))
    with pytest.raises(ValidationError):
        ward_cluster(x, 2, weights=np.array([1.0]))
    with pytest.raises(ValidationError):
        ward_cluster(x, 2, weights=np.array([1.0, -1.0]))


def test_ward_permutation_equivalence(rng):
    x = rng.normal(size=(15, 3))
    perm = rng.permutation(15)
    a1, _ = ward_cluster(x, 4)
    a2, _ = ward_cluster(x[perm], 4)
    # same partition of rows, cluster indices aside
    for i in range(15):
        for j in range(15):
            same1 = a1.labels[perm[i]] == a1.labels[perm[j]]
            same2 = a2.labels[i] == a2.labels[j]
            assert same1 == same2


def test_degenerate_inputs_rejected():
    with pytest.raises(DegenerateInput):
        ward_cluster(np.empty((0, 3)), 1)
    with pytest.raises(DegenerateInput):
        ward_cluster(np.array([[1.0, np.nan]]), 1)
    with pytest.raises(InvalidK):
        kmeans(np.ones((3, 2)), 4, seed=0)


# ---- k-means --------------------------------------------------------------

def test_kmeans_recovers_separated_blobs(rng):
    centers = np.array([[0, 0], [20, 0], [0, 20]])
    x = np.vstack([c + rng.normal(scale=0.5, size=(15, 2)) for c in centers])
    assignment = kmeans(x, 3, seed=1)
    # every blob lands in one cluster
    for b in range(3):
        blob = assignment.labels[b * 15:(b + 1) * 15]
        assert len(set(blob.tolist())) == 1
    assert assignment.method is Method.GRAPH_AI


def test_kmeans_deterministic_per_seed(rng):
    x = rng.normal(size=(40, 5))
    a = kmeans(x, 4, seed=3)
    b = kmeans(x, 4, seed=3)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_kmeans_sse_non_increasing_in_iterations(rng):
    x = rng.normal(size=(60, 4))
    previous = np.inf
    for iters in (1, 2, 3, 5, 8, 13, 300):
        labels = kmeans(x, 5, seed=7, max_iter=iters).labels
        sse = within_cluster_sse(x, labels)
        assert sse <= previous + 1e-9
        previous = sse


def test_kmeans_fills_empty_clusters(rng):
    # duplicate mass at one point with k=3 forces a reseed
    x = np.vstack([np.zeros((10, 2)), [[5.0, 5.0]], [[9.0, 1.0]]])
    assignment = kmeans(x, 3, seed=0)
    assert set(assignment.labels.tolist()) == {0, 1, 2}


def test_kmeans_scaling_covariance(rng):
    x = rng.normal(size=(30, 3))
    a = kmeans(x, 3, seed=5)
    b = kmeans(x * 7.0, 3, seed=5)
    np.testing.assert_array_equal(a.labels, b.labels)


# ---- display names ----------------------------------------------------------

def test_display_names_spreadsheet_style():
    assert [display_name(i) for i in range(4)] == ["A", "B", "C", "D"]
    assert display_name(25) == "Z"
    assert display_name(26) == "AA"
    assert display_name(27) == "AB"
    assert display_name(26 * 27) == "AAA"


def test_names_rank_clusters_by_size():
    labels = np.array([0, 0, 1, 1, 1, 2])
    assignment = ClusterAssignment(Method.WARD_KNOWLEDGE, 3, labels,
                                   ("B", "A", "C"))
    assert assignment.cluster_names[1] == "A"  # largest cluster
    assert assignment.index_by_name("A") == 1
    np.testing.assert_array_equal(assignment.sizes, [2, 3, 1])
    np.testing.assert_array_equal(assignment.members(1), [2, 3, 4])
    with pytest.raises(KeyError):
        assignment.index_by_name("Z")


def test_assignment_from_ward_names_by_size(rng):
    x = np.vstack([rng.normal(size=(8, 2)),
                   rng.normal(loc=30, size=(3, 2))])
    assignment, _ = ward_cluster(x, 2)
    big = assignment.labels[0]
    assert assignment.cluster_names[big] == "A"


# ---- property tests ---------------------------------------------------------

@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)),
                min_size=2, max_size=9, unique=True))
@settings(max_examples=40, deadline=None)
def test_ward_heights_equal_direct_ess_increase(points):
    # Tie-robust check: whatever pair the implementation merged, its recorded
    # height must equal the sum-of-squares increase recomputed from scratch.
    x = np.asarray(points)
    n = len(x)
    _, dendro = ward_cluster(x, 1)
    members = {i: [i] for i in range(n)}
    for step, (left, right, height, size) in enumerate(dendro.merges):
        both = members[left] + members[right]
        direct = _ess(x[both]) - _ess(x[members[left]]) - _ess(x[members[right]])
        assert height == pytest.approx(direct, rel=1e-9, abs=1e-9)
        assert size == len(both)
        members[n + step] = both


@given(st.integers(2, 20), st.integers(1, 4), st.integers(0, 2 ** 16))
@settings(max_examples=25, deadline=None)
def test_ward_cut_partitions_everything(n, d, seed):
    x = np.random.default_rng(seed).normal(size=(n, d))
    for k in {1, 2, n // 2, n}:
        if k < 1:
            continue
        assignment, _ = ward_cluster(x, k)
        assert assignment.labels.shape == (n,)
        assert set(assignment.labels.tolist()) == set(range(k))
