import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trialflow.agglomeration import (
    build_progression,
    build_status_matrix,
    stage_agglomeration,
    to_dot,
    weighted_jaccard,
)
from trialflow.errors import LengthMismatch, NegativeEntry
from trialflow.statuses import NUM_STATUSES, EventStatus

T = EventStatus.TREATMENT.index
A = EventStatus.AKI.index
N_ = EventStatus.NO_EVENT.index
DOT = EventStatus.DEATH_OR_TRANSPLANT.index


# ---- weighted jaccard -------------------------------------------------------

def test_jaccard_hand_value():
    assert weighted_jaccard(np.array([2.0, 1.0, 0.0]),
                            np.array([1.0, 1.0, 1.0])) == pytest.approx(0.5)


def test_jaccard_edge_cases():
    zero = np.zeros(3)
    assert weighted_jaccard(zero, zero) == 1.0
    assert weighted_jaccard(zero, np.array([1.0, 0, 0])) == 0.0
    v = np.array([3.0, 0.0, 7.0])
    assert weighted_jaccard(v, v) == 1.0


def test_jaccard_rejects_negative():
    with pytest.raises(NegativeEntry):
        weighted_jaccard(np.array([-1.0, 2.0]), np.array([0.0, 1.0]))


@given(st.lists(st.integers(0, 50), min_size=1, max_size=19),
       st.lists(st.integers(0, 50), min_size=1, max_size=19))
@settings(max_examples=100, deadline=None)
def test_jaccard_properties(u, v):
    size = min(len(u), len(v))
    a = np.array(u[:size], dtype=float)
    b = np.array(v[:size], dtype=float)
    j = weighted_jaccard(a, b)
    assert 0.0 <= j <= 1.0
    assert j == weighted_jaccard(b, a)
    assert weighted_jaccard(a, a) == 1.0


# ---- status matrix ----------------------------------------------------------

def test_constant_cohort_matrix():
    seqs = np.full((2, 3), N_, dtype=np.int8)
    m = build_status_matrix(seqs)
    assert m.num.shape == (NUM_STATUSES, 3)
    np.testing.assert_array_equal(m.num[N_], [2, 2, 2])
    assert m.num.sum() == 6
    # virtual self-entry on day 0, self-exit on the last day
    assert m.inflow[N_, 0, N_] == 2
    assert m.outflow[N_, 2, N_] == 2


def test_single_switch_flows():
    seqs = np.array([[A, DOT, DOT]], dtype=np.int8)
    m = build_status_matrix(seqs)
    assert m.outflow[A, 0, DOT] == 1
    assert m.inflow[DOT, 1, A] == 1
    assert m.inflow[A, 0, A] == 1      # day-0 virtual entry
    assert m.outflow[DOT, 2, DOT] == 1  # final-day virtual exit


def test_matrix_balance_everywhere(mixture_result):
    arr = mixture_result.cohort.status_array()
    m = build_status_matrix(arr)
    n = arr.shape[0]
    assert np.all(m.num.sum(axis=0) == n)
    np.testing.assert_array_equal(m.inflow.sum(axis=2), m.num)
    np.testing.assert_array_equal(m.outflow.sum(axis=2), m.num)


def test_matrix_cross_row_symmetry(mixture_result):
    arr = mixture_result.cohort.status_array()[:40]
    m = build_status_matrix(arr)
    for t in range(arr.shape[1] - 1):
        np.testing.assert_array_equal(m.outflow[:, t, :], m.inflow[:, t + 1, :].T)


def test_column_sums_on_random_sequences(rng):
    for _ in range(50):
        n, days = int(rng.integers(1, 30)), int(rng.integers(2, 40))
        arr = rng.integers(0, NUM_STATUSES, size=(n, days)).astype(np.int8)
        m = build_status_matrix(arr)
        assert np.all(m.num.sum(axis=0) == n)
        np.testing.assert_array_equal(m.inflow.sum(axis=2), m.num)
        np.testing.assert_array_equal(m.outflow.sum(axis=2), m.num)


def test_matrix_rejects_ragged_input():
    with pytest.raises(LengthMismatch):
        build_status_matrix([[EventStatus.NO_EVENT] * 3,
                             [EventStatus.NO_EVENT] * 4])


# ---- merging ------------------------------------------------------------------

def churn_fixture():
    """Two stable treatment shifts sharing four always-on patients.

    The within-shift day similarity is 28/44 and the shift seam is 20/52,
    so delta = 0.5 leaves exactly two blocks.
    """
    seqs = np.full((20, 8), N_, dtype=np.int8)
    seqs[0:4, :] = T
    seqs[4:12, 0:4] = T
    seqs[12:20, 4:8] = T
    return seqs


def test_churn_fixture_two_blocks_at_default_delta():
    chain = stage_agglomeration(churn_fixture(), 0.5)[T]
    assert [(b.first_day, b.last_day, b.num) for b in chain] == [
        (0, 3, 12), (4, 7, 12)]


def test_churn_fixture_collapses_below_seam_similarity():
    chain = stage_agglomeration(churn_fixture(), 0.38)[T]
    assert [(b.first_day, b.last_day, b.num) for b in chain] == [(0, 7, 20)]
    # seam similarity itself: 20/52
    a, b = stage_agglomeration(churn_fixture(), 0.5)[T]
    assert weighted_jaccard(a.sim_vec, b.sim_vec) == pytest.approx(20 / 52)


def test_delta_one_keeps_every_day_separate():
    seqs = churn_fixture()
    m = build_status_matrix(seqs)
    chains = stage_agglomeration(seqs, 1.0)
    n_blocks = sum(len(c) for c in chains)
    assert n_blocks == int((m.num > 0).sum())


def test_constant_status_merges_to_one_block():
    seqs = np.full((5, 10), T, dtype=np.int8)
    for delta in (0.0, 0.5, 0.99):
        chains = stage_agglomeration(seqs, delta)
        assert len(chains[T]) == 1
        block = chains[T][0]
        assert (block.first_day, block.last_day, block.num) == (0, 9, 5)


def test_gaps_split_episodes():
    # treatment on days 0-2 and 5-7 with a hole; never merged across the gap
    seqs = np.full((3, 8), N_, dtype=np.int8)
    seqs[:, 0:3] = T
    seqs[:, 5:8] = T
    chain = stage_agglomeration(seqs, 0.0)[T]
    assert [(b.first_day, b.last_day) for b in chain] == [(0, 2), (5, 7)]


def test_merged_num_is_distinct_patient_recount(rng):
    for _ in range(25):
        n, days = int(rng.integers(2, 25)), int(rng.integers(3, 30))
        arr = rng.integers(0, 4, size=(n, days)).astype(np.int8)
        for delta in (0.0, 0.4, 0.8):
            for status, chain in enumerate(stage_agglomeration(arr, delta)):
                for block in chain:
                    span = arr[:, block.first_day:block.last_day + 1]
                    distinct = int(np.any(span == status, axis=1).sum())
                    assert block.num == distinct


def test_patient_day_totals_invariant_under_delta(mixture_result):
    arr = mixture_result.cohort.status_array()[:50]
    m = build_status_matrix(arr)
    for delta in (0.0, 0.3, 0.5, 0.8, 1.0):
        chains = stage_agglomeration(arr, delta)
        for status in range(NUM_STATUSES):
            merged_total = sum(
                int(m.num[status, b.first_day:b.last_day + 1].sum())
                for b in chains[status])
            assert merged_total == int(m.num[status].sum())


def test_block_count_monotonic_bounds(rng):
    arr = rng.integers(0, 3, size=(10, 12)).astype(np.int8)
    m = build_status_matrix(arr)
    occupied = int((m.num > 0).sum())
    top = sum(len(c) for c in stage_agglomeration(arr, 1.0))
    assert top == occupied
    for delta in (0.0, 0.25, 0.5, 0.75):
        count = sum(len(c) for c in stage_agglomeration(arr, delta))
        assert 1 <= count <= occupied


# ---- transitions ---------------------------------------------------------------

def test_all_switch_fixture_strength_one():
    seqs = np.full((9, 6), T, dtype=np.int8)
    seqs[:, 3:] = A
    graph = build_progression(seqs, 0.5, 0.1)
    assert len(graph.transitions) == 1
    (tr,) = graph.transitions
    assert graph.blocks[tr.source].status_name == "Treatment"
    assert graph.blocks[tr.target].status_name == "Aki"
    assert tr.flow == 9
    assert abs(tr.strength - 1.0) <= 1e-12


def test_no_switch_fixture_no_transitions():
    seqs = np.full((5, 6), T, dtype=np.int8)
    graph = build_progression(seqs, 0.5, 0.1)
    assert graph.transitions == ()
    assert len(graph.blocks) == 1


def test_sigma_filters_weak_transitions():
    # one of 30 patients switches; at delta=1 the day blocks give
    # strength 2*1/(30+1), between the two sigma settings below
    seqs = np.full((30, 4), T, dtype=np.int8)
    seqs[0, 2:] = A
    weak = build_progression(seqs, 1.0, 0.1)
    names = {(weak.blocks[t.source].status, weak.blocks[t.target].status)
             for t in weak.transitions}
    assert (T, A) not in names
    kept = build_progression(seqs, 1.0, 0.01)
    names = {(kept.blocks[t.source].status, kept.blocks[t.target].status)
             for t in kept.transitions}
    assert (T, A) in names


def test_death_cohort_contains_expected_path():
    from trialflow.synth import SynthConfig, generate

    result = generate(SynthConfig(n_patients=60, seed=7,
                                  weights={"death_transplant": 1.0}))
    graph = build_progression(result.cohort.status_array(), 0.5, 0.1)
    edges = {(graph.blocks[t.source].status_name,
              graph.blocks[t.target].status_name)
             for t in graph.transitions}
    assert ("Treatment", "Aki") in edges
    assert ("Aki", "DeathOrTransplant") in edges


def test_transition_flow_counts_movers():
    # 4 patients Treatment->Aki at day 2; 2 more stay on treatment
    seqs = np.full((6, 4), T, dtype=np.int8)
    seqs[:4, 2:] = A
    graph = build_progression(seqs, 1.0, 0.0)
    moves = [(graph.blocks[t.source].status, graph.blocks[t.target].status,
              t.flow) for t in graph.transitions]
    assert (T, A, 4) in moves


def test_dot_export_mentions_blocks_and_edges():
    seqs = np.full((9, 6), T, dtype=np.int8)
    seqs[:, 3:] = A
    graph = build_progression(seqs, 0.5, 0.1)
    dot = to_dot(graph)
    assert dot.startswith("digraph")
    assert "Treatment" in dot and "Aki" in dot
    assert "->" in dot
