"""Cohort trajectory condensation into a block-and-transition graph.

Per-day occupancy of each status is summarized by a (num, inflow,
outflow) triplet with virtual self-entry at day 0 and self-exit at the
final day, so flow balance holds at every cell. Runs of similar days
merge greedily while the weighted Jaccard similarity of adjacent blocks
exceeds a threshold; cross-status flows between surviving blocks become
the weighted edges of the progression graph.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, NegativeEntry, ValidationError
from .statuses import NUM_STATUSES, STATUS_ORDER, EventStatus


def _as_index_array(sequences) -> np.ndarray:
    """Accept (N, T) index arrays or lists of EventStatus tuples."""
    if isinstance(sequences, np.ndarray):
        arr = sequences.astype(np.intp)
    else:
        rows = []
        width = None
        for seq in sequences:
            row = [s.index if isinstance(s, EventStatus) else int(s) for s in seq]
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise LengthMismatch(
                    f"sequence lengths differ: {len(row)} vs {width}")
            rows.append(row)
        arr = np.array(rows, dtype=np.intp)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"need a non-empty (N, T) sequence array, got {arr.shape}")
    if arr.min() < 0 or arr.max() >= NUM_STATUSES:
        raise ValidationError("status indices out of range")
    return arr


@dataclass(frozen=True)
class StatusMatrix:
    """Per-status, per-day transition triplets.

    num[k, t] counts patients in status k at day t. inflow[k, t, m] counts
    patients in k at t that were in m at t-1; outflow[k, t, p] counts
    those moving to p at t+1. Day 0 inflow and final-day outflow are
    virtual self-loops, making every cell balance exactly.
    """

    num: np.ndarray
    inflow: np.ndarray
    outflow: np.ndarray

    @property
    def n_days(self) -> int:
        return self.num.shape[1]

    @property
    def n_patients(self) -> int:
        return int(self.num[:, 0].sum())


def build_status_matrix(sequences) -> StatusMatrix:
    arr = _as_index_array(sequences)
    n, t_len = arr.shape
    num = np.zeros((NUM_STATUSES, t_len), dtype=np.int64)
    inflow = np.zeros((NUM_STATUSES, t_len, NUM_STATUSES), dtype=np.int64)
    outflow = np.zeros((NUM_STATUSES, t_len, NUM_STATUSES), dtype=np.int64)

    for t in range(t_len):
        counts = np.bincount(arr[:, t], minlength=NUM_STATUSES)
        num[:, t] = counts
    for t in range(1, t_len):
        # joint (previous status, current status) counts at the t-1 -> t boundary
        joint = np.zeros((NUM_STATUSES, NUM_STATUSES), dtype=np.int64)
        np.add.at(joint, (arr[:, t - 1], arr[:, t]), 1)
        inflow[:, t, :] = joint.T
        outflow[:, t - 1, :] = joint
    for k in range(NUM_STATUSES):
        inflow[k, 0, k] = num[k, 0]
        outflow[k, t_len - 1, k] = num[k, t_len - 1]
    return StatusMatrix(num, inflow, outflow)


def weighted_jaccard(u: np.ndarray, v: np.ndarray) -> float:
    """Sum-of-mins over sum-of-maxes; two all-zero vectors count as identical."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValidationError(f"shape mismatch {u.shape} vs {v.shape}")
    if np.any(u < 0) or np.any(v < 0):
        raise NegativeEntry("similarity vectors must be non-negative")
    denom = float(np.maximum(u, v).sum())
    if denom == 0.0:
        return 1.0
    return float(np.minimum(u, v).sum()) / denom


@dataclass(frozen=True)
class Block:
    """A run of consecutive days in one status.

    num counts distinct patients occupying the status anywhere in the
    span; the boundary inflow/outflow vectors come from the span's first
    and last day.
    """

    status: int
    first_day: int
    last_day: int
    num: int
    inflow: tuple[int, ...]
    outflow: tuple[int, ...]

    @property
    def status_name(self) -> str:
        return STATUS_ORDER[self.status].value

    @property
    def sim_vec(self) -> np.ndarray:
        return np.concatenate(([self.num], self.inflow, self.outflow)).astype(float)


def _distinct_over_span(arr: np.ndarray, status: int, first: int, last: int) -> int:
    window = arr[:, first:last + 1]
    return int(np.count_nonzero(np.any(window == status, axis=1)))


def _day_block(matrix: StatusMatrix, arr: np.ndarray, status: int, day: int) -> Block:
    return Block(status, day, day, int(matrix.num[status, day]),
                 tuple(int(x) for x in matrix.inflow[status, day]),
                 tuple(int(x) for x in matrix.outflow[status, day]))


def _merge_pair(a: Block, b: Block, arr: np.ndarray) -> Block:
    num = _distinct_over_span(arr, a.status, a.first_day, b.last_day)
    return Block(a.status, a.first_day, b.last_day, num, a.inflow, b.outflow)


def merge_linkedlist(chain: list[Block], delta: float,
                     sequences) -> list[Block]:
    """Greedy neighbor merging while the best similarity strictly exceeds delta.

    Each round scores every adjacent pair by weighted Jaccard of their
    19-vectors, merges the highest-scoring pair (ties go to the earliest
    day), and repeats until nothing beats delta or one block remains.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValidationError(f"delta must lie in [0, 1], got {delta}")
    arr = _as_index_array(sequences)
    blocks = list(chain)
    if len(blocks) < 2:
        return blocks
    sims = [weighted_jaccard(blocks[i].sim_vec, blocks[i + 1].sim_vec)
            for i in range(len(blocks) - 1)]
    while len(blocks) > 1:
        best = max(range(len(sims)), key=lambda i: (sims[i], -blocks[i].first_day))
        if not sims[best] > delta:
            break
        merged = _merge_pair(blocks[best], blocks[best + 1], arr)
        blocks[best:best + 2] = [merged]
        del sims[best]
        # only pairs adjacent to the merged block changed
        if best - 1 >= 0:
            sims[best - 1] = weighted_jaccard(blocks[best - 1].sim_vec,
                                              blocks[best].sim_vec)
        if best < len(sims):
            sims[best] = weighted_jaccard(blocks[best].sim_vec,
                                          blocks[best + 1].sim_vec)
    return blocks


def stage_agglomeration(sequences, delta: float) -> list[list[Block]]:
    """Per-status block chains after merging.

    Days with zero occupancy are excluded and break contiguity; merging
    never bridges a gap. Returns one block list per status row, each
    ordered by day.
    """
    arr = _as_index_array(sequences)
    matrix = build_status_matrix(arr)
    chains: list[list[Block]] = []
    for k in range(NUM_STATUSES):
        occupied = np.flatnonzero(matrix.num[k] > 0)
        merged_chain: list[Block] = []
        episode: list[Block] = []
        prev_day = None
        for day in occupied:
            if prev_day is not None and day != prev_day + 1:
                merged_chain.extend(merge_linkedlist(episode, delta, arr))
                episode = []
            episode.append(_day_block(matrix, arr, k, int(day)))
            prev_day = day
        if episode:
            merged_chain.extend(merge_linkedlist(episode, delta, arr))
        chains.append(merged_chain)
    return chains


@dataclass(frozen=True)
class Transition:
    """Edge between blocks of different statuses."""

    source: int  # index into ProgressionGraph.blocks
    target: int
    flow: int
    strength: float


@dataclass(frozen=True)
class ProgressionGraph:
    blocks: tuple[Block, ...]
    transitions: tuple[Transition, ...]


def extract_transitions(chains: list[list[Block]], sequences,
                        sigma_trans: float) -> ProgressionGraph:
    """Cross-status block flows strong enough to keep.

    flow(A, B) counts patient-day boundaries leaving A's status inside A's
    span for B's status inside B's span (spans overlap only at the d ->
    d+1 boundary). strength = 2*flow / (num_A + num_B); edges survive when
    strength strictly exceeds sigma_trans and at least one patient moved.
    """
    arr = _as_index_array(sequences)
    t_len = arr.shape[1]
    blocks: list[Block] = [b for chain in chains for b in chain]
    index_of: dict[tuple[int, int], int] = {}
    day_owner = np.full((NUM_STATUSES, t_len), -1, dtype=int)
    for pos, block in enumerate(blocks):
        index_of[(block.status, block.first_day)] = pos
        day_owner[block.status, block.first_day:block.last_day + 1] = pos

    flows: dict[tuple[int, int], int] = {}
    prev = arr[:, :-1]
    cur = arr[:, 1:]
    movers = np.argwhere(prev != cur)
    for i, d in movers:
        src = day_owner[prev[i, d], d]
        dst = day_owner[cur[i, d], d + 1]
        if src < 0 or dst < 0:
            continue
        flows[(src, dst)] = flows.get((src, dst), 0) + 1

    transitions = []
    for (src, dst), flow in sorted(flows.items()):
        strength = 2.0 * flow / (blocks[src].num + blocks[dst].num)
        if strength > sigma_trans and flow >= 1:
            transitions.append(Transition(src, dst, flow, strength))
    return ProgressionGraph(tuple(blocks), tuple(transitions))


def build_progression(sequences, delta: float = 0.5,
                      sigma_trans: float = 0.1) -> ProgressionGraph:
    chains = stage_agglomeration(sequences, delta)
    return extract_transitions(chains, sequences, sigma_trans)


def to_dot(graph: ProgressionGraph) -> str:
    """DOT rendering for desk inspection of a progression graph."""
    lines = ["digraph progression {", "  rankdir=LR;"]
    for i, b in enumerate(graph.blocks):
        label = f"{b.status_name}\\n[{b.first_day},{b.last_day}] n={b.num}"
        lines.append(f'  b{i} [shape=box label="{label}"];')
    for t in graph.transitions:
        lines.append(
            f'  b{t.source} -> b{t.target} [label="{t.flow} ({t.strength:.2f})"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
