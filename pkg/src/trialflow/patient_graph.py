"""Node features and the kNN patient similarity graph.

Node features concatenate the standardized baseline block with the
severity-coded sequence (scaled to a comparable range). Edges connect
each patient to its k nearest neighbors in baseline space, symmetrized by
union, with self-loops so every node aggregates at least itself.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import Cohort
from .errors import InvalidK, ValidationError
from .statuses import SeverityCoding

SEQUENCE_SCALE = 20.0


@dataclass(frozen=True)
class FeatureLayout:
    """Column map of the node-feature matrix.

    Baseline columns come first (z-scored numerics, raw one-hot
    categoricals), then one column per follow-up day.
    """

    baseline_names: tuple[str, ...]
    n_days: int

    @property
    def n_baseline(self) -> int:
        return len(self.baseline_names)

    @property
    def baseline_slice(self) -> slice:
        return slice(0, self.n_baseline)

    @property
    def sequence_slice(self) -> slice:
        return slice(self.n_baseline, self.n_baseline + self.n_days)

    @property
    def width(self) -> int:
        return self.n_baseline + self.n_days


@dataclass(frozen=True)
class PatientGraph:
    """Symmetric neighbor lists plus the node-feature matrix."""

    n: int
    neighbors: tuple[tuple[int, ...], ...]  # sorted ids, self included
    node_features: np.ndarray
    layout: FeatureLayout

    def __post_init__(self):
        if len(self.neighbors) != self.n or self.node_features.shape[0] != self.n:
            raise ValidationError("graph arrays disagree on node count")
        for i, nbrs in enumerate(self.neighbors):
            if i not in nbrs:
                raise ValidationError(f"node {i} is missing its self-loop")
            if len(set(nbrs)) != len(nbrs):
                raise ValidationError(f"node {i} has duplicate edges")
            for j in nbrs:
                if i not in self.neighbors[j]:
                    raise ValidationError(f"edge {i}->{j} is not symmetric")

    def adjacency_mask(self) -> np.ndarray:
        """(N, N) boolean mask, True where j is a neighbor of i."""
        mask = np.zeros((self.n, self.n), dtype=bool)
        for i, nbrs in enumerate(self.neighbors):
            mask[i, list(nbrs)] = True
        return mask


def standardize_baselines(cohort: Cohort) -> np.ndarray:
    """Z-score numeric baseline columns; one-hot columns pass through.

    A zero-variance numeric column standardizes to constant 0.
    """
    raw = cohort.baseline_matrix()
    out = raw.astype(float).copy()
    col = 0
    for spec in cohort.config.features:
        if spec.kind == "numeric":
            mean = raw[:, col].mean()
            std = raw[:, col].std()
            out[:, col] = 0.0 if std == 0 else (raw[:, col] - mean) / std
            col += 1
        else:
            col += spec.width
    return out


def build_node_features(cohort: Cohort,
                        coding: SeverityCoding | None = None
                        ) -> tuple[np.ndarray, FeatureLayout]:
    """Per-node feature rows: [standardized baselines | coded sequence / 20]."""
    baselines = standardize_baselines(cohort)
    coded = cohort.coded_matrix(coding) / SEQUENCE_SCALE
    features = np.concatenate([baselines, coded], axis=1)
    layout = FeatureLayout(tuple(cohort.encoded_feature_names), coded.shape[1])
    return features, layout


def build_knn_graph(baselines: np.ndarray, k: int, node_features: np.ndarray,
                    layout: FeatureLayout) -> PatientGraph:
    """Union-symmetrized kNN graph over baseline distance.

    Each node proposes edges to its k nearest others by Euclidean distance
    on the baseline columns (distance ties resolved toward the lower
    index); the edge set is the union over proposals; every node gets a
    self-loop.
    """
    x = np.asarray(baselines, dtype=float)
    n = x.shape[0]
    if not 1 <= k < n:
        raise InvalidK(f"k must be in [1, N-1] = [1, {n - 1}], got {k}")
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.clip(d2, 0.0, None, out=d2)

    adjacency: list[set[int]] = [{i} for i in range(n)]
    order = np.arange(n)
    for i in range(n):
        # lexsort: primary key distance, secondary key index (lower wins ties)
        ranked = order[np.lexsort((order, d2[i]))]
        chosen = [int(j) for j in ranked if j != i][:k]
        for j in chosen:
            adjacency[i].add(j)
            adjacency[j].add(i)
    neighbors = tuple(tuple(sorted(nbrs)) for nbrs in adjacency)
    return PatientGraph(n, neighbors, np.asarray(node_features, dtype=float), layout)


def graph_from_cohort(cohort: Cohort, k: int = 10,
                      coding: SeverityCoding | None = None) -> PatientGraph:
    """Convenience: features + layout + kNN edges in one call."""
    features, layout = build_node_features(cohort, coding)
    baselines = features[:, layout.baseline_slice]
    return build_knn_graph(baselines, k, features, layout)
