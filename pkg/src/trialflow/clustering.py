"""Patient clustering: Ward agglomeration and seeded k-means.

The knowledge-guided path runs Ward's minimum-variance agglomeration over
severity-coded sequences (optionally under per-dimension weights); the
graph path runs k-means on learned latent embeddings. Both are exactly
deterministic: Ward breaks merge-cost ties by smallest node-id pair and
k-means is driven by a seeded generator.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateInput, InvalidK, ValidationError


class Method(Enum):
    WARD_KNOWLEDGE = "WardKnowledge"
    GRAPH_AI = "GraphAI"


def display_name(rank: int) -> str:
    """0 -> A, 1 -> B, ... 26 -> AA (spreadsheet column style)."""
    name = ""
    rank += 1
    while rank:
        rank, rem = divmod(rank - 1, 26)
        name = chr(ord("A") + rem) + name
    return name


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster index per patient plus size-ranked display names.

    labels[i] is the cluster index of patient i in 0..k-1. cluster_names[c]
    is the display label of cluster c; the largest cluster is named "A",
    the next "B", and so on (ties rank the lower index first).
    """

    method: Method
    k: int
    labels: np.ndarray
    cluster_names: tuple[str, ...]

    def __post_init__(self):
        if self.labels.ndim != 1:
            raise ValidationError("labels must be a flat vector")
        if len(self.cluster_names) != self.k:
            raise ValidationError("one display name per cluster required")

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def index_by_name(self, name: str) -> int:
        try:
            return self.cluster_names.index(name)
        except ValueError:
            raise KeyError(name)


def _names_by_size(labels: np.ndarray, k: int) -> tuple[str, ...]:
    sizes = np.bincount(labels, minlength=k)
    order = sorted(range(k), key=lambda c: (-sizes[c], c))
    names = [""] * k
    for rank, cluster in enumerate(order):
        names[cluster] = display_name(rank)
    return tuple(names)


@dataclass(frozen=True)
class Dendrogram:
    """Full merge history: (left id, right id, height, merged size) per step.

    Leaves are 0..N-1; the merge at step s creates node N+s. Heights are
    the Ward merge costs (the increase in within-cluster sum of squares),
    which are non-decreasing for Ward linkage.
    """

    merges: tuple[tuple[int, int, float, int], ...]
    n_leaves: int

    def cut(self, k: int) -> np.ndarray:
        """Labels from keeping the first N-k merges.

        Components are numbered 0..k-1 by their smallest leaf index.
        """
        n = self.n_leaves
        if not 1 <= k <= n:
            raise InvalidK(f"k must be in [1, {n}], got {k}")
        parent = list(range(n + len(self.merges)))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for step, (left, right, _, _) in enumerate(self.merges[: n - k]):
            new = n + step
            parent[find(left)] = new
            parent[find(right)] = new
        roots: dict[int, int] = {}
        min_leaf: dict[int, int] = {}
        for leaf in range(n):
            root = find(leaf)
            if root not in min_leaf:
                min_leaf[root] = leaf
        for label, root in enumerate(sorted(min_leaf, key=min_leaf.get)):
            roots[root] = label
        return np.array([roots[find(leaf)] for leaf in range(n)], dtype=int)


def _validate_matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise DegenerateInput(f"need a 2-D data matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DegenerateInput("data matrix contains non-finite values")
    return x


def ward_cluster(vectors: np.ndarray, k: int,
                 weights: np.ndarray | None = None
                 ) -> tuple[ClusterAssignment, Dendrogram]:
    """Ward agglomeration under weighted Euclidean distance, cut at k.

    Merge cost between clusters A and B is the within-cluster
    sum-of-squares increase |A||B|/(|A|+|B|) * ||c_A - c_B||^2, maintained
    across merges by the Lance-Williams recurrence. The pair with minimum
    cost merges each step; exact ties break by smallest (left, right) node
    id pair. The dendrogram records every merge; its cut at k gives the
    assignment.
    """
    x = _validate_matrix(vectors)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise InvalidK(f"k must be in [1, {n}], got {k}")
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (x.shape[1],):
            raise ValidationError(
                f"weights must have one entry per dimension, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValidationError("dimension weights must be positive and finite")
        x = x * np.sqrt(w)

    # Pairwise singleton merge costs: ||xi - xj||^2 / 2.
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.clip(d2, 0.0, None, out=d2)
    cost = d2 / 2.0

    big = np.inf
    np.fill_diagonal(cost, big)
    active = list(range(n))  # position -> node id
    sizes = {i: 1 for i in range(n)}
    merges: list[tuple[int, int, float, int]] = []

    # cost is indexed by position in `active`; rows collapse as clusters merge.
    for step in range(n - 1):
        m = cost.min()
        ii, jj = None, None
        best: tuple[int, int] | None = None
        pos = np.argwhere(cost == m)
        for a, b in pos:
            if a >= b:
                continue
            pair = (min(active[a], active[b]), max(active[a], active[b]))
            if best is None or pair < best:
                best = pair
                ii, jj = int(a), int(b)
        assert ii is not None and jj is not None and best is not None
        left, right = best
        new_id = n + step
        n_i, n_j = sizes[active[ii]], sizes[active[jj]]
        merges.append((left, right, float(m), n_i + n_j))

        # Lance-Williams update of the merge cost against every survivor.
        keep = [p for p in range(len(active)) if p not in (ii, jj)]
        if keep:
            n_k = np.array([sizes[active[p]] for p in keep], dtype=float)
            d_ik = cost[ii, keep]
            d_jk = cost[jj, keep]
            new_row = ((n_i + n_k) * d_ik + (n_j + n_k) * d_jk - n_k * m) / (
                n_i + n_j + n_k)
        sizes[new_id] = n_i + n_j
        del sizes[active[ii]], sizes[active[jj]]

        # Rebuild the active list and cost matrix with the merged cluster last.
        new_active = [active[p] for p in keep] + [new_id]
        new_cost = np.full((len(new_active), len(new_active)), big)
        if keep:
            new_cost[:-1, :-1] = cost[np.ix_(keep, keep)]
            new_cost[-1, :-1] = new_row
            new_cost[:-1, -1] = new_row
        np.fill_diagonal(new_cost, big)
        active, cost = new_active, new_cost

    dendrogram = Dendrogram(tuple(merges), n)
    labels = dendrogram.cut(k)
    assignment = ClusterAssignment(Method.WARD_KNOWLEDGE, k, labels,
                                   _names_by_size(labels, k))
    return assignment, dendrogram


def _plus_plus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))  # all points coincide with a center
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[c]) ** 2, axis=1))
    return centers


def kmeans(vectors: np.ndarray, k: int, seed: int,
           method: Method = Method.GRAPH_AI,
           max_iter: int = 300) -> ClusterAssignment:
    """Seeded k-means++ with Lloyd iterations to an assignment fixpoint.

    Empty clusters are re-seeded at the point farthest from every current
    center. Nearest-center ties resolve to the lower center index, so runs
    are bit-reproducible for a fixed seed.
    """
    x = _validate_matrix(vectors)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise InvalidK(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centers = _plus_plus_init(x, k, rng)

    labels = None
    for _ in range(max_iter):
        d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        for c in range(k):
            if not np.any(new_labels == c):
                far = int(np.argmax(np.min(d2, axis=1)))
                centers[c] = x[far]
                d2[:, c] = np.sum((x - centers[c]) ** 2, axis=1)
                new_labels = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = x[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    assert labels is not None
    return ClusterAssignment(method, k, labels.astype(int), _names_by_size(labels, k))


def within_cluster_sse(vectors: np.ndarray, labels: np.ndarray) -> float:
    """Within-cluster sum of squared distances to cluster means."""
    x = np.asarray(vectors, dtype=float)
    total = 0.0
    for c in np.unique(labels):
        members = x[labels == c]
        total += float(np.sum((members - members.mean(axis=0)) ** 2))
    return total
