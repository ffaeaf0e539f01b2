"""Cluster explanation: MLP membership classifier plus gradient attribution.

A small MLP learns cluster membership from the latent embeddings. Feature
importance for a patient is ReLU(gradient x input) of the predicted
cluster probability with respect to that patient's baseline columns of
the node-feature matrix, differentiated through the encoder attention
stack. Cluster-level importance averages members, rescales by cohort
size, and maps through a softmax onto (-1, 1).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autoencoder import GTParams, _layer_backward, _layer_forward, _layer_output
from .clustering import ClusterAssignment
from .errors import (
    DivergenceError,
    EmptyCluster,
    UntrainedPipeline,
    ValidationError,
)
from .patient_graph import PatientGraph


@dataclass(frozen=True)
class MLPConfig:
    hidden: int = 32
    lr: float = 1e-3
    epochs: int = 500


@dataclass
class MLPModel:
    """Hidden ReLU layer then softmax logits over clusters."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    train_accuracy: float = 0.0

    @property
    def n_classes(self) -> int:
        return self.w2.shape[1]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x @ self.w1 + self.b1, 0.0) @ self.w2 + self.b2

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        z = self.logits(x)
        z = z - z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=-1)


def train_mlp(latents: np.ndarray, assignment: ClusterAssignment,
              config: MLPConfig = MLPConfig(), seed: int = 0) -> MLPModel:
    """Full-batch Adam on softmax cross-entropy against cluster labels."""
    from .optim import Adam

    x = np.asarray(latents, dtype=float)
    y = np.asarray(assignment.labels, dtype=int)
    if x.shape[0] != y.shape[0]:
        raise ValidationError("latent rows and labels disagree on patient count")
    n, d = x.shape
    k = assignment.k
    rng = np.random.default_rng(seed)
    s1 = np.sqrt(6.0 / (d + config.hidden))
    s2 = np.sqrt(6.0 / (config.hidden + k))
    w1 = rng.uniform(-s1, s1, (d, config.hidden))
    b1 = np.zeros(config.hidden)
    w2 = rng.uniform(-s2, s2, (config.hidden, k))
    b2 = np.zeros(k)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0

    optimizer = Adam(lr=config.lr)
    params = [w1, b1, w2, b2]
    for epoch in range(config.epochs):
        w1, b1, w2, b2 = params
        z1 = x @ w1 + b1
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ w2 + b2
        z2s = z2 - z2.max(axis=1, keepdims=True)
        e = np.exp(z2s)
        p = e / e.sum(axis=1, keepdims=True)
        loss = float(-np.mean(np.log(p[np.arange(n), y] + 1e-300)))
        if not np.isfinite(loss):
            raise DivergenceError("classifier loss left the finite range",
                                  epoch=epoch)
        dz2 = (p - onehot) / n
        dw2 = a1.T @ dz2
        db2 = dz2.sum(axis=0)
        da1 = dz2 @ w2.T
        dz1 = da1 * (z1 > 0)
        dw1 = x.T @ dz1
        db1 = dz1.sum(axis=0)
        params = optimizer.step(params, [dw1, db1, dw2, db2])

    w1, b1, w2, b2 = params
    model = MLPModel(w1, b1, w2, b2)
    model.train_accuracy = float(np.mean(model.predict(x) == y))
    return model


@dataclass(frozen=True)
class ImportanceVector:
    """ReLU(gradient x input) per baseline feature for one patient."""

    patient_id: str
    cluster: int
    feature_names: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        if self.scores.shape != (len(self.feature_names),):
            raise ValidationError("one score per baseline feature required")
        if np.any(self.scores < 0):
            raise ValidationError("importance scores must be non-negative")


@dataclass(frozen=True)
class ClusterImportance:
    """Per-feature scores in (-1, 1); entries sum to 2 - R for R features."""

    cluster: int
    feature_names: tuple[str, ...]
    scores: np.ndarray


def baseline_gradient(graph: PatientGraph, params: GTParams, mlp: MLPModel,
                      patient: int, cluster: int) -> tuple[np.ndarray, float]:
    """d(softmax probability of `cluster`)/d(baseline inputs of `patient`).

    Differentiates through the MLP and both encoder attention layers,
    treating the graph edges as constants. Returns the gradient restricted
    to the patient's baseline columns and the probability itself.
    """
    mask = graph.adjacency_mask()
    h = graph.node_features
    caches = []
    for layer in params.layers[:2]:
        cache = _layer_forward(h, layer, mask, relu=True)
        caches.append(cache)
        h = _layer_output(cache)
    latent = h

    x_i = latent[patient]
    z1 = x_i @ mlp.w1 + mlp.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ mlp.w2 + mlp.b2
    z2s = z2 - z2.max()
    e = np.exp(z2s)
    p = e / e.sum()
    prob = float(p[cluster])

    # softmax jacobian row for the target class
    dz2 = p[cluster] * (np.eye(len(p))[cluster] - p)
    da1 = mlp.w2 @ dz2
    dz1 = da1 * (z1 > 0)
    d_latent_i = mlp.w1 @ dz1

    d_latent = np.zeros_like(latent)
    d_latent[patient] = d_latent_i
    d_h = d_latent
    for cache, layer in zip(reversed(caches), list(reversed(params.layers[:2]))):
        d_h, _ = _layer_backward(cache, layer, d_h)
    grad = d_h[patient, graph.layout.baseline_slice]
    return grad, prob


def patient_importance(graph: PatientGraph, params: GTParams, mlp: MLPModel,
                       patient: int, cluster: int,
                       patient_id: str) -> ImportanceVector:
    """ReLU(gradient x input) over the patient's baseline features."""
    if mlp is None or params is None:
        raise UntrainedPipeline("importance requires a trained encoder and classifier")
    grad, _ = baseline_gradient(graph, params, mlp, patient, cluster)
    values = graph.node_features[patient, graph.layout.baseline_slice]
    scores = np.maximum(grad * values, 0.0)
    return ImportanceVector(patient_id, cluster,
                            graph.layout.baseline_names, scores)


def cluster_importance(members: list[ImportanceVector],
                       cohort_size: int) -> ClusterImportance:
    """Aggregate member scores onto the (-1, 1) heatmap scale.

    Mean score per feature over members, divided by the cohort size,
    softmaxed across features, then mapped by 2*softmax - 1. The output
    sums to 2 - R exactly (R = feature count).
    """
    if not members:
        raise EmptyCluster("cannot aggregate importance over an empty cluster")
    names = members[0].feature_names
    cluster = members[0].cluster
    for m in members:
        if m.feature_names != names or m.cluster != cluster:
            raise ValidationError("member importance vectors disagree on layout")
    mean = np.mean([m.scores for m in members], axis=0) / cohort_size
    shifted = mean - mean.max()
    e = np.exp(shifted)
    softmax = e / e.sum()
    return ClusterImportance(cluster, names, 2.0 * softmax - 1.0)


@dataclass
class TrainedPipeline:
    """Everything importance queries need, grouped for the service layer."""

    graph: PatientGraph
    params: GTParams | None = None
    mlp: MLPModel | None = None
    latents: np.ndarray | None = None
    assignment: ClusterAssignment | None = None
    patient_ids: tuple[str, ...] = field(default_factory=tuple)

    def require_trained(self):
        if self.params is None or self.mlp is None or self.assignment is None:
            raise UntrainedPipeline(
                "train the autoencoder and classifier before querying importance")

    def importance_for(self, patient: int,
                       cluster: int | None = None) -> ImportanceVector:
        self.require_trained()
        assert self.assignment is not None and self.mlp is not None
        target = int(self.assignment.labels[patient]) if cluster is None else cluster
        pid = self.patient_ids[patient] if self.patient_ids else str(patient)
        return patient_importance(self.graph, self.params, self.mlp,
                                  patient, target, pid)

    def cluster_importance_for(self, cluster: int) -> ClusterImportance:
        self.require_trained()
        assert self.assignment is not None
        members = [self.importance_for(int(i), cluster)
                   for i in self.assignment.members(cluster)]
        if not members:
            raise EmptyCluster(f"cluster {cluster} has no members")
        return cluster_importance(members, self.graph.n)
