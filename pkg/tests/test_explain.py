import numpy as np
import pytest

from trialflow.autoencoder import latent_embed
from trialflow.clustering import ClusterAssignment, Method, kmeans
from trialflow.errors import EmptyCluster, UntrainedPipeline, ValidationError
from trialflow.explain import (
    ImportanceVector,
    MLPConfig,
    TrainedPipeline,
    baseline_gradient,
    cluster_importance,
    patient_importance,
    train_mlp,
)
from trialflow.patient_graph import PatientGraph


def iv(scores, cluster=0, pid="p", names=None):
    scores = np.asarray(scores, dtype=float)
    names = names or tuple(f"f{i}" for i in range(len(scores)))
    return ImportanceVector(pid, cluster, tuple(names), scores)


# ---- classifier ----------------------------------------------------------

def separable_data(n_per=20, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(loc=(-4, 0), scale=0.3, size=(n_per, 2))
    b = rng.normal(loc=(4, 0), scale=0.3, size=(n_per, 2))
    c = rng.normal(loc=(0, 6), scale=0.3, size=(n_per, 2))
    x = np.vstack([a, b, c])
    labels = np.repeat([0, 1, 2], n_per)
    assignment = ClusterAssignment(Method.GRAPH_AI, 3, labels, ("A", "B", "C"))
    return x, assignment


def test_mlp_reaches_full_accuracy_on_separable_clusters():
    x, assignment = separable_data()
    mlp = train_mlp(x, assignment, seed=1)
    assert mlp.train_accuracy == 1.0
    assert np.array_equal(mlp.predict(x), assignment.labels)


def test_mlp_probabilities_are_a_distribution():
    x, assignment = separable_data()
    mlp = train_mlp(x, assignment, MLPConfig(epochs=50), seed=1)
    p = mlp.probabilities(x)
    assert p.shape == (60, 3)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_mlp_deterministic_per_seed():
    x, assignment = separable_data()
    a = train_mlp(x, assignment, MLPConfig(epochs=40), seed=3)
    b = train_mlp(x, assignment, MLPConfig(epochs=40), seed=3)
    np.testing.assert_array_equal(a.w1, b.w1)
    np.testing.assert_array_equal(a.w2, b.w2)


def test_mlp_rejects_mismatched_rows():
    x, assignment = separable_data()
    with pytest.raises(ValidationError):
        train_mlp(x[:10], assignment)


# ---- patient-level scores -------------------------------------------------

@pytest.fixture(scope="module")
def trained(small_trained):
    graph, state = small_trained
    latents = latent_embed(graph, state.params)
    assignment = kmeans(latents, 3, seed=7)
    mlp = train_mlp(latents, assignment, seed=7)
    return graph, state.params, mlp, assignment


def test_baseline_gradient_matches_finite_differences(trained):
    graph, params, mlp, assignment = trained
    patient = 3
    cluster = int(assignment.labels[patient])
    grad, prob = baseline_gradient(graph, params, mlp, patient, cluster)
    assert 0.0 < prob < 1.0
    assert grad.shape == (graph.layout.n_baseline,)

    def prob_with(col, delta):
        shifted = graph.node_features.copy()
        shifted[patient, col] += delta
        probe = PatientGraph(graph.n, graph.neighbors, shifted, graph.layout)
        z = latent_embed(probe, params)
        return mlp.probabilities(z[[patient]])[0, cluster]

    eps = 1e-6
    worst = 0.0
    for col in range(graph.layout.n_baseline):
        fd = (prob_with(col, eps) - prob_with(col, -eps)) / (2 * eps)
        denom = max(abs(fd), abs(grad[col]), 1e-10)
        worst = max(worst, abs(fd - grad[col]) / denom)
    assert worst < 1e-4, f"worst relative error {worst}"


def test_patient_scores_non_negative(trained):
    graph, params, mlp, assignment = trained
    for patient in range(graph.n):
        vec = patient_importance(graph, params, mlp, patient,
                                 int(assignment.labels[patient]), f"p{patient}")
        assert np.all(vec.scores >= 0.0)


def test_zero_valued_feature_scores_zero(trained):
    graph, params, mlp, assignment = trained
    # one-hot columns that are 0 for the patient must get score 0
    patient = 0
    vec = patient_importance(graph, params, mlp, patient, 0, "p0")
    values = graph.node_features[patient, graph.layout.baseline_slice]
    zero_cols = np.flatnonzero(values == 0.0)
    assert zero_cols.size  # the one-hot encoding guarantees some
    assert np.all(vec.scores[zero_cols] == 0.0)


def test_importance_vector_rejects_negative_scores():
    with pytest.raises(ValidationError):
        iv([-0.5, 1.0])


def test_importance_requires_models(trained):
    graph, params, mlp, _ = trained
    with pytest.raises(UntrainedPipeline):
        patient_importance(graph, None, None, 0, 0, "p0")


# ---- cluster-level aggregation ----------------------------------------------

def test_cluster_importance_sum_identity():
    members = [iv([3.0, 1.0, 0.0, 2.0]), iv([1.0, 1.0, 4.0, 0.0])]
    agg = cluster_importance(members, cohort_size=10)
    r = 4
    assert agg.scores.shape == (r,)
    assert abs(agg.scores.sum() - (2.0 - r)) < 1e-9
    assert np.all(agg.scores > -1.0) and np.all(agg.scores < 1.0)


def test_uniform_scores_give_uniform_heatmap():
    members = [iv([2.0, 2.0, 2.0])]
    agg = cluster_importance(members, cohort_size=5)
    np.testing.assert_allclose(agg.scores, 2.0 / 3 - 1.0, atol=1e-12)


def test_shift_invariance():
    members = [iv([1.0, 3.0, 0.5])]
    shifted = [iv([101.0, 103.0, 100.5])]
    a = cluster_importance(members, cohort_size=1)
    b = cluster_importance(shifted, cohort_size=1)
    np.testing.assert_allclose(a.scores, b.scores, atol=1e-12)


def test_dominant_feature_saturates():
    members = [iv([500.0, 0.0, 0.0])]
    agg = cluster_importance(members, cohort_size=1)
    assert agg.scores[0] > 0.99
    assert agg.scores[1] < -0.99 and agg.scores[2] < -0.99
    assert np.argmax(agg.scores) == 0


def test_empty_cluster_rejected():
    with pytest.raises(EmptyCluster):
        cluster_importance([], cohort_size=5)


def test_mismatched_layouts_rejected():
    with pytest.raises(ValidationError):
        cluster_importance([iv([1.0, 2.0]), iv([1.0, 2.0], names=("x", "y"))],
                           cohort_size=2)


# ---- pipeline wrapper ---------------------------------------------------------

def test_pipeline_guards_untrained(trained):
    graph, *_ = trained
    pipeline = TrainedPipeline(graph)
    with pytest.raises(UntrainedPipeline):
        pipeline.importance_for(0)
    with pytest.raises(UntrainedPipeline):
        pipeline.cluster_importance_for(0)


def test_pipeline_cluster_aggregate(trained):
    graph, params, mlp, assignment = trained
    latents = latent_embed(graph, params)
    pipeline = TrainedPipeline(graph, params, mlp, latents, assignment,
                               tuple(f"p{i}" for i in range(graph.n)))
    vec = pipeline.importance_for(0)
    assert vec.patient_id == "p0"
    agg = pipeline.cluster_importance_for(int(assignment.labels[0]))
    r = graph.layout.n_baseline
    assert abs(agg.scores.sum() - (2 - r)) < 1e-9
    assert agg.feature_names == graph.layout.baseline_names
