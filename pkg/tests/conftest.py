import numpy as np
import pytest

from trialflow.synth import SynthConfig, SynthResult, generate
from trialflow.patient_graph import graph_from_cohort
from trialflow.training import TrainConfig, train_autoencoder


@pytest.fixture(scope="session")
def mixture_result() -> SynthResult:
    """The default 147-patient, four-archetype cohort (seed 7)."""
    return generate(SynthConfig(n_patients=147, seed=7))


@pytest.fixture(scope="session")
def small_result() -> SynthResult:
    return generate(SynthConfig(n_patients=40, seed=7))


@pytest.fixture(scope="session")
def small_trained(small_result):
    """Graph plus a briefly trained autoencoder over the 40-patient cohort.

    60 epochs is plenty for the importance and service tests, which only
    need a usable latent space, not a converged one.
    """
    graph = graph_from_cohort(small_result.cohort, k=5)
    state = train_autoencoder(graph, TrainConfig(epochs=60), seed=7)
    return graph, state


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
