"""Seeded training loop for the autoencoder.

One generator seeds everything in a fixed draw order (init, split,
per-epoch batch shuffles), so a (graph, config, seed) triple fully
determines the loss history and final parameters, bit for bit.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autoencoder import (
    HIDDEN_DIM,
    LATENT_DIM,
    GTParams,
    glorot_init,
    gt_loss_and_grads,
    load_params,
    reconstruction_mse,
    save_params,
)
from .errors import DivergenceError, NonFiniteError, ValidationError
from .optim import Adam
from .patient_graph import PatientGraph


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 512
    lr: float = 1e-5
    hidden: int = HIDDEN_DIM
    latent: int = LATENT_DIM
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)  # train, test, val

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0:
            raise ValidationError("epochs, batch size, and lr must be non-negative")
        if abs(sum(self.split) - 1.0) > 1e-9 or any(s < 0 for s in self.split):
            raise ValidationError(f"split fractions must sum to 1, got {self.split}")


@dataclass(frozen=True)
class SplitMasks:
    train: np.ndarray
    test: np.ndarray
    val: np.ndarray


@dataclass
class TrainState:
    params: GTParams
    optimizer: Adam
    seed: int
    masks: SplitMasks
    history: list[tuple[int, float, float]] = field(default_factory=list)
    # history rows: (epoch, train_mse, val_mse); epoch 0 is pre-training


def split_nodes(n: int, rng: np.random.Generator,
                fractions: tuple[float, float, float]) -> SplitMasks:
    """Shuffled node split; train gets the rounded first share, test next,
    validation the remainder."""
    perm = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_test = int(round(fractions[1] * n))
    n_train = min(n_train, n)
    n_test = min(n_test, n - n_train)
    train = np.sort(perm[:n_train])
    test = np.sort(perm[n_train:n_train + n_test])
    val = np.sort(perm[n_train + n_test:])
    if train.size == 0:
        raise ValidationError("training split is empty")
    return SplitMasks(train, test, val)


def train_autoencoder(graph: PatientGraph, config: TrainConfig,
                      seed: int) -> TrainState:
    """Minibatch Adam training of the reconstruction objective.

    Message passing always runs over the full graph; only the loss is
    masked to the batch. With cohort sizes below the batch size this is
    full-batch training. Raises Divergence (with the epoch) if the loss
    leaves the finite range.
    """
    rng = np.random.default_rng(seed)
    params = glorot_init(graph.node_features.shape[1], rng,
                         config.hidden, config.latent)
    masks = split_nodes(graph.n, rng, config.split)
    optimizer = Adam(lr=config.lr)
    state = TrainState(params, optimizer, seed, masks)

    val_nodes = masks.val if masks.val.size else masks.train
    state.history.append((0,
                          reconstruction_mse(graph, params, masks.train),
                          reconstruction_mse(graph, params, val_nodes)))

    train_nodes = masks.train.copy()
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(train_nodes)
        for lo in range(0, train_nodes.size, config.batch_size):
            batch = train_nodes[lo:lo + config.batch_size]
            try:
                mse, grads = gt_loss_and_grads(graph, state.params, batch)
            except NonFiniteError as e:
                raise DivergenceError(str(e), epoch=epoch) from e
            if not np.isfinite(mse):
                raise DivergenceError("training loss left the finite range",
                                      epoch=epoch)
            new_arrays = optimizer.step(state.params.arrays(), grads.arrays())
            state.params = state.params.replace_arrays(new_arrays)
        try:
            train_mse = reconstruction_mse(graph, state.params, masks.train)
            val_mse = reconstruction_mse(graph, state.params, val_nodes)
        except NonFiniteError as e:
            raise DivergenceError(str(e), epoch=epoch) from e
        if not (np.isfinite(train_mse) and np.isfinite(val_mse)):
            raise DivergenceError("epoch loss left the finite range", epoch=epoch)
        state.history.append((epoch, train_mse, val_mse))
    return state


def write_history_csv(history: list[tuple[int, float, float]],
                      path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "val_mse"])
        for epoch, train_mse, val_mse in history:
            writer.writerow([epoch, repr(train_mse), repr(val_mse)])


def save_checkpoint(state: TrainState, path: str | Path, *,
                    knn_k: int, config: TrainConfig) -> None:
    meta = {
        "seed": state.seed,
        "knn_k": knn_k,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "lr": config.lr,
        "hidden": config.hidden,
        "latent": config.latent,
        "final_train_mse": state.history[-1][1] if state.history else None,
    }
    save_params(path, state.params, meta)


def load_checkpoint(path: str | Path) -> tuple[GTParams, dict]:
    return load_params(path)
