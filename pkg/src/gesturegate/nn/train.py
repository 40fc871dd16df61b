"""Mini-batch training with AdaDelta and accuracy-monitored early stopping."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from gesturegate.errors import DataError
from gesturegate.nn.layers import TRAIN
from gesturegate.nn.model import ModelWeights, apply_stats, cross_entropy, init_weights, loss_and_grads, predict_proba
from gesturegate.nn.optim import AdaDelta, AdaDeltaConfig
from gesturegate.nn.spec import ModelSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    patience: int = 30
    restore_best: bool = True
    optimizer: AdaDeltaConfig = field(default_factory=AdaDeltaConfig)
    batch_size: int = 32

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience > self.max_epochs:
            raise ValueError(f"patience {self.patience} exceeds max_epochs {self.max_epochs}")


INERTIAL_TRAIN = TrainConfig(max_epochs=100)
CAPACITIVE_TRAIN = TrainConfig(max_epochs=200)


class EarlyStopping:
    """Track the best monitored value; signal a stop after ``patience`` flat epochs.

    Epochs are numbered from 1. A value only counts as an improvement when it
    is strictly greater than the best so far.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = 0

    def update(self, epoch: int, value: float) -> bool:
        if value > self.best:
            self.best, self.best_epoch = value, epoch
            return False
        return epoch - self.best_epoch >= self.patience


def accuracy(probs: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(probs.argmax(axis=1) == y)) if len(y) else 0.0


def evaluate_model(spec: ModelSpec, w: ModelWeights, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(mean loss, accuracy) in inference mode."""
    probs = predict_proba(spec, w, x)
    return float(np.mean(cross_entropy(probs, y))), accuracy(probs, y)


def fit(
    spec: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig = TrainConfig(),
    validation: tuple[np.ndarray, np.ndarray] | None = None,
    seed: int = 0,
    weights: ModelWeights | None = None,
) -> tuple[ModelWeights, list[dict]]:
    """Train from a fresh seeded init (or ``weights``). Returns ``(weights, history)``.

    Validation accuracy is the monitored quantity; without a validation set
    training accuracy is monitored instead.
    """
    x = np.asarray(x, dtype=np.float32)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0:
        raise DataError("cannot fit on an empty dataset")
    if len(np.unique(y)) < 2:
        warnings.warn(f"{spec.name}: training set holds a single class {np.unique(y)}", stacklevel=2)

    rng = np.random.default_rng(seed)
    w = weights.copy() if weights is not None else init_weights(spec, seed=seed)
    opt = AdaDelta(cfg.optimizer)
    stopper = EarlyStopping(cfg.patience)
    best = w.copy()
    history = []

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(x))
        losses = []
        correct = 0
        for start in range(0, len(x), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads, probs, stats = loss_and_grads(spec, w, x[idx], y[idx], rng=rng, mode=TRAIN)
            opt.step(spec, w, grads)
            apply_stats(w, stats)
            losses.append(loss * len(idx))
            correct += int(np.sum(probs.argmax(axis=1) == y[idx]))
        record = {"epoch": epoch, "loss": sum(losses) / len(x), "accuracy": correct / len(x)}
        if validation is not None and len(validation[0]):
            record["val_loss"], record["val_accuracy"] = evaluate_model(spec, w, *validation)
            monitored = record["val_accuracy"]
        else:
            monitored = record["accuracy"]
        history.append(record)

        improved = monitored > stopper.best
        stop = stopper.update(epoch, monitored)
        if improved:
            best = w.copy()
        if stop:
            log.info("%s: early stop at epoch %d (best %.4f at %d)", spec.name, epoch, stopper.best, stopper.best_epoch)
            break

    return (best if cfg.restore_best else w), history
