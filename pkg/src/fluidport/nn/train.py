"""Deterministic mini-batch training loop with early stopping."""

import copy
from dataclasses import dataclass

import numpy as np

from .._validation import check_int, check_positive, rng_from
from .core import backward_gradients, init_weights, loss_value, model_forward
from .optim import AdamConfig, AdamState, adam_update

__all__ = ["TrainConfig", "train"]

# Time constants are projected back to this floor after each step so the
# fused-solver denominator stays positive.
_TAU_FLOOR = 1e-3

LOSS_KINDS = ("bce", "soft_f1")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 64
    loss: str = "bce"
    patience: int = 8
    seed: int = 0

    def __post_init__(self):
        check_positive("learning_rate", self.learning_rate)
        check_int("epochs", self.epochs, minimum=1)
        check_int("batch_size", self.batch_size, minimum=1)
        check_int("patience", self.patience, minimum=1)
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}")


def train(spec, train_xy, val_xy, config, weights=None):
    """Train on mini-batches; return the best-validation weights and history.

    Early stopping monitors validation loss with the configured patience.  A
    non-finite batch loss aborts the run and the last finite checkpoint (the
    best validation snapshot) is returned with ``history["diverged"]`` set.
    """
    x_train = np.asarray(train_xy[0], dtype=float)
    y_train = np.asarray(train_xy[1], dtype=float)
    x_val = np.asarray(val_xy[0], dtype=float)
    y_val = np.asarray(val_xy[1], dtype=float)

    rng = rng_from(config.seed, 0)
    if weights is None:
        weights = init_weights(spec, rng)
    adam = AdamConfig(learning_rate=config.learning_rate)
    state = AdamState()

    best = copy.deepcopy(weights)
    best_loss = loss_value(model_forward(spec, weights, x_val), y_val, config.loss)
    history = {
        "train_loss": [],
        "val_loss": [],
        "best_epoch": -1,
        "best_val_loss": best_loss,
        "diverged": False,
    }
    stall = 0
    for epoch in range(config.epochs):
        order = rng.permutation(x_train.shape[0])
        epoch_loss = 0.0
        for start in range(0, order.size, config.batch_size):
            idx = order[start : start + config.batch_size]
            try:
                loss, grads = backward_gradients(
                    spec, weights, x_train[idx], y_train[idx], config.loss
                )
            except FloatingPointError:
                history["diverged"] = True
                return best, history
            if not np.isfinite(loss):
                history["diverged"] = True
                return best, history
            adam_update(weights, grads, state, adam)
            if "ltc/tau" in weights:
                np.maximum(weights["ltc/tau"], _TAU_FLOOR, out=weights["ltc/tau"])
            epoch_loss += loss * idx.size
        val_loss = loss_value(model_forward(spec, weights, x_val), y_val, config.loss)
        if not np.isfinite(val_loss):
            history["diverged"] = True
            return best, history
        history["train_loss"].append(epoch_loss / order.size)
        history["val_loss"].append(val_loss)
        if val_loss < best_loss:
            best_loss = val_loss
            best = copy.deepcopy(weights)
            history["best_epoch"] = epoch
            history["best_val_loss"] = best_loss
            stall = 0
        else:
            stall += 1
            if stall > config.patience:
                break
    return best, history
