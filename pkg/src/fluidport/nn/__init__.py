from .classifier import LiquidPortClassifier, PortPredictor
from .core import (
    ModelSpec,
    backward_gradients,
    init_weights,
    loss_value,
    ltc_step,
    model_forward,
    param_layout,
    predict_top_indices,
)
from .io import load_model, load_predictor, save_model
from .optim import AdamConfig, AdamState, adam_update
from .train import TrainConfig, train

__all__ = [
    "LiquidPortClassifier",
    "PortPredictor",
    "ModelSpec",
    "TrainConfig",
    "AdamConfig",
    "AdamState",
    "adam_update",
    "backward_gradients",
    "init_weights",
    "loss_value",
    "ltc_step",
    "model_forward",
    "param_layout",
    "predict_top_indices",
    "train",
    "save_model",
    "load_model",
    "load_predictor",
]
