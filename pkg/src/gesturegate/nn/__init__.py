"""Tiny numpy 1D-CNN engine: layers, backprop, AdaDelta, early stopping, model files."""

from gesturegate.nn.builders import build_capacitive_model, build_inertial_model
from gesturegate.nn.layers import INFER, TRAIN, layer_backward, layer_forward
from gesturegate.nn.model import (
    ModelWeights,
    cross_entropy,
    init_weights,
    loss_and_grads,
    model_forward,
    predict_proba,
)
from gesturegate.nn.optim import AdaDelta, AdaDeltaConfig, AdaDeltaState, adadelta_step
from gesturegate.nn.serialize import deserialize, load_model, save_model, serialize
from gesturegate.nn.spec import LayerSpec, ModelSpec, count_parameters
from gesturegate.nn.train import CAPACITIVE_TRAIN, INERTIAL_TRAIN, EarlyStopping, TrainConfig, fit

__all__ = [
    "AdaDelta",
    "AdaDeltaConfig",
    "AdaDeltaState",
    "CAPACITIVE_TRAIN",
    "EarlyStopping",
    "INERTIAL_TRAIN",
    "INFER",
    "LayerSpec",
    "ModelSpec",
    "ModelWeights",
    "TRAIN",
    "TrainConfig",
    "adadelta_step",
    "build_capacitive_model",
    "build_inertial_model",
    "count_parameters",
    "cross_entropy",
    "deserialize",
    "fit",
    "init_weights",
    "layer_backward",
    "layer_forward",
    "load_model",
    "loss_and_grads",
    "model_forward",
    "predict_proba",
    "save_model",
    "serialize",
]
