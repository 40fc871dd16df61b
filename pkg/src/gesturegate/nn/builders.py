"""The two gesture models: a small inertial null/gesture net and a 9-class capacitive net."""

from __future__ import annotations

import logging
import math

from gesturegate.nn.spec import (
    ModelSpec,
    batch_norm,
    channel_norm,
    conv1d,
    count_parameters,
    dense,
    dropout,
    flatten,
    max_pool1d,
    param_shapes,
    relu,
    softmax,
)
from gesturegate.stream import WINDOW_LEN

log = logging.getLogger(__name__)

# trainable-parameter figures reported for the original deployed models
REFERENCE_INERTIAL_PARAMS = 2882
REFERENCE_CAPACITIVE_PARAMS = 49890


def _conv_block(filters, kernel_size, rate, normalize_first=False):
    layers = [conv1d(filters, kernel_size, "same")]
    if normalize_first:
        layers.append(channel_norm())
    # 'same' pooling keeps a partial trailing window so a 4-long map pools to 1
    layers += [batch_norm(), relu(), max_pool1d(5, 5, "same"), dropout(rate)]
    return layers


def build_inertial_model(window_len: int = WINDOW_LEN) -> ModelSpec:
    layers = []
    for _ in range(3):
        layers += _conv_block(10, 10, 0.5)
    layers += [flatten(), dense(10), dense(2), softmax()]
    spec = ModelSpec((3, window_len), tuple(layers), "inertial")
    log.info("inertial model: %d trainable parameters (reference %d)", count_parameters(spec), REFERENCE_INERTIAL_PARAMS)
    return spec


def build_capacitive_model(window_len: int = WINDOW_LEN) -> ModelSpec:
    layers = _conv_block(40, 10, 0.3, normalize_first=True) + _conv_block(40, 10, 0.3)
    layers += [flatten(), dense(100), dense(9), softmax()]
    spec = ModelSpec((4, window_len), tuple(layers), "capacitive")
    log.info(
        "capacitive model: %d trainable parameters, %d of them in the per-channel normalization (reference %d)",
        count_parameters(spec), norm_parameters(spec), REFERENCE_CAPACITIVE_PARAMS,
    )
    return spec


def norm_parameters(spec: ModelSpec) -> int:
    """Trainable parameters held by ChannelNorm layers."""
    return sum(sum(math.prod(s) for s in shapes.values())
               for layer, shapes in zip(spec.layers, param_shapes(spec)) if layer.kind == "ChannelNorm")
