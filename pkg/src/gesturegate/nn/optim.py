"""AdaDelta with a step-scale multiplier (Keras-style ``learning_rate``)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdaDeltaConfig:
    step_scale: float = 0.9
    rho: float = 0.95
    eps: float = 1e-7


@dataclass
class AdaDeltaState:
    sq_grad: np.ndarray  # running E[g^2]
    sq_delta: np.ndarray  # running E[delta^2]

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdaDeltaState":
        return cls(np.zeros_like(param), np.zeros_like(param))


def adadelta_step(state: AdaDeltaState, param: np.ndarray, grad: np.ndarray, cfg: AdaDeltaConfig = AdaDeltaConfig()):
    """One AdaDelta update. Returns ``(new_param, new_state)``; inputs are not modified."""
    if not (state.sq_grad.shape == state.sq_delta.shape == np.shape(param) == np.shape(grad)):
        raise ValueError("AdaDelta state, parameter and gradient shapes differ")
    rho, eps = cfg.rho, cfg.eps
    sq_grad = rho * state.sq_grad + (1 - rho) * grad * grad
    delta = -np.sqrt(state.sq_delta + eps) / np.sqrt(sq_grad + eps) * grad
    sq_delta = rho * state.sq_delta + (1 - rho) * delta * delta
    new_param = param + cfg.step_scale * delta
    dtype = np.result_type(param)
    return new_param.astype(dtype, copy=False), AdaDeltaState(
        sq_grad.astype(dtype, copy=False), sq_delta.astype(dtype, copy=False)
    )


class AdaDelta:
    """Keeps per-parameter accumulators keyed by (layer, name); updates in place."""

    def __init__(self, cfg: AdaDeltaConfig = AdaDeltaConfig()):
        self.cfg = cfg
        self.state: dict[tuple[int, str], AdaDeltaState] = {}

    def step(self, spec, weights, grads) -> None:
        for i, name, param in weights.trainable(spec):
            key = (i, name)
            if key not in self.state:
                self.state[key] = AdaDeltaState.zeros_like(param)
            new, self.state[key] = adadelta_step(self.state[key], param, grads[i][name], self.cfg)
            weights.blocks[i][name] = new
