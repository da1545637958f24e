"""Bias-corrected Adam on named parameter dictionaries."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamConfig", "AdamState", "adam_update"]


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_update(weights, grads, state, config):
    """One Adam step; mutates ``weights`` and ``state`` in place and returns them."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bias1 = 1.0 - b1**state.t
    bias2 = 1.0 - b2**state.t
    for name, g in grads.items():
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g**2 - v)
        weights[name] -= config.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + config.eps)
    return weights, state
