"""Differentiable numeric core: liquid recurrent cell, dense stack, losses.

The recurrent stage is a liquid time-constant (LTC) cell advanced by a fused
single-step solver.  With gate f = sigmoid(W_in x + W_rec h + b), amplitude
vector A and per-neuron time constants tau, one step of size dt is

    h' = (h + dt * f * A) / (1 + dt * (1/tau + f))

elementwise; the denominator exceeds 1, so the state stays bounded whenever A
does.  The final hidden state feeds a dense stack whose last layer applies a
sigmoid, giving one top-M membership probability per port.  Gradients are
hand-written reverse mode through the unrolled recurrence; everything runs in
float64.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .._validation import check_int, check_positive

__all__ = [
    "ModelSpec",
    "param_layout",
    "init_weights",
    "ltc_step",
    "model_forward",
    "loss_value",
    "backward_gradients",
    "predict_top_indices",
]

# Probability clamp used by the cross-entropy loss.
_P_EPS = 1e-7
_F1_EPS = 1e-7

_ACTIVATIONS = ("tanh", "relu", "sigmoid")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of the LTC + dense port classifier.

    ``ltc_units = 0`` removes the recurrent stage; the model then consumes
    single-step sequences directly with the dense stack (the dense baseline).
    """

    input_dim: int
    ltc_units: int
    dense_layers: tuple = ()
    output_dim: int = 1
    activation: str = "tanh"
    dt: float = 1.0
    tau_init: float = 1.0

    def __post_init__(self):
        check_int("input_dim", self.input_dim, minimum=1)
        check_int("ltc_units", self.ltc_units, minimum=0)
        object.__setattr__(self, "dense_layers", tuple(int(w) for w in self.dense_layers))
        for w in self.dense_layers:
            check_int("dense width", w, minimum=1)
        check_int("output_dim", self.output_dim, minimum=1)
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}")
        check_positive("dt", self.dt)
        check_positive("tau_init", self.tau_init)


def param_layout(spec):
    """Canonical (name, shape) parameter order; serialization follows it."""
    layout = []
    d = spec.input_dim
    if spec.ltc_units > 0:
        h = spec.ltc_units
        layout += [
            ("ltc/w_in", (d, h)),
            ("ltc/w_rec", (h, h)),
            ("ltc/bias", (h,)),
            ("ltc/amp", (h,)),
            ("ltc/tau", (h,)),
        ]
        width = h
    else:
        width = d
    for i, out in enumerate(spec.dense_layers):
        layout += [(f"dense{i}/kernel", (width, out)), (f"dense{i}/bias", (out,))]
        width = out
    layout += [("out/kernel", (width, spec.output_dim)), ("out/bias", (spec.output_dim,))]
    return layout


def init_weights(spec, rng):
    """Glorot-uniform dense kernels, +-0.1 uniform LTC kernels, A = 1, biases 0."""
    weights = {}
    for name, shape in param_layout(spec):
        if name.endswith("/bias"):
            weights[name] = np.zeros(shape)
        elif name == "ltc/amp":
            weights[name] = np.ones(shape)
        elif name == "ltc/tau":
            weights[name] = np.full(shape, spec.tau_init)
        elif name.startswith("ltc/"):
            weights[name] = rng.uniform(-0.1, 0.1, size=shape)
        else:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            weights[name] = rng.uniform(-bound, bound, size=shape)
    return weights


def _activate(z, kind):
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return expit(z)


def _activate_grad(z, a, kind):
    if kind == "tanh":
        return 1.0 - a**2
    if kind == "relu":
        return (z > 0.0).astype(float)
    return a * (1.0 - a)


def ltc_step(h, x, weights, dt=None):
    """One fused-solver update of the liquid cell state.

    Accepts a single state (H,) with input (D,) or a batch (B, H)/(B, D).
    ``dt`` defaults to 1; dt = 0 returns ``h`` unchanged.
    """
    h = np.asarray(h, dtype=float)
    x = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(x))):
        raise ValueError("non-finite state or input")
    dt = 1.0 if dt is None else float(dt)
    f = expit(x @ weights["ltc/w_in"] + h @ weights["ltc/w_rec"] + weights["ltc/bias"])
    num = h + dt * f * weights["ltc/amp"]
    den = 1.0 + dt * (1.0 / weights["ltc/tau"] + f)
    return num / den


def _forward(spec, weights, x):
    """Forward pass with cached intermediates for the backward pass."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[2] != spec.input_dim:
        raise ValueError(f"expected (B, T, {spec.input_dim}) input, got shape {x.shape}")
    cache = {"x": x}
    if spec.ltc_units > 0:
        batch, seq_len, _ = x.shape
        states = np.zeros((seq_len + 1, batch, spec.ltc_units))
        gates = np.empty((seq_len, batch, spec.ltc_units))
        dens = np.empty((seq_len, batch, spec.ltc_units))
        h = states[0]
        for t in range(seq_len):
            f = expit(
                x[:, t] @ weights["ltc/w_in"]
                + h @ weights["ltc/w_rec"]
                + weights["ltc/bias"]
            )
            num = h + spec.dt * f * weights["ltc/amp"]
            den = 1.0 + spec.dt * (1.0 / weights["ltc/tau"] + f)
            h = num / den
            states[t + 1] = h
            gates[t] = f
            dens[t] = den
        cache.update(states=states, gates=gates, dens=dens)
        a = h
    else:
        if x.shape[1] != 1:
            raise ValueError("dense baseline (ltc_units = 0) expects single-step sequences")
        a = x[:, 0, :]

    acts = [a]
    zs = []
    for i in range(len(spec.dense_layers)):
        z = a @ weights[f"dense{i}/kernel"] + weights[f"dense{i}/bias"]
        a = _activate(z, spec.activation)
        zs.append(z)
        acts.append(a)
    z_out = a @ weights["out/kernel"] + weights["out/bias"]
    probs = expit(z_out)
    cache.update(acts=acts, zs=zs, probs=probs)
    return probs, cache


def model_forward(spec, weights, x):
    """Port membership probabilities, shape (B, N); all values in (0, 1)."""
    probs, _ = _forward(spec, weights, x)
    return probs


def loss_value(probs, labels, kind):
    """Mean binary cross-entropy or soft-F1 loss over a batch."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probs.shape != labels.shape:
        raise ValueError(f"shape mismatch {probs.shape} vs {labels.shape}")
    if kind == "bce":
        p = np.clip(probs, _P_EPS, 1.0 - _P_EPS)
        return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log1p(-p)))
    if kind == "soft_f1":
        overlap = float(np.sum(probs * labels))
        total = float(np.sum(probs) + np.sum(labels)) + _F1_EPS
        return float(1.0 - 2.0 * overlap / total)
    raise ValueError(f"unknown loss kind {kind!r}")


def _loss_grad_wrt_probs(probs, labels, kind):
    if kind == "bce":
        inside = (probs > _P_EPS) & (probs < 1.0 - _P_EPS)
        p = np.clip(probs, _P_EPS, 1.0 - _P_EPS)
        grad = (-labels / p + (1.0 - labels) / (1.0 - p)) / probs.size
        return np.where(inside, grad, 0.0)
    overlap = np.sum(probs * labels)
    total = np.sum(probs) + np.sum(labels) + _F1_EPS
    return 2.0 * (overlap - labels * total) / total**2


def backward_gradients(spec, weights, x, labels, kind="bce"):
    """Loss and exact analytic gradients of the mean loss for every parameter."""
    labels = np.asarray(labels, dtype=float)
    probs, cache = _forward(spec, weights, x)
    if not np.all(np.isfinite(probs)):
        raise FloatingPointError("non-finite activations in forward pass")
    loss = loss_value(probs, labels, kind)

    grads = {name: np.zeros_like(weights[name]) for name, _ in param_layout(spec)}
    d_probs = _loss_grad_wrt_probs(probs, labels, kind)
    dz = d_probs * probs * (1.0 - probs)

    acts, zs = cache["acts"], cache["zs"]
    grads["out/kernel"] = acts[-1].T @ dz
    grads["out/bias"] = dz.sum(axis=0)
    da = dz @ weights["out/kernel"].T
    for i in reversed(range(len(spec.dense_layers))):
        dz = da * _activate_grad(zs[i], acts[i + 1], spec.activation)
        grads[f"dense{i}/kernel"] = acts[i].T @ dz
        grads[f"dense{i}/bias"] = dz.sum(axis=0)
        da = dz @ weights[f"dense{i}/kernel"].T

    if spec.ltc_units > 0:
        xs = cache["x"]
        states, gates, dens = cache["states"], cache["gates"], cache["dens"]
        amp, tau = weights["ltc/amp"], weights["ltc/tau"]
        dt = spec.dt
        dh = da
        for t in reversed(range(xs.shape[1])):
            f, den = gates[t], dens[t]
            h_prev, h_new = states[t], states[t + 1]
            d_num = dh / den
            d_den = -dh * h_new / den
            df = d_num * dt * amp + d_den * dt
            grads["ltc/amp"] += (d_num * dt * f).sum(axis=0)
            grads["ltc/tau"] += (d_den * (-dt / tau**2)).sum(axis=0)
            ds = df * f * (1.0 - f)
            grads["ltc/w_in"] += xs[:, t].T @ ds
            grads["ltc/w_rec"] += h_prev.T @ ds
            grads["ltc/bias"] += ds.sum(axis=0)
            dh = d_num + ds @ weights["ltc/w_rec"].T
    return loss, grads


def predict_top_indices(spec, weights, x, m_labels):
    """Indices of the ``m_labels`` most probable ports, descending, per sample."""
    probs = model_forward(spec, weights, x)
    order = np.argsort(-probs, axis=-1, kind="stable")
    return order[..., :m_labels]
