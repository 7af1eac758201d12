"""Two-output MLP surrogate with a trainable degradation-rate scalar.

The network maps normalized time tau = t/input_scale through sigmoid hidden
layers to two affine outputs, de-normalized to a voltage and a membrane
thickness. All quantities seen by the optimizer are O(1): raw scales
(8e5 hours, 0.0175 cm) would make the problem badly conditioned.

A single extra trainable scalar ``k5_hat`` (the normalized attack-rate
constant, physical value k5_hat * 1e3 m3/(mol s)) lives alongside the
weights so one optimizer updates everything jointly.

The forward pass is written generically: weights may be numpy arrays or
:class:`~pempinn.autodiff.Value` nodes, and the input may be a float, an
array of times, a :class:`~pempinn.autodiff.Dual` (for time derivatives), or
a Value. The same code therefore serves plain prediction, finite-difference
oracles, and the differentiable training path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import BackwardError, Dual, Value, sigmoid
from .errors import ConfigError

__all__ = [
    "LAYER_SIZES",
    "NetworkParameters",
    "LiftedParameters",
    "init_parameters",
    "mlp_forward",
    "predict",
    "predict_with_time_derivative",
    "gradient",
    "flatten",
    "unflatten",
    "save_checkpoint",
    "load_checkpoint",
]

LAYER_SIZES = (1, 10, 5, 2)

DEFAULT_V_REF = 2.0

CHECKPOINT_FORMAT = "pempinn-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkParameters:
    """Weights, biases, the trainable k5_hat, and the normalization scales."""

    weights: tuple          # per layer, shape (fan_out, fan_in)
    biases: tuple           # per layer, shape (fan_out,)
    k5_hat: float
    input_scale: float      # hours
    v_ref: float            # volts
    t_mem_ref: float        # cm

    @property
    def layer_sizes(self):
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases)) + 1


def init_parameters(
    seed: int,
    input_scale: float,
    t_mem_ref: float,
    v_ref: float = DEFAULT_V_REF,
    layer_sizes=LAYER_SIZES,
) -> NetworkParameters:
    """Glorot-uniform weights, zero biases, and k5_hat = 0 (no prior).

    Deterministic per seed.
    """
    if input_scale <= 0.0 or t_mem_ref <= 0.0 or v_ref <= 0.0:
        raise ConfigError("scales", "normalization scales must be positive")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        w.setflags(write=False)
        b.setflags(write=False)
        weights.append(w)
        biases.append(b)
    return NetworkParameters(
        weights=tuple(weights),
        biases=tuple(biases),
        k5_hat=0.0,
        input_scale=float(input_scale),
        v_ref=float(v_ref),
        t_mem_ref=float(t_mem_ref),
    )


def mlp_forward(weights, biases, x):
    """Generic forward pass; sigmoid hidden layers, affine output layer."""
    acts = [x]
    last = len(weights) - 1
    for layer in range(len(weights)):
        w = weights[layer]
        b = biases[layer]
        nxt = []
        for j in range(len(w)):
            s = b[j]
            row = w[j]
            for k in range(len(row)):
                s = s + row[k] * acts[k]
            if layer < last:
                s = sigmoid(s)
            nxt.append(s)
        acts = nxt
    return acts


def predict(params: NetworkParameters, t):
    """Network outputs in physical units: (voltage V, thickness cm)."""
    tau = t / params.input_scale
    y = mlp_forward(params.weights, params.biases, tau)
    return params.v_ref * y[0], params.t_mem_ref * y[1]


def predict_with_time_derivative(params: NetworkParameters, t):
    """Outputs and their time derivatives, ((V, t_mem), (dV/dt, dt_mem/dt)).

    The derivative is exact: a dual number seeded with d(tau)/dt =
    1/input_scale is pushed through the forward pass.
    """
    tau = Dual(t / params.input_scale, 1.0 / params.input_scale)
    y = mlp_forward(params.weights, params.biases, tau)
    v = params.v_ref * y[0]
    m = params.t_mem_ref * y[1]
    return (v.primal, m.primal), (v.tangent, m.tangent)


class LiftedParameters:
    """NetworkParameters re-expressed as autodiff leaves, in flatten() order."""

    def __init__(self, params: NetworkParameters):
        self.source = params
        self.input_scale = params.input_scale
        self.v_ref = params.v_ref
        self.t_mem_ref = params.t_mem_ref
        self._flat = []
        self.weights = []
        self.biases = []
        for w, b in zip(params.weights, params.biases):
            w_rows = []
            for row in w:
                vals = [Value(float(x)) for x in row]
                self._flat.extend(vals)
                w_rows.append(vals)
            b_vals = [Value(float(x)) for x in b]
            self._flat.extend(b_vals)
            self.weights.append(w_rows)
            self.biases.append(b_vals)
        self.k5_hat = Value(float(params.k5_hat))
        self._flat.append(self.k5_hat)

    def gradients(self) -> np.ndarray:
        return np.array([float(v.grad) for v in self._flat])

    def forward(self, x):
        return mlp_forward(self.weights, self.biases, x)


def flatten(params: NetworkParameters) -> np.ndarray:
    """Parameter vector in canonical order (W1, b1, W2, b2, ..., k5_hat)."""
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(np.asarray(w).ravel())
        parts.append(np.asarray(b))
    parts.append(np.array([params.k5_hat]))
    return np.concatenate(parts)


def unflatten(vec: np.ndarray, template: NetworkParameters) -> NetworkParameters:
    """Inverse of :func:`flatten`, reusing the template's shapes and scales."""
    if vec.size != template.n_parameters:
        raise ValueError(
            f"expected {template.n_parameters} parameters, got {vec.size}"
        )
    weights = []
    biases = []
    pos = 0
    for w, b in zip(template.weights, template.biases):
        nw = vec[pos : pos + w.size].reshape(w.shape).copy()
        pos += w.size
        nb = vec[pos : pos + b.size].copy()
        pos += b.size
        nw.setflags(write=False)
        nb.setflags(write=False)
        weights.append(nw)
        biases.append(nb)
    return NetworkParameters(
        weights=tuple(weights),
        biases=tuple(biases),
        k5_hat=float(vec[pos]),
        input_scale=template.input_scale,
        v_ref=template.v_ref,
        t_mem_ref=template.t_mem_ref,
    )


def gradient(params: NetworkParameters, loss_builder) -> np.ndarray:
    """Reverse-mode gradient of a scalar loss over all parameters.

    ``loss_builder(lifted)`` must build the loss from the lifted parameters
    using autodiff-compatible operations; the result is exact to floating
    point for the composed graph (including forward-over-reverse paths).
    """
    lifted = LiftedParameters(params)
    loss = loss_builder(lifted)
    if not isinstance(loss, Value):
        raise TypeError("loss builder must return an autodiff Value")
    if not np.isfinite(loss.data):
        raise BackwardError(f"loss evaluated to non-finite value {loss.data}")
    loss.backward()
    grads = lifted.gradients()
    if not np.all(np.isfinite(grads)):
        # Diagnostic rerun names the first offending node type.
        fresh = LiftedParameters(params)
        loss_builder(fresh).backward(check_finite=True)
        raise BackwardError("non-finite gradient of unknown origin")
    return grads


def save_checkpoint(params: NetworkParameters, path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(params.layer_sizes),
        "weights": [np.asarray(w).tolist() for w in params.weights],
        "biases": [np.asarray(b).tolist() for b in params.biases],
        "k5_hat": params.k5_hat,
        "input_scale": params.input_scale,
        "v_ref": params.v_ref,
        "t_mem_ref": params.t_mem_ref,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> NetworkParameters:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError("format", f"not a checkpoint file: {path}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ConfigError("version", f"unsupported version {payload.get('version')}")
    weights = []
    biases = []
    for w, b in zip(payload["weights"], payload["biases"]):
        aw = np.array(w, dtype=float)
        ab = np.array(b, dtype=float)
        aw.setflags(write=False)
        ab.setflags(write=False)
        weights.append(aw)
        biases.append(ab)
    return NetworkParameters(
        weights=tuple(weights),
        biases=tuple(biases),
        k5_hat=float(payload["k5_hat"]),
        input_scale=float(payload["input_scale"]),
        v_ref=float(payload["v_ref"]),
        t_mem_ref=float(payload["t_mem_ref"]),
    )
