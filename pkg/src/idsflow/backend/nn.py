"""Dense feed-forward layers, softmax cross-entropy and analytic gradients.

All tensors are float64 NumPy arrays; batches are row-major (batch, features).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .errors import DimensionMismatch

Activation = Literal["sigmoid", "tanh", "relu", "identity"]
ACTIVATIONS: tuple[Activation, ...] = ("sigmoid", "tanh", "relu", "identity")

PROB_FLOOR = 1e-12


def sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _identity(z: np.ndarray) -> np.ndarray:
    return z


# derivative expressed through (z, f(z)) so no activation is recomputed
_FORWARD: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sigmoid": sigmoid,
    "tanh": np.tanh,
    "relu": _relu,
    "identity": _identity,
}
_DERIVATIVE: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "sigmoid": lambda z, a: a * (1.0 - a),
    "tanh": lambda z, a: 1.0 - a * a,
    "relu": lambda z, a: (z > 0).astype(np.float64),
    "identity": lambda z, a: np.ones_like(z),
}


def activate(kind: Activation, z: np.ndarray) -> np.ndarray:
    return _FORWARD[kind](z)


def activation_grad(kind: Activation, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    return _DERIVATIVE[kind](z, a)


@dataclass
class DenseLayer:
    weights: np.ndarray  # (in_dim, out_dim)
    bias: np.ndarray  # (out_dim,)
    activation: Activation = "identity"

    def __post_init__(self) -> None:
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise DimensionMismatch(
                f"bias {self.bias.shape} does not match weights {self.weights.shape}"
            )

    @property
    def in_dim(self) -> int:
        return int(self.weights.shape[0])

    @property
    def out_dim(self) -> int:
        return int(self.weights.shape[1])


def _affine(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise DimensionMismatch(f"input {x.shape} does not fit layer in_dim {layer.in_dim}")
    return x @ layer.weights + layer.bias


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    return activate(layer.activation, _affine(layer, x))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_loss(probs: np.ndarray, targets: np.ndarray) -> float:
    targets = np.asarray(targets, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != targets.shape[0]:
        raise DimensionMismatch(f"{probs.shape[0]} probability rows for {targets.shape[0]} targets")
    picked = probs[np.arange(targets.shape[0]), targets]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def softmax_ce_grad(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Fused d(mean CE)/d(logits): (probs - onehot) / batch."""
    grad = probs.copy()
    grad[np.arange(targets.shape[0]), targets] -= 1.0
    return grad / targets.shape[0]


def glorot_init(in_dim: int, out_dim: int, seed: int) -> np.ndarray:
    if in_dim <= 0 or out_dim <= 0:
        raise DimensionMismatch(f"glorot_init needs positive dims, got {in_dim}x{out_dim}")
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    rng = np.random.default_rng(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
    return rng.uniform(-limit, limit, size=(in_dim, out_dim))


def derive_seed(seed: int, *path: int) -> int:
    """Independent 64-bit child seed for a named slot under `seed`."""
    seq = np.random.SeedSequence([int(seed) & 0xFFFF_FFFF_FFFF_FFFF, *path])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass
class DnnModel:
    """Stack of dense layers; the last one emits logits for the softmax head."""

    layers: list[DenseLayer]

    def __post_init__(self) -> None:
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise DimensionMismatch(f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}")

    @staticmethod
    def build(
        input_dim: int,
        num_classes: int,
        *,
        hidden_dim: int = 128,
        hidden_layers: int = 1,
        activation: Activation = "relu",
        seed: int,
    ) -> "DnnModel":
        dims = [input_dim] + [hidden_dim] * hidden_layers + [num_classes]
        layers = []
        for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
            act: Activation = activation if i < len(dims) - 2 else "identity"
            layers.append(
                DenseLayer(glorot_init(d_in, d_out, derive_seed(seed, i)), np.zeros(d_out), act)
            )
        return DnnModel(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def num_classes(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> dict[str, np.ndarray]:
        params: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            params[f"dense{i}.weights"] = layer.weights
            params[f"dense{i}.bias"] = layer.bias
        return params

    def logits(self, x: np.ndarray) -> np.ndarray:
        a = x
        for layer in self.layers:
            a = dense_forward(layer, a)
        return a

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x))

    def loss_and_gradients(
        self, x: np.ndarray, targets: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray]]:
        return backward(self, x, targets)


def backward(
    model: DnnModel, batch: np.ndarray, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean softmax cross-entropy over the batch and its gradient for every parameter."""
    targets = np.asarray(targets, dtype=np.int64)
    if batch.shape[0] != targets.shape[0]:
        raise DimensionMismatch(f"{batch.shape[0]} rows for {targets.shape[0]} targets")

    inputs: list[np.ndarray] = []
    pre: list[np.ndarray] = []
    post: list[np.ndarray] = []
    a = batch
    for layer in model.layers:
        inputs.append(a)
        z = _affine(layer, a)
        a = activate(layer.activation, z)
        pre.append(z)
        post.append(a)

    probs = softmax(a)
    loss = cross_entropy_loss(probs, targets)

    grads: dict[str, np.ndarray] = {}
    delta = softmax_ce_grad(probs, targets) * activation_grad(
        model.layers[-1].activation, pre[-1], post[-1]
    )
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        grads[f"dense{i}.weights"] = inputs[i].T @ delta
        grads[f"dense{i}.bias"] = delta.sum(axis=0)
        if i > 0:
            below = model.layers[i - 1]
            delta = (delta @ layer.weights.T) * activation_grad(below.activation, pre[i - 1], post[i - 1])
    return loss, {name: grads[name] for name in model.parameters()}
