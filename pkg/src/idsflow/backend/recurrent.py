"""Simple-RNN and LSTM cells, unrolled forward pass and backpropagation through time.

Sequences are (time_steps, batch, input_dim) arrays. The classifier reads the
final hidden state through a dense softmax head shared with `nn`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

from .errors import DimensionMismatch, StaleCache
from .nn import DenseLayer, cross_entropy_loss, derive_seed, glorot_init, sigmoid, softmax, softmax_ce_grad

GATES: tuple[str, ...] = ("input", "forget", "output", "candidate")
RecurrentKind = Literal["rnn", "lstm"]


@dataclass
class RnnCell:
    w_xh: np.ndarray  # (input_dim, hidden_dim)
    w_hh: np.ndarray  # (hidden_dim, hidden_dim)
    b_h: np.ndarray  # (hidden_dim,)

    def __post_init__(self) -> None:
        h = self.w_hh.shape[0]
        if self.w_hh.shape != (h, h) or self.w_xh.shape[1] != h or self.b_h.shape != (h,):
            raise DimensionMismatch(
                f"inconsistent RNN cell: w_xh {self.w_xh.shape}, w_hh {self.w_hh.shape}, "
                f"b_h {self.b_h.shape}"
            )

    @property
    def input_dim(self) -> int:
        return int(self.w_xh.shape[0])

    @property
    def hidden_dim(self) -> int:
        return int(self.w_hh.shape[0])

    def parameters(self, prefix: str = "rnn") -> dict[str, np.ndarray]:
        return {f"{prefix}.w_xh": self.w_xh, f"{prefix}.w_hh": self.w_hh, f"{prefix}.b_h": self.b_h}

    @staticmethod
    def build(input_dim: int, hidden_dim: int, seed: int) -> "RnnCell":
        return RnnCell(
            w_xh=glorot_init(input_dim, hidden_dim, derive_seed(seed, 0)),
            w_hh=glorot_init(hidden_dim, hidden_dim, derive_seed(seed, 1)),
            b_h=np.zeros(hidden_dim),
        )


@dataclass
class LstmCell:
    """Per-gate weights for the input, forget and output gates and the candidate."""

    w_x: dict[str, np.ndarray]  # gate -> (input_dim, hidden_dim)
    w_h: dict[str, np.ndarray]  # gate -> (hidden_dim, hidden_dim)
    b: dict[str, np.ndarray]  # gate -> (hidden_dim,)

    def __post_init__(self) -> None:
        if set(self.w_x) != set(GATES) or set(self.w_h) != set(GATES) or set(self.b) != set(GATES):
            raise DimensionMismatch(f"LSTM cell needs parameters for gates {GATES}")
        d, h = self.w_x["input"].shape
        for g in GATES:
            if self.w_x[g].shape != (d, h) or self.w_h[g].shape != (h, h) or self.b[g].shape != (h,):
                raise DimensionMismatch(f"LSTM gate {g!r} parameters disagree in shape")

    @property
    def input_dim(self) -> int:
        return int(self.w_x["input"].shape[0])

    @property
    def hidden_dim(self) -> int:
        return int(self.w_x["input"].shape[1])

    def parameters(self, prefix: str = "lstm") -> dict[str, np.ndarray]:
        params: dict[str, np.ndarray] = {}
        for g in GATES:
            params[f"{prefix}.w_x.{g}"] = self.w_x[g]
            params[f"{prefix}.w_h.{g}"] = self.w_h[g]
            params[f"{prefix}.b.{g}"] = self.b[g]
        return params

    @staticmethod
    def build(input_dim: int, hidden_dim: int, seed: int) -> "LstmCell":
        w_x, w_h, b = {}, {}, {}
        for k, g in enumerate(GATES):
            w_x[g] = glorot_init(input_dim, hidden_dim, derive_seed(seed, k, 0))
            w_h[g] = glorot_init(hidden_dim, hidden_dim, derive_seed(seed, k, 1))
            b[g] = np.zeros(hidden_dim)
        return LstmCell(w_x=w_x, w_h=w_h, b=b)


Cell = Union[RnnCell, LstmCell]


@dataclass
class SequenceBatch:
    steps: np.ndarray  # (time_steps, batch, input_dim)

    def __post_init__(self) -> None:
        self.steps = np.asarray(self.steps, dtype=np.float64)
        if self.steps.ndim != 3:
            raise DimensionMismatch(f"sequence batch must be 3-D, got shape {self.steps.shape}")

    @property
    def time_steps(self) -> int:
        return int(self.steps.shape[0])

    @property
    def batch_size(self) -> int:
        return int(self.steps.shape[1])

    @property
    def input_dim(self) -> int:
        return int(self.steps.shape[2])


def step_width(features: int, time_steps: int) -> int:
    return -(-features // time_steps)


def to_sequence(x: np.ndarray, time_steps: int = 1) -> SequenceBatch:
    """Cut each row into `time_steps` consecutive chunks, zero-padding the tail."""
    if time_steps < 1:
        raise DimensionMismatch("time_steps must be >= 1")
    batch, features = x.shape
    width = step_width(features, time_steps)
    padded = np.zeros((batch, width * time_steps))
    padded[:, :features] = x
    return SequenceBatch(padded.reshape(batch, time_steps, width).transpose(1, 0, 2))


def _check_step(cell: Cell, x_t: np.ndarray, h_prev: np.ndarray) -> None:
    if x_t.ndim != 2 or x_t.shape[1] != cell.input_dim:
        raise DimensionMismatch(f"x_t {x_t.shape} does not fit input_dim {cell.input_dim}")
    if h_prev.shape != (x_t.shape[0], cell.hidden_dim):
        raise DimensionMismatch(
            f"state {h_prev.shape} does not fit ({x_t.shape[0]}, {cell.hidden_dim})"
        )


def rnn_step(cell: RnnCell, x_t: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    _check_step(cell, x_t, h_prev)
    return np.tanh(x_t @ cell.w_xh + h_prev @ cell.w_hh + cell.b_h)


@dataclass
class LstmStep:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    h: np.ndarray


def _lstm_step(cell: LstmCell, x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray) -> LstmStep:
    _check_step(cell, x_t, h_prev)
    if c_prev.shape != h_prev.shape:
        raise DimensionMismatch(f"cell state {c_prev.shape} does not match hidden {h_prev.shape}")

    def z(gate: str) -> np.ndarray:
        return x_t @ cell.w_x[gate] + h_prev @ cell.w_h[gate] + cell.b[gate]

    i, f, o = sigmoid(z("input")), sigmoid(z("forget")), sigmoid(z("output"))
    g = np.tanh(z("candidate"))
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return LstmStep(x=x_t, h_prev=h_prev, c_prev=c_prev, i=i, f=f, o=o, g=g, c=c, h=h)


def lstm_step(
    cell: LstmCell, x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    s = _lstm_step(cell, x_t, h_prev, c_prev)
    return s.h, s.c


@dataclass
class UnrollCache:
    """Everything BPTT needs from a forward pass."""

    kind: RecurrentKind
    input_dim: int
    hidden_dim: int
    xs: list[np.ndarray] = field(default_factory=list)
    hs: list[np.ndarray] = field(default_factory=list)  # hs[0] = h0, hs[t+1] = h after step t
    lstm_steps: list[LstmStep] = field(default_factory=list)

    @property
    def time_steps(self) -> int:
        return len(self.xs)


def unroll_forward(
    cell: Cell,
    seq: SequenceBatch,
    h0: np.ndarray | None = None,
    c0: np.ndarray | None = None,
) -> tuple[np.ndarray, UnrollCache]:
    batch = seq.batch_size
    h = np.zeros((batch, cell.hidden_dim)) if h0 is None else h0
    if h.shape != (batch, cell.hidden_dim):
        raise DimensionMismatch(f"h0 {h.shape} does not fit ({batch}, {cell.hidden_dim})")

    if isinstance(cell, RnnCell):
        cache = UnrollCache("rnn", cell.input_dim, cell.hidden_dim, hs=[h])
        for x_t in seq.steps:
            h = rnn_step(cell, x_t, h)
            cache.xs.append(x_t)
            cache.hs.append(h)
        return h, cache

    c = np.zeros_like(h) if c0 is None else c0
    cache = UnrollCache("lstm", cell.input_dim, cell.hidden_dim, hs=[h])
    for x_t in seq.steps:
        s = _lstm_step(cell, x_t, h, c)
        h, c = s.h, s.c
        cache.xs.append(x_t)
        cache.hs.append(h)
        cache.lstm_steps.append(s)
    return h, cache


@dataclass
class BpttGrads:
    params: dict[str, np.ndarray]
    dx: np.ndarray  # (time_steps, batch, input_dim)
    dh0: np.ndarray
    dc0: np.ndarray | None = None


def bptt_backward(cell: Cell, cache: UnrollCache, upstream_grad: np.ndarray) -> BpttGrads:
    """Exact gradients through every time step.

    `upstream_grad` is dL/dh_T with shape (batch, hidden), or a per-step
    (time_steps, batch, hidden) array of dL/dh_t.
    """
    kind: RecurrentKind = "rnn" if isinstance(cell, RnnCell) else "lstm"
    if (
        cache.kind != kind
        or cache.input_dim != cell.input_dim
        or cache.hidden_dim != cell.hidden_dim
        or cache.time_steps == 0
    ):
        raise StaleCache("cache was not produced by an unroll of this cell")

    T = cache.time_steps
    batch = cache.hs[0].shape[0]
    per_step = np.zeros((T, batch, cell.hidden_dim))
    if upstream_grad.shape == (batch, cell.hidden_dim):
        per_step[-1] = upstream_grad
    elif upstream_grad.shape == (T, batch, cell.hidden_dim):
        per_step[:] = upstream_grad
    else:
        raise StaleCache(f"upstream gradient {upstream_grad.shape} does not match the cache")

    if isinstance(cell, RnnCell):
        return _rnn_backward(cell, cache, per_step)
    return _lstm_backward(cell, cache, per_step)


def _rnn_backward(cell: RnnCell, cache: UnrollCache, per_step: np.ndarray) -> BpttGrads:
    d_wxh = np.zeros_like(cell.w_xh)
    d_whh = np.zeros_like(cell.w_hh)
    d_bh = np.zeros_like(cell.b_h)
    dx = np.zeros((cache.time_steps, *cache.xs[0].shape))
    dh = np.zeros_like(cache.hs[0])
    for t in range(cache.time_steps - 1, -1, -1):
        dh = dh + per_step[t]
        h_t = cache.hs[t + 1]
        da = dh * (1.0 - h_t * h_t)
        d_wxh += cache.xs[t].T @ da
        d_whh += cache.hs[t].T @ da
        d_bh += da.sum(axis=0)
        dx[t] = da @ cell.w_xh.T
        dh = da @ cell.w_hh.T
    grads = {"w_xh": d_wxh, "w_hh": d_whh, "b_h": d_bh}
    return BpttGrads(params=grads, dx=dx, dh0=dh)


def _lstm_backward(cell: LstmCell, cache: UnrollCache, per_step: np.ndarray) -> BpttGrads:
    d_wx = {g: np.zeros_like(cell.w_x[g]) for g in GATES}
    d_wh = {g: np.zeros_like(cell.w_h[g]) for g in GATES}
    d_b = {g: np.zeros_like(cell.b[g]) for g in GATES}
    dx = np.zeros((cache.time_steps, *cache.xs[0].shape))
    dh = np.zeros_like(cache.hs[0])
    dc = np.zeros_like(cache.hs[0])
    for t in range(cache.time_steps - 1, -1, -1):
        s = cache.lstm_steps[t]
        dh = dh + per_step[t]
        tc = np.tanh(s.c)
        dc = dc + dh * s.o * (1.0 - tc * tc)
        dz = {
            "output": dh * tc * s.o * (1.0 - s.o),
            "input": dc * s.g * s.i * (1.0 - s.i),
            "forget": dc * s.c_prev * s.f * (1.0 - s.f),
            "candidate": dc * s.i * (1.0 - s.g * s.g),
        }
        dx_t = np.zeros_like(s.x)
        dh_prev = np.zeros_like(s.h_prev)
        for g in GATES:
            d_wx[g] += s.x.T @ dz[g]
            d_wh[g] += s.h_prev.T @ dz[g]
            d_b[g] += dz[g].sum(axis=0)
            dx_t += dz[g] @ cell.w_x[g].T
            dh_prev += dz[g] @ cell.w_h[g].T
        dx[t] = dx_t
        dh = dh_prev
        dc = dc * s.f
    grads: dict[str, np.ndarray] = {}
    for g in GATES:
        grads[f"w_x.{g}"] = d_wx[g]
        grads[f"w_h.{g}"] = d_wh[g]
        grads[f"b.{g}"] = d_b[g]
    return BpttGrads(params=grads, dx=dx, dh0=dh, dc0=dc)


@dataclass
class RecurrentClassifier:
    """Recurrent layer over `time_steps` chunks of each record plus a dense softmax head."""

    cell: Cell
    head: DenseLayer
    time_steps: int = 1
    input_dim: int = 0

    def __post_init__(self) -> None:
        if self.head.in_dim != self.cell.hidden_dim:
            raise DimensionMismatch("head input must equal the cell's hidden_dim")
        if not self.input_dim:
            self.input_dim = self.cell.input_dim * self.time_steps
        if step_width(self.input_dim, self.time_steps) != self.cell.input_dim:
            raise DimensionMismatch(
                f"{self.input_dim} features in {self.time_steps} steps do not fit "
                f"cell input_dim {self.cell.input_dim}"
            )

    @property
    def kind(self) -> RecurrentKind:
        return "rnn" if isinstance(self.cell, RnnCell) else "lstm"

    @property
    def num_classes(self) -> int:
        return self.head.out_dim

    @staticmethod
    def build(
        kind: RecurrentKind,
        input_dim: int,
        num_classes: int,
        *,
        hidden_dim: int = 128,
        time_steps: int = 1,
        seed: int,
    ) -> "RecurrentClassifier":
        width = step_width(input_dim, time_steps)
        cell_seed = derive_seed(seed, 0)
        cell: Cell = (
            RnnCell.build(width, hidden_dim, cell_seed)
            if kind == "rnn"
            else LstmCell.build(width, hidden_dim, cell_seed)
        )
        head = DenseLayer(
            glorot_init(hidden_dim, num_classes, derive_seed(seed, 1)), np.zeros(num_classes)
        )
        return RecurrentClassifier(cell=cell, head=head, time_steps=time_steps, input_dim=input_dim)

    def parameters(self) -> dict[str, np.ndarray]:
        params = self.cell.parameters(self.kind)
        params["head.weights"] = self.head.weights
        params["head.bias"] = self.head.bias
        return params

    def _check_input(self, x: np.ndarray) -> None:
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionMismatch(f"input {x.shape} does not fit input_dim {self.input_dim}")

    def logits(self, x: np.ndarray) -> np.ndarray:
        self._check_input(x)
        h_T, _ = unroll_forward(self.cell, to_sequence(x, self.time_steps))
        return h_T @ self.head.weights + self.head.bias

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x))

    def loss_and_gradients(
        self, x: np.ndarray, targets: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray]]:
        self._check_input(x)
        targets = np.asarray(targets, dtype=np.int64)
        h_T, cache = unroll_forward(self.cell, to_sequence(x, self.time_steps))
        probs = softmax(h_T @ self.head.weights + self.head.bias)
        loss = cross_entropy_loss(probs, targets)

        d_logits = softmax_ce_grad(probs, targets)
        bptt = bptt_backward(self.cell, cache, d_logits @ self.head.weights.T)
        grads = {f"{self.kind}.{name}": g for name, g in bptt.params.items()}
        grads["head.weights"] = h_T.T @ d_logits
        grads["head.bias"] = d_logits.sum(axis=0)
        return loss, {name: grads[name] for name in self.parameters()}
