"""The seven first-order update rules, each a stateful per-parameter step.

Parameters and gradients are name -> ndarray mappings; `step` updates the
parameter arrays in place and never touches the gradients.

Update rules, per element (g = gradient, t = step count after increment):
  sgd       θ -= η·g
  adagrad   G += g²;  θ -= η·g / (√G + ε)                          (Duchi et al.)
  rmsprop   v = ρv + (1-ρ)g²;  θ -= η·g / (√v + ε)                 (Hinton)
  adadelta  Eg = ρEg + (1-ρ)g²;  Δ = -√(Ex + ε)/√(Eg + ε)·g;
            Ex = ρEx + (1-ρ)Δ²;  θ += η·Δ   with η = 1 by default   (Zeiler)
  adam      m = β₁m + (1-β₁)g;  v = β₂v + (1-β₂)g²;
            θ -= η·m̂ / (√v̂ + ε)   with m̂ = m/(1-β₁ᵗ), v̂ = v/(1-β₂ᵗ) (Kingma & Ba)
  adamax    m as adam;  u = max(β₂u, |g|);  θ -= η/(1-β₁ᵗ)·m / (u + ε) (Kingma & Ba)
  nadam     m, v as adam;  m̂ = β₁m/(1-β₁ᵗ⁺¹) + (1-β₁)g/(1-β₁ᵗ);
            θ -= η·m̂ / (√v̂ + ε)                                  (Dozat)
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Literal, Mapping

import numpy as np

from .errors import ConfigInvalid, ShapeMismatch, UninitializedState

OptimizerKind = Literal["sgd", "adagrad", "adadelta", "rmsprop", "adam", "adamax", "nadam"]
OPTIMIZER_KINDS: tuple[OptimizerKind, ...] = (
    "sgd", "adagrad", "adadelta", "rmsprop", "adam", "adamax", "nadam",
)

DEFAULT_LEARNING_RATE = 0.002
ADADELTA_LEARNING_RATE = 1.0

_SLOTS: dict[str, tuple[str, ...]] = {
    "sgd": (),
    "adagrad": ("accum",),
    "rmsprop": ("sq_avg",),
    "adadelta": ("sq_avg", "delta_avg"),
    "adam": ("m", "v"),
    "adamax": ("m", "u"),
    "nadam": ("m", "v"),
}


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.95
    epsilon: float = 1e-8

    def validate(self) -> None:
        if not self.learning_rate > 0:
            raise ConfigInvalid("learning_rate must be > 0")
        for name in ("beta1", "beta2", "rho"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigInvalid(f"{name} must be in [0, 1), got {value}")
        if not self.epsilon > 0:
            raise ConfigInvalid("epsilon must be > 0")

    @staticmethod
    def for_kind(kind: OptimizerKind, **overrides: float) -> "HyperParams":
        lr = ADADELTA_LEARNING_RATE if kind == "adadelta" else DEFAULT_LEARNING_RATE
        return dataclasses.replace(HyperParams(learning_rate=lr), **overrides)


@dataclass
class OptimizerState:
    kind: OptimizerKind
    slots: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    t: int = 0


def init_state(kind: OptimizerKind, param_shapes: Mapping[str, tuple[int, ...]]) -> OptimizerState:
    if kind not in _SLOTS:
        raise ConfigInvalid(f"Unknown optimizer {kind!r}; expected one of {OPTIMIZER_KINDS}")
    slots = {
        name: {slot: np.zeros(shape) for slot in _SLOTS[kind]}
        for name, shape in param_shapes.items()
    }
    return OptimizerState(kind=kind, slots=slots, t=0)


def step(
    kind: OptimizerKind,
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    hp: HyperParams,
) -> tuple[Mapping[str, np.ndarray], OptimizerState]:
    if state.kind != kind or set(state.slots) != set(params):
        raise UninitializedState(f"state was not initialized for these {kind} parameters")
    for name, p in params.items():
        g = grads.get(name)
        if g is None or g.shape != p.shape:
            raise ShapeMismatch(f"gradient for {name!r} does not match parameter shape {p.shape}")
        if any(s.shape != p.shape for s in state.slots[name].values()):
            raise ShapeMismatch(f"optimizer slots for {name!r} do not match shape {p.shape}")

    state.t += 1
    rule = _RULES[kind]
    for name, p in params.items():
        p -= rule(grads[name], state.slots[name], state.t, hp)
    return params, state


def _sgd(g: np.ndarray, s: dict[str, np.ndarray], t: int, hp: HyperParams) -> np.ndarray:
    return hp.learning_rate * g


def _adagrad(g: np.ndarray, s: dict[str, np.ndarray], t: int, hp: HyperParams) -> np.ndarray:
    s["accum"] += g * g
    return hp.learning_rate * g / (np.sqrt(s["accum"]) + hp.epsilon)


def _rmsprop(g: np.ndarray, s: dict[str, np.ndarray], t: int, hp: HyperParams) -> np.ndarray:
    s["sq_avg"] *= hp.rho
    s["sq_avg"] += (1.0 - hp.rho) * g * g
    return hp.learning_rate * g / (np.sqrt(s["sq_avg"]) + hp.epsilon)


def _adadelta(g: np.ndarray, s: dict[str, np.ndarray], t: int, hp: HyperParams) -> np.ndarray:
    s["sq_avg"] *= hp.rho
    s["sq_avg"] += (1.0 - hp.rho) * g * g
    delta = np.sqrt(s["delta_avg"] + hp.epsilon) / np.sqrt(s["sq_avg"] + hp.epsilon) * g
    s["delta_avg"] *= hp.rho
    s["delta_avg"] += (1.0 - hp.rho) * delta * delta
    return hp.learning_rate * delta


def _adam(g: np.ndarray, s: dict[str, np.ndarray], t: int, hp: HyperParams) -> np.ndarray:
    _update_moments(g, s, hp)
    m_hat = s["m"] / (1.0 - hp.beta1**t)
    v_hat = s["v"] / (1.0 - hp.beta2**t)
    return hp.learning_rate * m_hat / (np.sqrt(v_hat) + hp.epsilon)


def _adamax(g: np.ndarray, s: dict[str, np.ndarray], t: int, hp: HyperParams) -> np.ndarray:
    s["m"] *= hp.beta1
    s["m"] += (1.0 - hp.beta1) * g
    np.maximum(hp.beta2 * s["u"], np.abs(g), out=s["u"])
    return hp.learning_rate / (1.0 - hp.beta1**t) * s["m"] / (s["u"] + hp.epsilon)


def _nadam(g: np.ndarray, s: dict[str, np.ndarray], t: int, hp: HyperParams) -> np.ndarray:
    _update_moments(g, s, hp)
    m_hat = hp.beta1 * s["m"] / (1.0 - hp.beta1 ** (t + 1)) + (1.0 - hp.beta1) * g / (
        1.0 - hp.beta1**t
    )
    v_hat = s["v"] / (1.0 - hp.beta2**t)
    return hp.learning_rate * m_hat / (np.sqrt(v_hat) + hp.epsilon)


def _update_moments(g: np.ndarray, s: dict[str, np.ndarray], hp: HyperParams) -> None:
    s["m"] *= hp.beta1
    s["m"] += (1.0 - hp.beta1) * g
    s["v"] *= hp.beta2
    s["v"] += (1.0 - hp.beta2) * g * g


_RULES = {
    "sgd": _sgd,
    "adagrad": _adagrad,
    "rmsprop": _rmsprop,
    "adadelta": _adadelta,
    "adam": _adam,
    "adamax": _adamax,
    "nadam": _nadam,
}


class Optimizer:
    """Binds a kind, its hyperparameters and its state to one parameter set."""

    def __init__(
        self, kind: OptimizerKind, params: Mapping[str, np.ndarray], hp: HyperParams | None = None
    ) -> None:
        self.kind = kind
        self.hp = hp or HyperParams.for_kind(kind)
        self.hp.validate()
        self.params = params
        self.state = init_state(kind, {name: p.shape for name, p in params.items()})

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        step(self.kind, self.params, grads, self.state, self.hp)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_global_norm(
    grads: Mapping[str, np.ndarray], max_norm: float | None
) -> tuple[dict[str, np.ndarray], float]:
    """Rescale all gradients together so their joint L2 norm is at most `max_norm`."""
    norm = global_norm(grads)
    if max_norm is None or norm <= max_norm:
        return dict(grads), norm
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}, norm
