from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Mapping, Protocol

import numpy as np

from .errors import ShapeMismatch
from .nn import Activation, DnnModel
from .recurrent import RecurrentClassifier
from .schema import ModelConfig, ModelKind


class Classifier(Protocol):
    @property
    def num_classes(self) -> int: ...

    def parameters(self) -> dict[str, np.ndarray]: ...

    def predict_proba(self, x: np.ndarray) -> np.ndarray: ...

    def loss_and_gradients(
        self, x: np.ndarray, targets: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray]]: ...


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to rebuild a classifier's architecture."""

    kind: ModelKind
    input_dim: int
    num_classes: int
    hidden_dim: int = 128
    hidden_layers: int = 1
    activation: Activation = "relu"
    time_steps: int = 1

    @staticmethod
    def from_config(cfg: ModelConfig, input_dim: int, num_classes: int) -> "ModelSpec":
        return ModelSpec(
            kind=cfg.kind,
            input_dim=input_dim,
            num_classes=num_classes,
            hidden_dim=cfg.hidden_dim,
            hidden_layers=cfg.hidden_layers,
            activation=cfg.activation,
            time_steps=cfg.time_steps,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "input_dim": self.input_dim,
            "num_classes": self.num_classes,
            "hidden_dim": self.hidden_dim,
            "hidden_layers": self.hidden_layers,
            "activation": self.activation,
            "time_steps": self.time_steps,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "ModelSpec":
        return ModelSpec(**data)


def build_model(spec: ModelSpec, seed: int) -> Classifier:
    if spec.kind == "dnn":
        return DnnModel.build(
            spec.input_dim,
            spec.num_classes,
            hidden_dim=spec.hidden_dim,
            hidden_layers=spec.hidden_layers,
            activation=spec.activation,
            seed=seed,
        )
    return RecurrentClassifier.build(
        spec.kind,
        spec.input_dim,
        spec.num_classes,
        hidden_dim=spec.hidden_dim,
        time_steps=spec.time_steps,
        seed=seed,
    )


def restore_model(spec: ModelSpec, params: Mapping[str, np.ndarray]) -> Classifier:
    """Rebuild the architecture and copy stored tensors into it."""
    model = build_model(spec, seed=0)
    own = model.parameters()
    if set(own) != set(params):
        missing = sorted(set(own) ^ set(params))
        raise ShapeMismatch(f"stored parameters do not match a {spec.kind} model: {missing}")
    for name, target in own.items():
        value = np.asarray(params[name], dtype=np.float64)
        if value.shape != target.shape:
            raise ShapeMismatch(f"{name}: stored {value.shape}, expected {target.shape}")
        np.copyto(target, value)
    return model


def parameter_checksum(params: Mapping[str, np.ndarray]) -> str:
    """sha256 over names and little-endian float64 bytes, in parameter order."""
    h = hashlib.sha256()
    for name, value in params.items():
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return h.hexdigest()
