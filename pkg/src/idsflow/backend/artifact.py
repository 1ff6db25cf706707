"""Versioned model artifact: one JSON document, tensors as base64 float64 payloads.

Layout (keys sorted, two-space indent):
  format        "idsflow-model"
  version       ARTIFACT_VERSION
  config        ExperimentConfig snapshot
  pipeline      fitted PipelineState
  model         ModelSpec
  class_names   output class order; normal_class indexes into it
  parameters    [{name, shape, dtype "<f8", data}] in parameter order
  checksum      sha256 of the canonical JSON of everything above
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .dataset import NORMAL_CLASS
from .errors import CorruptArtifact, NumericError, ValidationError, VersionMismatch
from .models import Classifier, ModelSpec, restore_model
from .preprocess import PipelineState
from .schema import ExperimentConfig
from .workspace import atomic_write_text

logger = logging.getLogger(__name__)

ARTIFACT_FORMAT = "idsflow-model"
ARTIFACT_VERSION = 1


@dataclass
class ModelArtifact:
    config: ExperimentConfig
    pipeline: PipelineState
    spec: ModelSpec
    class_names: tuple[str, ...]
    model: Classifier

    @property
    def normal_class(self) -> int:
        return self.class_names.index(NORMAL_CLASS)

    def parameters(self) -> dict[str, np.ndarray]:
        return self.model.parameters()

    def to_dict(self) -> dict[str, Any]:
        body = {
            "format": ARTIFACT_FORMAT,
            "version": ARTIFACT_VERSION,
            "config": self.config.to_dict(),
            "pipeline": self.pipeline.to_dict(),
            "model": self.spec.to_dict(),
            "class_names": list(self.class_names),
            "normal_class": self.normal_class,
            "parameters": [_encode_tensor(name, value) for name, value in self.parameters().items()],
        }
        body["checksum"] = _checksum(body)
        return body


def _encode_tensor(name: str, value: np.ndarray) -> dict[str, Any]:
    raw = np.ascontiguousarray(value, dtype="<f8").tobytes()
    return {
        "name": name,
        "shape": list(value.shape),
        "dtype": "<f8",
        "data": base64.b64encode(raw).decode("ascii"),
    }


def _decode_tensor(entry: dict[str, Any]) -> np.ndarray:
    if entry.get("dtype") != "<f8":
        raise CorruptArtifact(f"tensor {entry.get('name')!r} has unsupported dtype")
    shape = tuple(int(d) for d in entry["shape"])
    try:
        raw = base64.b64decode(entry["data"], validate=True)
    except ValueError as e:
        raise CorruptArtifact(f"tensor {entry['name']!r} payload is not base64") from e
    flat = np.frombuffer(raw, dtype="<f8")
    if flat.size != int(np.prod(shape)):
        raise CorruptArtifact(f"tensor {entry['name']!r} holds {flat.size} values for shape {shape}")
    return flat.reshape(shape).astype(np.float64)


def _canonical(data: Any) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _checksum(body: dict[str, Any]) -> str:
    return hashlib.sha256(_canonical({k: v for k, v in body.items() if k != "checksum"})).hexdigest()


def dumps_model(artifact: ModelArtifact) -> str:
    return json.dumps(artifact.to_dict(), sort_keys=True, indent=2) + "\n"


def save_model(artifact: ModelArtifact, path: str | Path) -> Path:
    p = Path(path)
    atomic_write_text(p, dumps_model(artifact))
    logger.info("Saved %s model to %s", artifact.spec.kind, p)
    return p


def load_model(path: str | Path) -> ModelArtifact:
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CorruptArtifact(f"{p} is truncated or not JSON: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != ARTIFACT_FORMAT:
        raise CorruptArtifact(f"{p} is not an idsflow model artifact")
    if doc.get("version") != ARTIFACT_VERSION:
        raise VersionMismatch(doc.get("version"), ARTIFACT_VERSION)
    if doc.get("checksum") != _checksum(doc):
        raise CorruptArtifact(f"{p}: checksum mismatch")

    try:
        spec = ModelSpec.from_dict(doc["model"])
        params = {entry["name"]: _decode_tensor(entry) for entry in doc["parameters"]}
        return ModelArtifact(
            config=ExperimentConfig.from_dict(doc["config"]),
            pipeline=PipelineState.from_dict(doc["pipeline"]),
            spec=spec,
            class_names=tuple(doc["class_names"]),
            model=restore_model(spec, params),
        )
    except (KeyError, TypeError, ValueError, NumericError, ValidationError) as e:
        raise CorruptArtifact(f"{p}: {e}") from e
