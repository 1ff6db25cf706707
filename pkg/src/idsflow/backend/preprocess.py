"""Fit-on-train, apply-everywhere feature pipeline.

Categorical columns are one-hot expanded in place (block at the column's own
position, vocabulary in lexicographic order). Every encoded column is then
min-max scaled with extrema taken from the training matrix only.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .dataset import LabeledDataset
from .errors import DimensionMismatch, EmptyDataset, EmptyMatrix, NonNumericValue, SchemaMismatch
from .workspace import atomic_write, atomic_write_text

logger = logging.getLogger(__name__)

PIPELINE_FORMAT = "idsflow-pipeline"


@dataclass(frozen=True)
class EncoderSpec:
    schema_name: str
    feature_names: tuple[str, ...]
    vocabularies: dict[int, tuple[str, ...]]

    @property
    def feature_count(self) -> int:
        return len(self.feature_names)

    @property
    def total_encoded_width(self) -> int:
        numeric = self.feature_count - len(self.vocabularies)
        return numeric + sum(len(v) for v in self.vocabularies.values())

    def column_names(self) -> list[str]:
        names: list[str] = []
        for i, name in enumerate(self.feature_names):
            if i in self.vocabularies:
                names.extend(f"{name}={v}" for v in self.vocabularies[i])
            else:
                names.append(name)
        return names

    def onehot_mask(self) -> np.ndarray:
        mask: list[bool] = []
        for i in range(self.feature_count):
            if i in self.vocabularies:
                mask.extend([True] * len(self.vocabularies[i]))
            else:
                mask.append(False)
        return np.asarray(mask, dtype=bool)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_name": self.schema_name,
            "feature_names": list(self.feature_names),
            "vocabularies": {str(k): list(v) for k, v in sorted(self.vocabularies.items())},
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "EncoderSpec":
        return EncoderSpec(
            schema_name=data["schema_name"],
            feature_names=tuple(data["feature_names"]),
            vocabularies={int(k): tuple(v) for k, v in data["vocabularies"].items()},
        )


@dataclass(frozen=True)
class NormalizerSpec:
    mins: np.ndarray
    maxs: np.ndarray

    @property
    def width(self) -> int:
        return int(self.mins.shape[0])

    @property
    def constant(self) -> np.ndarray:
        return self.maxs == self.mins

    def to_dict(self) -> dict[str, Any]:
        return {"min": [float(v) for v in self.mins], "max": [float(v) for v in self.maxs]}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "NormalizerSpec":
        return NormalizerSpec(
            mins=np.asarray(data["min"], dtype=np.float64),
            maxs=np.asarray(data["max"], dtype=np.float64),
        )


@dataclass
class FeatureMatrix:
    values: np.ndarray
    class_indices: np.ndarray
    column_names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.class_indices = np.asarray(self.class_indices, dtype=np.int64)
        if self.values.ndim != 2:
            raise DimensionMismatch(f"FeatureMatrix needs a 2-D array, got {self.values.ndim}-D")
        if self.values.shape[0] != self.class_indices.shape[0]:
            raise DimensionMismatch(
                f"{self.values.shape[0]} rows but {self.class_indices.shape[0]} class indices"
            )

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def cols(self) -> int:
        return int(self.values.shape[1])

    def take(self, indices: np.ndarray) -> "FeatureMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureMatrix(self.values[idx], self.class_indices[idx], list(self.column_names))

    def save(self, path: Path) -> None:
        """Write a `.npy` structured array of (class index, feature row) records."""
        dtype = np.dtype([("y", "<i8"), ("x", "<f8", (self.cols,))])
        packed = np.empty(self.rows, dtype=dtype)
        packed["y"] = self.class_indices
        packed["x"] = self.values
        atomic_write(Path(path), lambda f: np.save(f, packed, allow_pickle=False), binary=True)

    @staticmethod
    def load(path: Path) -> "FeatureMatrix":
        packed = np.load(Path(path), allow_pickle=False)
        if packed.dtype.names != ("y", "x"):
            raise SchemaMismatch(f"{path} is not an encoded feature matrix")
        values = packed["x"].reshape(packed.shape[0], -1)
        return FeatureMatrix(values=values, class_indices=packed["y"])


@dataclass(frozen=True)
class PipelineState:
    encoder: EncoderSpec
    normalizer: NormalizerSpec
    schema_name: str
    class_names: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": PIPELINE_FORMAT,
            "schema_name": self.schema_name,
            "class_names": list(self.class_names),
            "encoder": self.encoder.to_dict(),
            "normalizer": self.normalizer.to_dict(),
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "PipelineState":
        if data.get("format") != PIPELINE_FORMAT:
            raise SchemaMismatch("Not a fitted pipeline document")
        return PipelineState(
            encoder=EncoderSpec.from_dict(data["encoder"]),
            normalizer=NormalizerSpec.from_dict(data["normalizer"]),
            schema_name=data["schema_name"],
            class_names=tuple(data.get("class_names", ())),
        )

    def save(self, path: Path) -> None:
        atomic_write_text(Path(path), json.dumps(self.to_dict(), indent=2) + "\n")

    @staticmethod
    def load(path: Path) -> "PipelineState":
        return PipelineState.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_encoder(train: LabeledDataset) -> EncoderSpec:
    if len(train) == 0:
        raise EmptyDataset("Cannot fit an encoder on an empty dataset")
    schema = train.schema
    vocabularies = {
        col: tuple(sorted({rec[col] for rec in train.records}))
        for col in schema.categorical_indices
    }
    return EncoderSpec(
        schema_name=schema.name,
        feature_names=schema.feature_names,
        vocabularies=vocabularies,
    )


def encode(ds: LabeledDataset, spec: EncoderSpec) -> FeatureMatrix:
    """One-hot categorical columns, parse the rest as reals.

    Categorical values unseen at fit time encode as an all-zeros block.
    """
    if ds.schema.name != spec.schema_name:
        raise SchemaMismatch(f"Encoder fitted on {spec.schema_name}, got {ds.schema.name} data")
    n = len(ds)
    out = np.zeros((n, spec.total_encoded_width), dtype=np.float64)
    if n == 0:
        return FeatureMatrix(out, ds.class_indices, spec.column_names())

    grid = np.asarray(ds.records, dtype=str)
    pos = 0
    for col in range(spec.feature_count):
        column = grid[:, col]
        vocab = spec.vocabularies.get(col)
        if vocab is None:
            out[:, pos] = _parse_numeric(column, col)
            pos += 1
            continue
        lookup = {v: i for i, v in enumerate(vocab)}
        codes = np.fromiter((lookup.get(v, -1) for v in column), dtype=np.int64, count=n)
        seen = codes >= 0
        out[np.flatnonzero(seen), pos + codes[seen]] = 1.0
        unseen = int(n - seen.sum())
        if unseen:
            logger.debug("%d values in column %s unseen at fit time", unseen, spec.feature_names[col])
        pos += len(vocab)
    return FeatureMatrix(out, ds.class_indices, spec.column_names())


def _parse_numeric(column: np.ndarray, col: int) -> np.ndarray:
    try:
        parsed = column.astype(np.float64)
    except ValueError:
        parsed = None
    if parsed is not None and np.isfinite(parsed).all():
        return parsed
    values = np.empty(column.shape[0], dtype=np.float64)
    for row, raw in enumerate(column):
        try:
            values[row] = float(raw)
        except ValueError:
            raise NonNumericValue(row, col, str(raw)) from None
        if not np.isfinite(values[row]):
            raise NonNumericValue(row, col, str(raw))
    return values


def fit_normalizer(m: FeatureMatrix) -> NormalizerSpec:
    if m.rows == 0:
        raise EmptyMatrix("Cannot fit a normalizer on an empty matrix")
    return NormalizerSpec(mins=m.values.min(axis=0), maxs=m.values.max(axis=0))


def normalize(m: FeatureMatrix, spec: NormalizerSpec) -> FeatureMatrix:
    """x' = (x - min) / (max - min), clipped into [0, 1]; constant columns map to 0."""
    if m.cols != spec.width:
        raise DimensionMismatch(f"Matrix has {m.cols} columns, normalizer expects {spec.width}")
    span = spec.maxs - spec.mins
    constant = span == 0
    safe = np.where(constant, 1.0, span)
    scaled = (m.values - spec.mins) / safe
    scaled[:, constant] = 0.0
    np.clip(scaled, 0.0, 1.0, out=scaled)
    return FeatureMatrix(scaled, m.class_indices, list(m.column_names))


def fit_pipeline(train: LabeledDataset) -> tuple[PipelineState, FeatureMatrix]:
    encoder = fit_encoder(train)
    encoded = encode(train, encoder)
    normalizer = fit_normalizer(encoded)
    state = PipelineState(
        encoder=encoder,
        normalizer=normalizer,
        schema_name=train.schema.name,
        class_names=tuple(train.class_names),
    )
    logger.info(
        "Fitted pipeline on %d %s records: encoded width %d",
        len(train), train.schema.name, encoder.total_encoded_width,
    )
    return state, normalize(encoded, normalizer)


def apply_pipeline(state: PipelineState, ds: LabeledDataset) -> FeatureMatrix:
    """Encode and normalize with frozen train-time state; never refits."""
    if ds.schema.name != state.schema_name:
        raise SchemaMismatch(f"Pipeline fitted on {state.schema_name}, got {ds.schema.name} data")
    return normalize(encode(ds, state.encoder), state.normalizer)
