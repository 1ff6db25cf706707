from __future__ import annotations

import dataclasses
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

from .dataset import BINARY_CLASSES, SCHEMAS, DatasetName, LabelMode
from .errors import ConfigInvalid
from .nn import ACTIVATIONS, Activation
from .optim import OPTIMIZER_KINDS, HyperParams, OptimizerKind

ModelKind = Literal["dnn", "rnn", "lstm"]
MODEL_KINDS: tuple[ModelKind, ...] = ("dnn", "rnn", "lstm")


@dataclass
class DatasetConfig:
    name: DatasetName = "nslkdd"
    train_csv: str | None = None
    test_csv: str | None = None
    taxonomy: str | None = None  # None = shipped taxonomy
    has_header: bool | None = None  # None = the schema's default
    label_mode: LabelMode = "multiclass"
    subsample: int | None = None

    def validate(self) -> None:
        if self.name not in SCHEMAS:
            raise ConfigInvalid(f"dataset.name must be one of {', '.join(SCHEMAS)}")
        if self.label_mode not in ("multiclass", "binary"):
            raise ConfigInvalid("dataset.label_mode must be 'multiclass' or 'binary'")
        _require_ints(self, "dataset", "subsample")
        if self.subsample is not None and self.subsample <= 0:
            raise ConfigInvalid("dataset.subsample must be > 0")

    @property
    def class_names(self) -> tuple[str, ...]:
        if self.label_mode == "binary":
            return BINARY_CLASSES
        return SCHEMAS[self.name].class_names

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass
class ModelConfig:
    kind: ModelKind = "dnn"
    hidden_dim: int = 128
    hidden_layers: int = 1  # dnn only
    activation: Activation = "relu"  # dnn hidden layers
    time_steps: int = 1  # rnn/lstm only

    def validate(self) -> None:
        _require_ints(self, "model", "hidden_dim", "hidden_layers", "time_steps")
        if self.kind not in MODEL_KINDS:
            raise ConfigInvalid(f"model.kind must be one of {', '.join(MODEL_KINDS)}")
        if self.hidden_dim <= 0:
            raise ConfigInvalid("model.hidden_dim must be > 0")
        if self.hidden_layers <= 0:
            raise ConfigInvalid("model.hidden_layers must be > 0")
        if self.activation not in ACTIVATIONS:
            raise ConfigInvalid(f"model.activation must be one of {', '.join(ACTIVATIONS)}")
        if self.time_steps <= 0:
            raise ConfigInvalid("model.time_steps must be > 0")


@dataclass
class OptimizerConfig:
    kind: OptimizerKind = "adam"
    # None means "use the default for this kind"
    learning_rate: float | None = None
    beta1: float | None = None
    beta2: float | None = None
    rho: float | None = None
    epsilon: float | None = None

    def validate(self) -> None:
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigInvalid(f"optimizer.kind must be one of {', '.join(OPTIMIZER_KINDS)}")
        self.hyperparams().validate()

    def hyperparams(self) -> HyperParams:
        overrides: dict[str, float] = {}
        for name, value in self._explicit().items():
            try:
                overrides[name] = float(value)
            except (TypeError, ValueError):
                raise ConfigInvalid(f"optimizer.{name} must be a number, got {value!r}") from None
        return HyperParams.for_kind(self.kind, **overrides)

    def defaulted(self) -> list[str]:
        """Hyperparameters not set explicitly, i.e. taken from our defaults."""
        explicit = self._explicit()
        return [f.name for f in dataclasses.fields(HyperParams) if f.name not in explicit]

    def _explicit(self) -> dict[str, float]:
        return {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(HyperParams)
            if getattr(self, f.name) is not None
        }


@dataclass
class TrainingConfig:
    epochs: int = 20
    batch_size: int = 128
    seed: int | None = None  # required; no silent default
    clip_norm: float | None = 5.0
    eval_split: float | None = None

    def validate(self) -> None:
        _require_ints(self, "training", "epochs", "batch_size", "seed")
        if self.epochs < 1:
            raise ConfigInvalid("training.epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigInvalid("training.batch_size must be >= 1")
        if self.seed is None:
            raise ConfigInvalid("training.seed is required (pass --seed or set it in the config)")
        if not -(2**63) <= self.seed < 2**64:
            raise ConfigInvalid("training.seed must fit in 64 bits")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigInvalid("training.clip_norm must be > 0 or null")
        if self.eval_split is not None and not 0.0 < self.eval_split < 1.0:
            raise ConfigInvalid("training.eval_split must be in (0, 1)")


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def validate(self) -> None:
        self.dataset.validate()
        self.model.validate()
        self.optimizer.validate()
        self.training.validate()

    @property
    def seed(self) -> int:
        if self.training.seed is None:
            raise ConfigInvalid("training.seed is required")
        return int(self.training.seed)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "ExperimentConfig":
        sections = {
            "dataset": DatasetConfig,
            "model": ModelConfig,
            "optimizer": OptimizerConfig,
            "training": TrainingConfig,
        }
        unknown = set(data) - set(sections)
        if unknown:
            raise ConfigInvalid(f"Unknown config section(s): {', '.join(sorted(unknown))}")
        kwargs = {}
        for key, cls in sections.items():
            section = data.get(key) or {}
            names = {f.name for f in dataclasses.fields(cls)}
            bad = set(section) - names
            if bad:
                raise ConfigInvalid(f"Unknown {key} field(s): {', '.join(sorted(bad))}")
            kwargs[key] = cls(**section)
        return ExperimentConfig(**kwargs)

    @staticmethod
    def defaults(dataset: DatasetName, model: ModelKind, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(
            dataset=DatasetConfig(name=dataset),
            model=ModelConfig(kind=model),
            training=TrainingConfig(seed=seed),
        )

    def with_overrides(self, assignments: list[str]) -> "ExperimentConfig":
        """Apply `section.field=value` strings; values are parsed as JSON, else kept as text."""
        data = self.to_dict()
        for item in assignments:
            key, sep, raw = item.partition("=")
            section, dot, name = key.strip().partition(".")
            if not sep or not dot or section not in data or name not in data[section]:
                raise ConfigInvalid(f"Bad override {item!r}; expected section.field=value")
            data[section][name] = _parse_value(raw.strip())
        return ExperimentConfig.from_dict(data)


def _require_ints(section: object, label: str, *names: str) -> None:
    for name in names:
        value = getattr(section, name)
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigInvalid(f"{label}.{name} must be an integer, got {value!r}")


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text) if p.suffix.lower() == ".toml" else json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigInvalid(f"Cannot parse config {p}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigInvalid(f"Config {p} must hold a mapping of sections")
    return ExperimentConfig.from_dict(data)
