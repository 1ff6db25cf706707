from __future__ import annotations

import numpy as np
import pytest

from idsflow.backend.dataset import BINARY_CLASSES
from idsflow.backend.errors import ConfigInvalid, EmptyDataset, NumericDivergence, SchemaMismatch
from idsflow.backend.preprocess import EncoderSpec, FeatureMatrix, NormalizerSpec, PipelineState
from idsflow.backend.schema import ExperimentConfig
from idsflow.backend.training import epoch_order, train


def _two_feature_pipeline() -> PipelineState:
    return PipelineState(
        encoder=EncoderSpec("nslkdd", ("a", "b"), {}),
        normalizer=NormalizerSpec(mins=np.zeros(2), maxs=np.ones(2)),
        schema_name="nslkdd",
        class_names=BINARY_CLASSES,
    )


def _separable(n: int = 40, seed: int = 0) -> FeatureMatrix:
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x0 = np.where(y == 0, rng.uniform(0.0, 0.3, n), rng.uniform(0.7, 1.0, n))
    x1 = rng.uniform(0.0, 1.0, n)
    return FeatureMatrix(np.column_stack([x0, x1]), y)


def _config(kind: str = "dnn", *, seed: int = 3, epochs: int = 5, **overrides) -> ExperimentConfig:
    cfg = ExperimentConfig.defaults("nslkdd", kind, seed)
    cfg.dataset.label_mode = "binary"
    cfg.model.hidden_dim = 8
    cfg.training.epochs = epochs
    cfg.training.batch_size = 16
    for key, value in overrides.items():
        section, name = key.split("__")
        setattr(getattr(cfg, section), name, value)
    return cfg


def test_single_epoch_runs_once() -> None:
    lines: list[str] = []
    _, report = train(_config(epochs=1), _separable(), _two_feature_pipeline(), on_log=lines.append)
    assert len(report.epochs) == 1
    epoch_lines = [ln for ln in lines if ln.startswith("epoch,")]
    assert len(epoch_lines) == 1
    parts = epoch_lines[0].split(",")
    assert parts[:3] == ["epoch", "1", "loss"] and parts[4] == "acc"


def test_sgd_separates_two_clusters() -> None:
    cfg = _config(epochs=200, optimizer__kind="sgd", optimizer__learning_rate=0.5)
    artifact, report = train(cfg, _separable(), _two_feature_pipeline())
    assert report.final_accuracy == 1.0
    assert report.epochs[-1].loss < report.epochs[0].loss
    assert artifact.class_names == BINARY_CLASSES
    assert artifact.normal_class == 1


@pytest.mark.parametrize("kind", ["dnn", "rnn", "lstm"])
def test_same_seed_same_weights(kind: str) -> None:
    data, pipeline = _separable(), _two_feature_pipeline()
    _, first = train(_config(kind), data, pipeline)
    _, second = train(_config(kind), data, pipeline)
    _, other = train(_config(kind, seed=4), data, pipeline)
    assert first.checksum == second.checksum
    assert first.to_dict(timing=False) == second.to_dict(timing=False)
    assert first.checksum != other.checksum


def test_report_lists_defaulted_hyperparams() -> None:
    cfg = _config(epochs=1, optimizer__kind="adam", optimizer__learning_rate=0.01)
    _, report = train(cfg, _separable(), _two_feature_pipeline())
    assert report.optimizer == "adam"
    assert "learning_rate" not in report.defaulted_hyperparams
    assert "beta1" in report.defaulted_hyperparams
    assert "wall_seconds" not in report.to_dict(timing=False)


def test_nan_input_raises_divergence() -> None:
    data = _separable()
    data.values[0, 0] = np.nan
    cfg = _config(epochs=1, training__batch_size=64)
    with pytest.raises(NumericDivergence) as err:
        train(cfg, data, _two_feature_pipeline())
    assert (err.value.epoch, err.value.batch) == (1, 0)
    assert "learning rate" in str(err.value)


def test_train_rejects_bad_inputs() -> None:
    pipeline = _two_feature_pipeline()
    with pytest.raises(ConfigInvalid):
        train(_config(epochs=0), _separable(), pipeline)
    cfg = _config()
    cfg.training.seed = None
    with pytest.raises(ConfigInvalid):
        train(cfg, _separable(), pipeline)
    with pytest.raises(EmptyDataset):
        train(_config(), FeatureMatrix(np.zeros((0, 2)), np.zeros(0)), pipeline)
    with pytest.raises(SchemaMismatch):
        train(_config(), FeatureMatrix(np.zeros((4, 3)), np.zeros(4)), pipeline)
    with pytest.raises(SchemaMismatch):
        train(_config(), FeatureMatrix(np.zeros((2, 2)), np.array([0, 2])), pipeline)


def test_epoch_order_is_seeded_per_epoch() -> None:
    a = epoch_order(9, 1, 50)
    assert sorted(a.tolist()) == list(range(50))
    assert np.array_equal(a, epoch_order(9, 1, 50))
    assert not np.array_equal(a, epoch_order(9, 2, 50))
    assert not np.array_equal(a, epoch_order(10, 1, 50))
