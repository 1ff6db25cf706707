from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from idsflow.backend.artifact import dumps_model, load_model, save_model
from idsflow.backend.dataset import SCHEMAS, load_csv, load_taxonomy
from idsflow.backend.errors import CorruptArtifact, VersionMismatch
from idsflow.backend.pipeline import evaluate
from idsflow.backend.preprocess import fit_pipeline
from idsflow.backend.schema import ExperimentConfig
from idsflow.backend.training import train


def _load(path: Path):
    schema = SCHEMAS["nslkdd"]
    return load_csv(path, schema, load_taxonomy(schema))


@pytest.fixture(params=["dnn", "lstm"])
def trained(request, toy_nsl_csv: Path):
    cfg = ExperimentConfig.defaults("nslkdd", request.param, seed=17)
    cfg.model.hidden_dim = 6
    cfg.model.time_steps = 2 if request.param == "lstm" else 1
    cfg.training.epochs = 2
    cfg.training.batch_size = 16
    state, matrix = fit_pipeline(_load(toy_nsl_csv))
    artifact, _ = train(cfg, matrix, state)
    return artifact


def test_save_load_save_is_byte_identical(tmp_path: Path, trained) -> None:
    first = save_model(trained, tmp_path / "model.json")
    reloaded = load_model(first)
    second = save_model(reloaded, tmp_path / "again.json")
    assert first.read_bytes() == second.read_bytes()
    assert dumps_model(reloaded) == first.read_text(encoding="utf-8")


def test_reloaded_model_scores_identically(tmp_path: Path, trained, toy_nsl_test_csv: Path) -> None:
    save_model(trained, tmp_path / "model.json")
    reloaded = load_model(tmp_path / "model.json")
    test = _load(toy_nsl_test_csv)
    before = evaluate(trained, test)
    after = evaluate(reloaded, test)
    assert np.array_equal(before.probabilities, after.probabilities)
    assert before.to_dict() == after.to_dict()
    assert reloaded.config.to_dict() == trained.config.to_dict()
    assert reloaded.normal_class == 4


def test_truncated_artifact_is_corrupt(tmp_path: Path, trained) -> None:
    path = save_model(trained, tmp_path / "model.json")
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CorruptArtifact):
        load_model(path)


def test_tampered_tensor_fails_checksum(tmp_path: Path, trained) -> None:
    path = save_model(trained, tmp_path / "model.json")
    doc = json.loads(path.read_text(encoding="utf-8"))
    doc["parameters"][0]["shape"] = [1]
    path.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(CorruptArtifact):
        load_model(path)


def test_unknown_version_and_format(tmp_path: Path, trained) -> None:
    path = save_model(trained, tmp_path / "model.json")
    doc = json.loads(path.read_text(encoding="utf-8"))
    doc["version"] = 99
    path.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(VersionMismatch) as err:
        load_model(path)
    assert err.value.found == 99

    path.write_text(json.dumps({"format": "something-else"}), encoding="utf-8")
    with pytest.raises(CorruptArtifact):
        load_model(path)
