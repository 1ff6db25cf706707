from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from idsflow.frontend.cli import main
from idsflow.backend.preprocess import FeatureMatrix


def _run(capsys: pytest.CaptureFixture[str], *argv: str) -> tuple[int, dict, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    summary = json.loads(captured.out) if code == 0 and captured.out.strip() else {}
    return code, summary, captured.err


@pytest.fixture
def prepared(tmp_path: Path, toy_nsl_csv: Path, capsys: pytest.CaptureFixture[str]) -> Path:
    code, summary, _ = _run(
        capsys,
        "preprocess",
        "--dataset", "nslkdd",
        "--train-csv", str(toy_nsl_csv),
        "--out-pipeline", str(tmp_path / "pipeline.json"),
        "--out-matrix", str(tmp_path / "train.npy"),
    )
    assert code == 0
    assert summary["encoded_width"] == 48
    assert summary["class_distribution"]["U2R"] == 12
    return tmp_path


def _train_args(work: Path, out: str, *extra: str) -> list[str]:
    return [
        "train",
        "--pipeline", str(work / "pipeline.json"),
        "--matrix", str(work / "train.npy"),
        "--out-model", str(work / out),
        "--seed", "3",
        "--epochs", "2",
        "--hidden-dim", "8",
        "--batch-size", "16",
        *extra,
    ]


def test_train_evaluate_report(
    prepared: Path, toy_nsl_test_csv: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    code, summary, err = _run(capsys, *_train_args(prepared, "model.json"))
    assert code == 0
    assert summary["epochs"] == 2
    assert err.count("epoch,") == 2
    assert (prepared / "model.train.json").exists()

    eval_dir = prepared / "eval"
    code, summary, _ = _run(
        capsys,
        "evaluate",
        "--model", str(prepared / "model.json"),
        "--test-csv", str(toy_nsl_test_csv),
        "--out-dir", str(eval_dir),
    )
    assert code == 0
    assert summary["protocol"] == "official-test"
    assert 0.0 <= summary["overall"]["accuracy"] <= 1.0
    assert (eval_dir / "metrics.csv").exists()
    assert len(list((eval_dir / "roc").iterdir())) == 5

    code, summary, _ = _run(
        capsys,
        "report",
        "--metrics", str(eval_dir / "metrics.json"),
        "--out-dir", str(prepared / "report"),
    )
    assert code == 0
    assert summary["evaluations"] == 1
    assert (prepared / "report" / "report.csv").exists()


def test_training_twice_writes_identical_bytes(
    prepared: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    assert _run(capsys, *_train_args(prepared, "a.json"))[0] == 0
    assert _run(capsys, *_train_args(prepared, "b.json"))[0] == 0
    assert (prepared / "a.json").read_bytes() == (prepared / "b.json").read_bytes()
    assert (prepared / "a.train.json").read_bytes() == (prepared / "b.train.json").read_bytes()


def test_zero_epochs_is_a_config_error(prepared: Path, capsys: pytest.CaptureFixture[str]) -> None:
    code, _, err = _run(capsys, *_train_args(prepared, "m.json", "--epochs", "0"))
    assert code == 2
    assert "epochs" in err
    assert not (prepared / "m.json").exists()


def test_missing_seed_is_a_config_error(prepared: Path, capsys: pytest.CaptureFixture[str]) -> None:
    args = _train_args(prepared, "m.json")
    i = args.index("--seed")
    del args[i : i + 2]
    code, _, err = _run(capsys, *args)
    assert code == 2
    assert "seed" in err


def test_missing_input_names_the_path(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    missing = tmp_path / "nowhere.txt"
    code, _, err = _run(
        capsys,
        "preprocess",
        "--dataset", "nslkdd",
        "--train-csv", str(missing),
        "--out-pipeline", str(tmp_path / "p.json"),
        "--out-matrix", str(tmp_path / "m.npy"),
    )
    assert code == 2
    assert str(missing) in err


def test_failed_matrix_write_leaves_no_pipeline(
    tmp_path: Path, toy_nsl_csv: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    blocked = tmp_path / "train.npy"
    blocked.mkdir()
    code, _, _ = _run(
        capsys,
        "preprocess",
        "--dataset", "nslkdd",
        "--train-csv", str(toy_nsl_csv),
        "--out-pipeline", str(tmp_path / "pipeline.json"),
        "--out-matrix", str(blocked),
    )
    assert code == 2
    assert not (tmp_path / "pipeline.json").exists()
    assert not list(tmp_path.glob(".*.tmp"))


def test_divergence_exit_code(prepared: Path, capsys: pytest.CaptureFixture[str]) -> None:
    matrix = FeatureMatrix.load(prepared / "train.npy")
    matrix.values[0, 0] = np.nan
    matrix.save(prepared / "train.npy")
    code, _, err = _run(capsys, *_train_args(prepared, "m.json"))
    assert code == 3
    assert "diverged" in err


def test_compare_optimizers_with_eval_split(
    prepared: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    code, summary, _ = _run(
        capsys,
        "compare-optimizers",
        "--pipeline", str(prepared / "pipeline.json"),
        "--matrix", str(prepared / "train.npy"),
        "--out-dir", str(prepared / "cmp"),
        "--seed", "1",
        "--epochs", "1",
        "--hidden-dim", "4",
        "--eval-split", "0.25",
        "--threads", "2",
    )
    assert code == 0
    assert len(summary["ranking"]) == 7
    assert summary["protocol"] == "random-split:0.25"
    lines = (prepared / "cmp" / "comparison.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 8


def test_holdout_matrix_flow(
    tmp_path: Path, toy_nsl_csv: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    code, summary, _ = _run(
        capsys,
        "preprocess",
        "--dataset", "nslkdd",
        "--train-csv", str(toy_nsl_csv),
        "--label-mode", "binary",
        "--eval-split", "0.2",
        "--seed", "4",
        "--out-pipeline", str(tmp_path / "pipeline.json"),
        "--out-matrix", str(tmp_path / "train.npy"),
        "--out-holdout", str(tmp_path / "holdout.npy"),
    )
    assert code == 0
    assert summary["holdout_records"] == 12
    assert set(summary["class_distribution"]) == {"attack", "normal"}

    assert _run(capsys, *_train_args(tmp_path, "model.json"))[0] == 0
    code, summary, _ = _run(
        capsys,
        "roc",
        "--model", str(tmp_path / "model.json"),
        "--test-matrix", str(tmp_path / "holdout.npy"),
        "--out-dir", str(tmp_path / "roc"),
    )
    assert code == 0
    assert set(summary["auc"]) | set(summary["degenerate"]) == {"attack", "normal"}


def test_help_and_usage_errors(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["--help"]) == 0
    assert main(["train", "--help"]) == 0
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["train", "--pipeline", "p.json"]) == 2
    capsys.readouterr()


def test_corrupt_model_exit_code(tmp_path: Path, toy_nsl_test_csv: Path, capsys) -> None:
    model = tmp_path / "model.json"
    model.write_text("{", encoding="utf-8")
    code, _, err = _run(
        capsys,
        "evaluate",
        "--model", str(model),
        "--test-csv", str(toy_nsl_test_csv),
        "--out-dir", str(tmp_path / "eval"),
    )
    assert code == 2
    assert "not JSON" in err
