from __future__ import annotations

import csv
import json
from pathlib import Path

from idsflow.backend.report import REFERENCE_LABEL, BaselineTable, ReportEntry, emit_report


def _entry(dataset: str = "kdd99") -> ReportEntry:
    metrics = {
        "protocol": "official-test",
        "overall": {
            "accuracy": 0.5,
            "detection_rate": 0.25,
            "precision": None,
            "f1": None,
            "far": 0.0,
        },
    }
    return ReportEntry(name="rnn", metrics=metrics, dataset=dataset)


def _csv_rows(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_shipped_reference_values() -> None:
    table = BaselineTable.shipped()
    assert table.label == REFERENCE_LABEL
    rnn = [r for r in table.rows("kdd99") if r.method == "RNN"]
    assert len(rnn) == 1
    assert (rnn[0].accuracy, rnn[0].detection_rate, rnn[0].f1, rnn[0].fpr) == (
        98.73, 99.57, 98.87, 2.33,
    )
    savaer = [r for r in table.rows("nslkdd") if r.method == "SAVAER-DNN"]
    assert savaer[0].accuracy == 89.36
    assert savaer[0].origin == "prior-work"


def test_report_puts_ours_beside_published(tmp_path: Path) -> None:
    json_path, csv_path = emit_report([_entry()], BaselineTable.shipped(), tmp_path)
    rows = _csv_rows(csv_path)
    ours = rows[0]
    assert ours["origin"] == "ours"
    assert ours["accuracy"] == "50.0"
    assert ours["detection_rate"] == "25.0"
    assert ours["f1"] == "NA"
    assert ours["protocol"] == "official-test"

    published = rows[1:]
    assert published
    assert {r["dataset"] for r in published} == {"kdd99"}
    assert all(r["note"] == REFERENCE_LABEL for r in published)
    rnn = next(r for r in published if r["method"] == "RNN")
    assert rnn["accuracy"] == "98.73"
    assert rnn["far"] == "2.33"

    doc = json.loads(json_path.read_text(encoding="utf-8"))
    assert doc["published"]["label"] == REFERENCE_LABEL
    assert doc["ours"]["units"] == "percent"
    assert "rnn" in doc["ours"]["metrics"]


def test_empty_report_lists_every_baseline(tmp_path: Path) -> None:
    table = BaselineTable.shipped()
    _, csv_path = emit_report([], table, tmp_path, stem="baselines")
    rows = _csv_rows(csv_path)
    assert len(rows) == len(table.comparisons)
    assert {r["dataset"] for r in rows} == {"kdd99", "nslkdd"}
    assert (tmp_path / "baselines.json").exists()


def test_entry_from_metrics_file(tmp_path: Path) -> None:
    path = tmp_path / "metrics.json"
    path.write_text(
        json.dumps({"dataset": "nslkdd", "model": "lstm", **_entry().metrics}), encoding="utf-8"
    )
    entry = ReportEntry.from_file(path)
    assert entry.name == "lstm"
    assert entry.dataset == "nslkdd"
