"""Side-by-side reports of our evaluations and the shipped published reference rows."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from .errors import ValidationError
from .metrics import MetricsReport
from .workspace import atomic_write_text

logger = logging.getLogger(__name__)

REFERENCE_LABEL = "published reference values, not reproduced"

CSV_COLUMNS = (
    "origin", "source", "dataset", "method", "protocol",
    "accuracy", "detection_rate", "precision", "f1", "far", "note",
)


@dataclass(frozen=True)
class BaselineRow:
    source: str
    dataset: str
    method: str
    origin: str
    accuracy: float | None
    detection_rate: float | None
    f1: float | None
    fpr: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source,
            "dataset": self.dataset,
            "method": self.method,
            "origin": self.origin,
            "accuracy": self.accuracy,
            "detection_rate": self.detection_rate,
            "f1": self.f1,
            "fpr": self.fpr,
        }


@dataclass(frozen=True)
class BaselineTable:
    label: str
    comparisons: tuple[BaselineRow, ...]
    overall: tuple[dict[str, Any], ...] = ()
    per_class: tuple[dict[str, Any], ...] = ()

    @staticmethod
    def shipped() -> "BaselineTable":
        text = (resources.files("idsflow.backend") / "baselines.json").read_text(encoding="utf-8")
        return BaselineTable.from_dict(json.loads(text))

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "BaselineTable":
        return BaselineTable(
            label=data.get("label", REFERENCE_LABEL),
            comparisons=tuple(BaselineRow(**row) for row in data["comparisons"]),
            overall=tuple(data.get("overall", ())),
            per_class=tuple(data.get("per_class", ())),
        )

    def rows(self, dataset: str | None = None) -> list[BaselineRow]:
        return [r for r in self.comparisons if dataset is None or r.dataset == dataset]

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "units": "percent",
            "comparisons": [r.to_dict() for r in self.comparisons],
            "overall": list(self.overall),
            "per_class": list(self.per_class),
        }


@dataclass(frozen=True)
class ReportEntry:
    """One of our evaluations: a name plus a metrics document (fractions, not percent)."""

    name: str
    metrics: dict[str, Any]
    dataset: str | None = None

    @staticmethod
    def from_report(name: str, report: MetricsReport, dataset: str | None = None) -> "ReportEntry":
        return ReportEntry(name=name, metrics=report.to_dict(), dataset=dataset)

    @staticmethod
    def from_file(path: str | Path) -> "ReportEntry":
        p = Path(path)
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ValidationError(f"{p} is not a metrics document: {e}") from e
        if "overall" not in doc:
            raise ValidationError(f"{p} is not a metrics document (no 'overall' section)")
        name = doc.get("model") or p.stem
        return ReportEntry(name=str(name), metrics=doc, dataset=doc.get("dataset"))


def _percent(value: float | None) -> float | None:
    return None if value is None else 100.0 * value


def _fmt(value: Any) -> str:
    return "NA" if value is None else str(value)


def _our_row(entry: ReportEntry) -> dict[str, Any]:
    overall = entry.metrics["overall"]
    return {
        "origin": "ours",
        "source": "evaluation",
        "dataset": entry.dataset,
        "method": entry.name,
        "protocol": entry.metrics.get("protocol"),
        "accuracy": _percent(overall.get("accuracy")),
        "detection_rate": _percent(overall.get("detection_rate")),
        "precision": _percent(overall.get("precision")),
        "f1": _percent(overall.get("f1")),
        "far": _percent(overall.get("far")),
        "note": "",
    }


def _baseline_row(row: BaselineRow, label: str) -> dict[str, Any]:
    # published tables report FPR; for these benchmarks it is the same quantity as FAR
    return {
        "origin": row.origin,
        "source": row.source,
        "dataset": row.dataset,
        "method": row.method,
        "protocol": None,
        "accuracy": row.accuracy,
        "detection_rate": row.detection_rate,
        "precision": None,
        "f1": row.f1,
        "far": row.fpr,
        "note": label,
    }


def emit_report(
    reports: Sequence[ReportEntry],
    baselines: BaselineTable,
    out_dir: str | Path,
    *,
    stem: str = "report",
) -> tuple[Path, Path]:
    """Write `<stem>.json` and `<stem>.csv`; our values are converted to percent."""
    out = Path(out_dir)
    datasets = {e.dataset for e in reports if e.dataset}
    published = [
        r for r in baselines.comparisons if not datasets or r.dataset in datasets
    ]
    ours = [_our_row(e) for e in reports]
    theirs = [_baseline_row(r, baselines.label) for r in published]

    document = {
        "ours": {
            "units": "percent",
            "rows": ours,
            "metrics": {e.name: e.metrics for e in reports},
        },
        "published": {
            "label": baselines.label,
            "units": "percent",
            "rows": theirs,
            "overall": [r for r in baselines.overall if not datasets or r["dataset"] in datasets],
            "per_class": [
                r for r in baselines.per_class if not datasets or r["dataset"] in datasets
            ],
        },
    }
    json_path = out / f"{stem}.json"
    csv_path = out / f"{stem}.csv"
    atomic_write_text(json_path, json.dumps(document, indent=2, sort_keys=True) + "\n")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in ours + theirs:
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    atomic_write_text(csv_path, buf.getvalue())

    logger.info("Wrote report with %d evaluation(s) and %d reference rows", len(ours), len(theirs))
    return json_path, csv_path
