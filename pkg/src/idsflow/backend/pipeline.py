from __future__ import annotations

import csv
import io
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .artifact import ModelArtifact, save_model
from .dataset import SCHEMAS, LabeledDataset, load_csv, load_taxonomy, split, stratified_subsample
from .errors import ConfigInvalid, IdsFlowError, SchemaMismatch
from .metrics import MetricsReport, build_report
from .optim import OPTIMIZER_KINDS, HyperParams, OptimizerKind
from .paths import AppPaths
from .preprocess import FeatureMatrix, PipelineState, apply_pipeline, fit_pipeline
from .report import BaselineTable, ReportEntry, emit_report
from .schema import ExperimentConfig, OptimizerConfig
from .training import TrainReport, predict_proba, train
from .workspace import RunWorkspace, atomic_write_text

logger = logging.getLogger(__name__)

LogCallback = Callable[[str], None]
StageCallback = Callable[[str], None]

OFFICIAL_TEST = "official-test"


def split_protocol(fraction: float) -> str:
    return f"random-split:{fraction:g}"


# ---------------------------------------------------------------- evaluation


def evaluate_matrix(
    artifact: ModelArtifact, matrix: FeatureMatrix, *, protocol: str = "unspecified"
) -> MetricsReport:
    width = artifact.pipeline.encoder.total_encoded_width
    if matrix.cols != width:
        raise SchemaMismatch(f"Matrix has {matrix.cols} columns, model expects {width}")
    k = len(artifact.class_names)
    if matrix.rows and (matrix.class_indices.min() < 0 or matrix.class_indices.max() >= k):
        raise SchemaMismatch(f"Labels outside the model's {k} classes")
    probs = predict_proba(artifact.model, matrix.values)
    return build_report(
        matrix.class_indices,
        probs,
        artifact.class_names,
        artifact.normal_class,
        protocol=protocol,
    )


def evaluate(
    artifact: ModelArtifact, test: LabeledDataset, *, protocol: str = OFFICIAL_TEST
) -> MetricsReport:
    """Encode `test` with the stored pipeline (never refitted) and score it."""
    if tuple(test.class_names) != tuple(artifact.class_names):
        raise SchemaMismatch(
            f"Test labels {test.class_names} do not match model classes {artifact.class_names}"
        )
    matrix = apply_pipeline(artifact.pipeline, test)
    return evaluate_matrix(artifact, matrix, protocol=protocol)


def metrics_document(report: MetricsReport, *, dataset: str, model: str) -> dict[str, Any]:
    return {"dataset": dataset, "model": model, **report.to_dict()}


def write_metrics(
    report: MetricsReport, json_path: Path, csv_path: Path, *, dataset: str, model: str
) -> None:
    doc = metrics_document(report, dataset=dataset, model=model)
    atomic_write_text(json_path, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scope", "class", "metric", "value"])
    for name, value in report.overall.to_dict().items():
        if name != "binary_counts":
            w.writerow(["overall", "", name, _cell(value)])
    for cm in report.per_class:
        label = report.class_names[cm.class_index]
        roc = report.roc.get(cm.class_index)
        for name in ("support", "accuracy", "detection_rate", "precision", "f1"):
            w.writerow(["class", label, name, _cell(getattr(cm, name))])
        w.writerow(["class", label, "auc", _cell(roc.auc if roc else None)])
    atomic_write_text(csv_path, buf.getvalue())


def write_predictions(report: MetricsReport, path: Path) -> None:
    """row, true_class, predicted_class, then one probability column per class."""
    if report.y_true is None or report.probabilities is None:
        raise SchemaMismatch("report carries no raw predictions")
    probs = report.probabilities
    predicted = np.argmax(probs, axis=1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "true_class", "predicted_class", *(f"p_{c}" for c in range(probs.shape[1]))])
    for i in range(probs.shape[0]):
        w.writerow([i, int(report.y_true[i]), int(predicted[i]), *map(repr, probs[i].tolist())])
    atomic_write_text(path, buf.getvalue())


def write_roc(report: MetricsReport, roc_dir: Path) -> list[Path]:
    """One fpr/tpr/threshold CSV per class, or a `.degenerate` marker when undefined."""
    roc_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for c, name in enumerate(report.class_names):
        stem = f"roc_{c}_{name}"
        curve = report.roc.get(c)
        if curve is None:
            path = roc_dir / f"{stem}.degenerate"
            atomic_write_text(path, report.degenerate.get(c, "ROC undefined") + "\n")
        else:
            path = roc_dir / f"{stem}.csv"
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["fpr", "tpr", "threshold"])
            for f, t, th in zip(curve.fpr, curve.tpr, curve.thresholds):
                w.writerow([repr(float(f)), repr(float(t)), repr(float(th))])
            atomic_write_text(path, buf.getvalue())
        written.append(path)
    return written


def _cell(value: Any) -> str:
    return "null" if value is None else repr(value) if isinstance(value, float) else str(value)


# ---------------------------------------------------------------- optimizer comparison


@dataclass
class OptimizerRow:
    kind: OptimizerKind
    report: MetricsReport | None = None
    train_report: TrainReport | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.report is not None

    def to_dict(self) -> dict[str, Any]:
        overall = self.report.overall.to_dict() if self.report else None
        return {
            "optimizer": self.kind,
            "status": "ok" if self.ok else "failed",
            "error": self.error,
            "overall": overall,
            "final_train_accuracy": self.train_report.final_accuracy if self.train_report else None,
            "defaulted_hyperparams": (
                self.train_report.defaulted_hyperparams if self.train_report else None
            ),
        }


def _rank_key(row: OptimizerRow) -> tuple:
    order = OPTIMIZER_KINDS.index(row.kind)
    if row.report is None:
        return (1, 0.0, 0.0, 0.0, order)
    m = row.report.overall
    dr = m.detection_rate if m.detection_rate is not None else -1.0
    far = m.far if m.far is not None else float("inf")
    return (0, -m.accuracy, -dr, far, order)


@dataclass
class ComparisonTable:
    rows: list[OptimizerRow] = field(default_factory=list)  # ranked
    protocol: str = "unspecified"

    @property
    def adamax_ranks_first(self) -> bool:
        return bool(self.rows) and self.rows[0].ok and self.rows[0].kind == "adamax"

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol,
            "ranking": "accuracy desc, detection_rate desc, far asc, then optimizer order",
            "rows": [dict(rank=i + 1, **r.to_dict()) for i, r in enumerate(self.rows)],
            "observations": {"adamax_ranks_first": self.adamax_ranks_first},
        }

    def write(self, json_path: Path, csv_path: Path) -> None:
        atomic_write_text(json_path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ("accuracy", "detection_rate", "precision", "f1", "far")
        w.writerow(["rank", "optimizer", "status", *cols, "error"])
        for i, row in enumerate(self.rows, start=1):
            o = row.report.overall.to_dict() if row.report else {}
            w.writerow([i, row.kind, "ok" if row.ok else "failed",
                        *(_cell(o.get(c)) for c in cols), row.error or ""])
        atomic_write_text(csv_path, buf.getvalue())


def compare_optimizers(
    base_config: ExperimentConfig,
    train_matrix: FeatureMatrix,
    test_matrix: FeatureMatrix,
    pipeline: PipelineState,
    *,
    threads: int = 1,
    protocol: str = "unspecified",
    on_log: LogCallback | None = None,
) -> ComparisonTable:
    """Train the same model, seed and data once per optimizer kind, then rank the results.

    Each optimizer runs with its own default hyperparameters. A failed run keeps
    its row with the error text; the others still complete.
    """
    base_config.validate()
    lock = threading.Lock()

    def emit(line: str) -> None:
        with lock:
            if on_log:
                on_log(line)

    defaulted = base_config.optimizer.defaulted()
    ignored = [f.name for f in fields(HyperParams) if f.name not in defaulted]
    if ignored:
        message = f"ignoring optimizer {', '.join(ignored)}; every kind runs with its defaults"
        logger.warning(message)
        emit(message)

    def run_one(kind: OptimizerKind) -> OptimizerRow:
        cfg = ExperimentConfig.from_dict(base_config.to_dict())
        cfg.optimizer = OptimizerConfig(kind=kind)
        try:
            artifact, report = train(
                cfg, train_matrix, pipeline, on_log=lambda line: emit(f"[{kind}] {line}")
            )
            metrics = evaluate_matrix(artifact, test_matrix, protocol=protocol)
        except IdsFlowError as e:
            logger.warning("%s run failed: %s", kind, e)
            emit(f"[{kind}] failed: {e}")
            return OptimizerRow(kind=kind, error=str(e))
        return OptimizerRow(kind=kind, report=metrics, train_report=report)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(run_one, OPTIMIZER_KINDS))
    return ComparisonTable(rows=sorted(rows, key=_rank_key), protocol=protocol)


# ---------------------------------------------------------------- end to end


@dataclass(frozen=True)
class ExperimentResult:
    run_dir: Path
    protocol: str
    metrics: MetricsReport
    train_report: TrainReport


class ExperimentPipeline:
    """Load, preprocess, train, evaluate and report in one run directory."""

    def __init__(self, *, paths: AppPaths | None = None) -> None:
        self.paths = paths or AppPaths()

    def run(
        self,
        config: ExperimentConfig,
        *,
        out_dir: str | Path | None = None,
        on_log: LogCallback | None = None,
        on_stage: StageCallback | None = None,
    ) -> ExperimentResult:
        config.validate()
        ds_cfg = config.dataset
        if not ds_cfg.train_csv:
            raise ConfigInvalid("dataset.train_csv is required")
        if config.training.eval_split is None and not ds_cfg.test_csv:
            raise ConfigInvalid("Set dataset.test_csv or training.eval_split to choose a test set")

        if out_dir is not None:
            workspace = RunWorkspace(Path(out_dir)).ensure()
        else:
            self.paths.ensure()
            workspace = RunWorkspace.create(
                self.paths.runs_dir, name=f"{ds_cfg.name}-{config.model.kind}"
            )
        log_path = workspace.logs_dir / "run.log"

        def emit(line: str) -> None:
            with open(log_path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
            if on_log:
                on_log(line)

        def stage(name: str) -> None:
            emit(f"=== {name} ===")
            if on_stage:
                on_stage(name)

        seed = config.seed

        stage("Load")
        schema = SCHEMAS[ds_cfg.name]
        taxonomy = load_taxonomy(
            schema,
            self.paths.resolve_input(ds_cfg.taxonomy) if ds_cfg.taxonomy else None,
            label_mode=ds_cfg.label_mode,
        )
        data = load_csv(
            self.paths.resolve_input(ds_cfg.train_csv), schema, taxonomy, ds_cfg.has_header
        )
        emit(f"Loaded {len(data)} training records")
        if ds_cfg.subsample is not None:
            data = stratified_subsample(data, ds_cfg.subsample, seed)
            emit(f"Stratified subsample: {len(data)} records")

        if config.training.eval_split is not None:
            protocol = split_protocol(config.training.eval_split)
            train_ds, test_ds = split(data, config.training.eval_split, seed)
        else:
            protocol = OFFICIAL_TEST
            train_ds = data
            test_ds = load_csv(
                self.paths.resolve_input(ds_cfg.test_csv), schema, taxonomy, ds_cfg.has_header
            )
        emit(f"Protocol {protocol}: {len(train_ds)} train / {len(test_ds)} test records")

        stage("Preprocess")
        state, train_matrix = fit_pipeline(train_ds)
        test_matrix = apply_pipeline(state, test_ds)
        state.save(workspace.pipeline_path)
        emit(f"Encoded width {train_matrix.cols}")

        stage("Train")
        artifact, train_report = train(config, train_matrix, state, on_log=emit)
        save_model(artifact, workspace.model_path)
        atomic_write_text(
            workspace.train_report_path,
            json.dumps(train_report.to_dict(timing=False), indent=2, sort_keys=True) + "\n",
        )

        stage("Evaluate")
        metrics = evaluate_matrix(artifact, test_matrix, protocol=protocol)
        write_metrics(
            metrics, workspace.metrics_json, workspace.metrics_csv,
            dataset=ds_cfg.name, model=config.model.kind,
        )
        write_predictions(metrics, workspace.predictions_csv)
        write_roc(metrics, workspace.roc_dir)
        o = metrics.overall
        emit(f"accuracy={o.accuracy:.4f} detection_rate={_cell(o.detection_rate)} far={_cell(o.far)}")

        stage("Report")
        entry = ReportEntry.from_report(config.model.kind, metrics, dataset=ds_cfg.name)
        emit_report([entry], BaselineTable.shipped(), workspace.root)

        emit("Done.")
        return ExperimentResult(
            run_dir=workspace.root, protocol=protocol, metrics=metrics, train_report=train_report
        )
