from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

from idsflow.backend.artifact import ModelArtifact, load_model, save_model
from idsflow.backend.dataset import (
    BINARY_CLASSES,
    SCHEMAS,
    class_distribution,
    load_csv,
    load_taxonomy,
    split,
    split_indices,
    stratified_subsample,
)
from idsflow.backend.downloads import fetch_dataset
from idsflow.backend.errors import (
    ArtifactError,
    ConfigInvalid,
    IdsFlowError,
    NumericDivergence,
    ValidationError,
)
from idsflow.backend.metrics import MetricsReport
from idsflow.backend.optim import OPTIMIZER_KINDS
from idsflow.backend.paths import AppPaths
from idsflow.backend.pipeline import (
    OFFICIAL_TEST,
    ExperimentPipeline,
    compare_optimizers,
    evaluate,
    evaluate_matrix,
    split_protocol,
    write_metrics,
    write_predictions,
    write_roc,
)
from idsflow.backend.preprocess import FeatureMatrix, PipelineState, apply_pipeline, fit_pipeline
from idsflow.backend.report import BaselineTable, ReportEntry, emit_report
from idsflow.backend.schema import MODEL_KINDS, ExperimentConfig, load_config
from idsflow.backend.training import train
from idsflow.backend.workspace import RunWorkspace, atomic_write_text

logger = logging.getLogger("idsflow")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_DIVERGED = 3

HELD_OUT_MATRIX = "held-out-matrix"

Handler = Callable[[argparse.Namespace], dict[str, Any]]

# flag attribute -> config key; only flags actually given override the config
CONFIG_FLAGS: tuple[tuple[str, str], ...] = (
    ("dataset", "dataset.name"),
    ("label_mode", "dataset.label_mode"),
    ("subsample", "dataset.subsample"),
    ("model_kind", "model.kind"),
    ("hidden_dim", "model.hidden_dim"),
    ("time_steps", "model.time_steps"),
    ("optimizer", "optimizer.kind"),
    ("learning_rate", "optimizer.learning_rate"),
    ("epochs", "training.epochs"),
    ("batch_size", "training.batch_size"),
    ("seed", "training.seed"),
    ("clip_norm", "training.clip_norm"),
    ("eval_split", "training.eval_split"),
)


def _stderr_line(line: str) -> None:
    print(line, file=sys.stderr, flush=True)


def _paths(args: argparse.Namespace) -> AppPaths:
    return AppPaths(data_dir_override=args.data_dir)


def _build_config(args: argparse.Namespace, state: PipelineState | None = None) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = [
        f"{key}={json.dumps(getattr(args, attr))}"
        for attr, key in CONFIG_FLAGS
        if getattr(args, attr, None) is not None
    ]
    cfg = cfg.with_overrides(overrides + list(getattr(args, "set", None) or []))
    if state is not None:
        if getattr(args, "config", None) and cfg.dataset.name != state.schema_name:
            raise ConfigInvalid(
                f"Config names dataset {cfg.dataset.name!r} but the pipeline was fitted on "
                f"{state.schema_name!r}"
            )
        cfg.dataset.name = state.schema_name  # type: ignore[assignment]
        if state.class_names:
            cfg.dataset.label_mode = (
                "binary" if tuple(state.class_names) == BINARY_CLASSES else "multiclass"
            )
    return cfg


def _load_test_input(
    args: argparse.Namespace, artifact: ModelArtifact
) -> MetricsReport:
    if args.test_matrix:
        matrix = FeatureMatrix.load(_paths(args).resolve_input(args.test_matrix))
        return evaluate_matrix(artifact, matrix, protocol=args.protocol or HELD_OUT_MATRIX)
    schema = SCHEMAS[artifact.pipeline.schema_name]
    label_mode = "binary" if tuple(artifact.class_names) == BINARY_CLASSES else "multiclass"
    taxonomy = load_taxonomy(schema, args.taxonomy, label_mode=label_mode)
    test = load_csv(_paths(args).resolve_input(args.test_csv), schema, taxonomy, args.has_header)
    return evaluate(artifact, test, protocol=args.protocol or OFFICIAL_TEST)


# ---------------------------------------------------------------- commands


def cmd_preprocess(args: argparse.Namespace) -> dict[str, Any]:
    paths = _paths(args)
    schema = SCHEMAS[args.dataset]
    taxonomy = load_taxonomy(schema, args.taxonomy, label_mode=args.label_mode)
    data = load_csv(paths.resolve_input(args.train_csv), schema, taxonomy, args.has_header)
    records = len(data)

    if (args.subsample is not None or args.eval_split is not None) and args.seed is None:
        raise ConfigInvalid("--seed is required with --subsample or --eval-split")
    if args.subsample is not None:
        data = stratified_subsample(data, args.subsample, args.seed)
    holdout = None
    if args.eval_split is not None:
        if not args.out_holdout:
            raise ConfigInvalid("--eval-split needs --out-holdout for the held-out matrix")
        data, holdout = split(data, args.eval_split, args.seed)

    state, matrix = fit_pipeline(data)
    holdout_matrix = apply_pipeline(state, holdout) if holdout is not None else None
    # pipeline last: its presence means the matrices beside it are complete
    if holdout_matrix is not None:
        holdout_matrix.save(Path(args.out_holdout))
    matrix.save(Path(args.out_matrix))
    state.save(Path(args.out_pipeline))
    summary: dict[str, Any] = {
        "dataset": schema.name,
        "records": records,
        "train_records": matrix.rows,
        "encoded_width": matrix.cols,
        "class_distribution": {
            data.class_names[c]: n for c, n in class_distribution(data).items()
        },
        "pipeline": str(args.out_pipeline),
        "matrix": str(args.out_matrix),
    }
    if holdout is not None:
        summary["holdout"] = str(args.out_holdout)
        summary["holdout_records"] = len(holdout)
    return summary


def cmd_train(args: argparse.Namespace) -> dict[str, Any]:
    state = PipelineState.load(Path(args.pipeline))
    matrix = FeatureMatrix.load(Path(args.matrix))
    cfg = _build_config(args, state)
    artifact, report = train(cfg, matrix, state, on_log=_stderr_line)

    out_model = Path(args.out_model)
    save_model(artifact, out_model)
    report_path = Path(args.train_report) if args.train_report else out_model.with_suffix(".train.json")
    atomic_write_text(report_path, json.dumps(report.to_dict(timing=False), indent=2, sort_keys=True) + "\n")
    return {
        "model": str(out_model),
        "train_report": str(report_path),
        "checksum": report.checksum,
        "epochs": len(report.epochs),
        "final_loss": report.epochs[-1].loss,
        "final_accuracy": report.final_accuracy,
        "wall_seconds": report.wall_seconds,
    }


def cmd_evaluate(args: argparse.Namespace) -> dict[str, Any]:
    artifact = load_model(Path(args.model))
    report = _load_test_input(args, artifact)
    ws = RunWorkspace(Path(args.out_dir)).ensure()
    write_metrics(
        report, ws.metrics_json, ws.metrics_csv,
        dataset=artifact.pipeline.schema_name, model=artifact.spec.kind,
    )
    write_predictions(report, ws.predictions_csv)
    write_roc(report, ws.roc_dir)
    return {
        "protocol": report.protocol,
        "overall": report.overall.to_dict(),
        "metrics": str(ws.metrics_json),
        "predictions": str(ws.predictions_csv),
    }


def cmd_roc(args: argparse.Namespace) -> dict[str, Any]:
    artifact = load_model(Path(args.model))
    report = _load_test_input(args, artifact)
    written = write_roc(report, Path(args.out_dir))
    return {
        "files": [str(p) for p in written],
        "auc": {report.class_names[c]: r.auc for c, r in sorted(report.roc.items())},
        "degenerate": [report.class_names[c] for c in sorted(report.degenerate)],
    }


def cmd_compare(args: argparse.Namespace) -> dict[str, Any]:
    state = PipelineState.load(Path(args.pipeline))
    matrix = FeatureMatrix.load(Path(args.matrix))
    cfg = _build_config(args, state)
    cfg.validate()

    if args.test_matrix:
        train_m, test_m = matrix, FeatureMatrix.load(Path(args.test_matrix))
        protocol = HELD_OUT_MATRIX
    elif cfg.training.eval_split is not None:
        train_idx, test_idx = split_indices(matrix.rows, cfg.training.eval_split, cfg.seed)
        train_m, test_m = matrix.take(train_idx), matrix.take(test_idx)
        protocol = split_protocol(cfg.training.eval_split)
    else:
        raise ConfigInvalid("compare-optimizers needs --test-matrix or --eval-split")

    table = compare_optimizers(
        cfg, train_m, test_m, state, threads=args.threads, protocol=protocol, on_log=_stderr_line
    )
    out = Path(args.out_dir)
    table.write(out / "comparison.json", out / "comparison.csv")
    return {
        "protocol": protocol,
        "ranking": [row.kind for row in table.rows],
        "failed": [row.kind for row in table.rows if not row.ok],
        "adamax_ranks_first": table.adamax_ranks_first,
        "table": str(out / "comparison.csv"),
    }


def cmd_report(args: argparse.Namespace) -> dict[str, Any]:
    entries = [ReportEntry.from_file(p) for p in args.metrics]
    json_path, csv_path = emit_report(entries, BaselineTable.shipped(), Path(args.out_dir))
    return {"evaluations": len(entries), "json": str(json_path), "csv": str(csv_path)}


def cmd_run(args: argparse.Namespace) -> dict[str, Any]:
    cfg = _build_config(args)
    for attr in ("train_csv", "test_csv", "taxonomy"):
        value = getattr(args, attr)
        if value is not None:
            setattr(cfg.dataset, attr, value)
    pipeline = ExperimentPipeline(paths=_paths(args))
    result = pipeline.run(cfg, out_dir=args.out_dir, on_log=_stderr_line)
    return {
        "run_dir": str(result.run_dir),
        "protocol": result.protocol,
        "overall": result.metrics.overall.to_dict(),
        "checksum": result.train_report.checksum,
    }


def cmd_fetch(args: argparse.Namespace) -> dict[str, Any]:
    dest = Path(args.dest) if args.dest else _paths(args).ensure().datasets_dir
    files = fetch_dataset(args.dataset, dest, overwrite=args.overwrite)
    return {"dataset": args.dataset, "files": [str(p) for p in files]}


# ---------------------------------------------------------------- parser


def _add_config_flags(p: argparse.ArgumentParser, *, dataset: bool = False) -> None:
    p.add_argument("--config", help="Experiment config file (.json or .toml)")
    p.add_argument("--seed", type=int, help="Seed for initialization and shuffling (required)")
    p.add_argument("--model-kind", choices=MODEL_KINDS)
    p.add_argument("--optimizer", choices=OPTIMIZER_KINDS)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--hidden-dim", type=int)
    p.add_argument("--time-steps", type=int)
    p.add_argument("--clip-norm", type=float)
    p.add_argument("--eval-split", type=float, help="Hold out this fraction as the test set")
    if dataset:
        p.add_argument("--dataset", choices=tuple(SCHEMAS))
        p.add_argument("--label-mode", choices=("multiclass", "binary"))
        p.add_argument("--subsample", type=int, help="Stratified subsample size")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.FIELD=VALUE",
        help="Override any config field; may be repeated",
    )


def _add_test_input(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--test-csv", help="Raw test file, encoded with the model's stored pipeline")
    src.add_argument("--test-matrix", help="Encoded matrix written by `preprocess --out-holdout`")
    p.add_argument("--taxonomy", help="Taxonomy file (default: shipped)")
    p.add_argument("--has-header", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--protocol", help="Label recorded with the metrics")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR")
    )
    common.add_argument("--data-dir", help="Data directory (default: $IDSFLOW_DATA_DIR or per-user)")

    parser = argparse.ArgumentParser(
        prog="idsflow",
        description="Train and evaluate DNN, RNN and LSTM intrusion detectors on KDD'99, "
        "NSL-KDD and UNSW-NB15.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text, allow_abbrev=False)
        p.set_defaults(handler=handler)
        return p

    p = add("preprocess", cmd_preprocess, "Fit the encoding pipeline and write the train matrix")
    p.add_argument("--dataset", required=True, choices=tuple(SCHEMAS))
    p.add_argument("--train-csv", required=True)
    p.add_argument("--taxonomy", help="Taxonomy file (default: shipped)")
    p.add_argument("--label-mode", default="multiclass", choices=("multiclass", "binary"))
    p.add_argument("--has-header", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--subsample", type=int)
    p.add_argument("--eval-split", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-pipeline", required=True)
    p.add_argument("--out-matrix", required=True)
    p.add_argument("--out-holdout", help="Where to write the held-out matrix for --eval-split")

    p = add("train", cmd_train, "Train a model on an encoded matrix")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--train-report", help="Default: <out-model>.train.json")
    _add_config_flags(p)

    p = add("evaluate", cmd_evaluate, "Score a model; write metrics, predictions and ROC files")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    _add_test_input(p)

    p = add("compare-optimizers", cmd_compare, "Train once per optimizer and rank the results")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--test-matrix")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, default=1, help="Concurrent trainings (default 1)")
    _add_config_flags(p)

    p = add("roc", cmd_roc, "Write per-class one-vs-rest ROC curves")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    _add_test_input(p)

    p = add("report", cmd_report, "Merge metrics files with the published reference rows")
    p.add_argument("--metrics", nargs="*", default=[], help="metrics.json files from evaluate")
    p.add_argument("--out-dir", required=True)

    p = add("run", cmd_run, "Load, preprocess, train, evaluate and report in one go")
    p.add_argument("--train-csv")
    p.add_argument("--test-csv")
    p.add_argument("--taxonomy")
    p.add_argument("--out-dir", help="Run directory (default: a new one under the data dir)")
    _add_config_flags(p, dataset=True)

    p = add("fetch", cmd_fetch, "Download the public NSL-KDD or KDD'99 files")
    p.add_argument("--dataset", required=True, choices=tuple(SCHEMAS))
    p.add_argument("--dest", help="Target directory (default: <data-dir>/datasets)")
    p.add_argument("--overwrite", action="store_true")

    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse: 0 for --help, 2 for usage errors
        return e.code if isinstance(e.code, int) else EXIT_INPUT

    _configure_logging(args.log_level)
    try:
        summary = args.handler(args)
    except NumericDivergence as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValidationError, ArtifactError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except IdsFlowError as e:
        logger.exception("internal error")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # noqa: BLE001
        logger.exception("unexpected failure")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL

    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
