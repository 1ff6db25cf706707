"""Seeded mini-batch training for the three classifier kinds."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .artifact import ModelArtifact
from .errors import EmptyDataset, NumericDivergence, SchemaMismatch
from .models import Classifier, ModelSpec, build_model, parameter_checksum
from .optim import Optimizer, clip_global_norm
from .preprocess import FeatureMatrix, PipelineState
from .schema import ExperimentConfig

logger = logging.getLogger(__name__)

LogCallback = Callable[[str], None]

PREDICT_CHUNK = 8192


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    wall_seconds: float = 0.0
    checksum: str = ""
    optimizer: str = ""
    defaulted_hyperparams: list[str] = field(default_factory=list)
    clipped_batches: int = 0

    @property
    def final_accuracy(self) -> float:
        return self.epochs[-1].accuracy if self.epochs else 0.0

    def to_dict(self, *, timing: bool = True) -> dict[str, Any]:
        """`timing=False` drops wall-clock so files written from it are reproducible."""
        data: dict[str, Any] = {
            "epochs": [
                {"epoch": e.epoch, "loss": e.loss, "accuracy": e.accuracy} for e in self.epochs
            ],
            "checksum": self.checksum,
            "optimizer": self.optimizer,
            "defaulted_hyperparams": self.defaulted_hyperparams,
            "clipped_batches": self.clipped_batches,
        }
        if timing:
            data["wall_seconds"] = self.wall_seconds
        return data


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Permutation for one epoch: Philox keyed by the seed, counter set to the epoch."""
    bitgen = np.random.Philox(key=int(seed) & 0xFFFF_FFFF_FFFF_FFFF, counter=epoch)
    return np.random.Generator(bitgen).permutation(n)


def predict_proba(model: Classifier, x: np.ndarray, chunk: int = PREDICT_CHUNK) -> np.ndarray:
    if x.shape[0] == 0:
        return np.zeros((0, model.num_classes))
    return np.concatenate(
        [model.predict_proba(x[i : i + chunk]) for i in range(0, x.shape[0], chunk)]
    )


def train(
    config: ExperimentConfig,
    matrix: FeatureMatrix,
    pipeline: PipelineState,
    *,
    on_log: LogCallback | None = None,
) -> tuple[ModelArtifact, TrainReport]:
    config.validate()
    if matrix.rows == 0:
        raise EmptyDataset("Cannot train on an empty matrix")
    width = pipeline.encoder.total_encoded_width
    if matrix.cols != width:
        raise SchemaMismatch(f"Matrix has {matrix.cols} columns, pipeline encodes {width}")
    class_names = config.dataset.class_names
    y = matrix.class_indices
    if y.min() < 0 or y.max() >= len(class_names):
        raise SchemaMismatch(
            f"Labels outside [0, {len(class_names)}) for {config.dataset.label_mode} "
            f"{config.dataset.name} data"
        )

    def emit(line: str) -> None:
        logger.debug(line)
        if on_log:
            on_log(line)

    seed = config.seed
    spec = ModelSpec.from_config(config.model, input_dim=width, num_classes=len(class_names))
    model = build_model(spec, seed)
    opt_cfg = config.optimizer
    optimizer = Optimizer(opt_cfg.kind, model.parameters(), opt_cfg.hyperparams())
    clip = config.training.clip_norm
    batch_size = config.training.batch_size
    x = matrix.values
    n = matrix.rows

    report = TrainReport(optimizer=opt_cfg.kind, defaulted_hyperparams=opt_cfg.defaulted())
    if report.defaulted_hyperparams:
        emit(f"{opt_cfg.kind}: defaulted hyperparameters {', '.join(report.defaulted_hyperparams)}")

    started = time.perf_counter()
    for epoch in range(1, config.training.epochs + 1):
        order = epoch_order(seed, epoch, n)
        loss_sum = 0.0
        for batch, start in enumerate(range(0, n, batch_size)):
            idx = order[start : start + batch_size]
            loss, grads = model.loss_and_gradients(x[idx], y[idx])
            if not np.isfinite(loss):
                raise NumericDivergence(epoch, batch, loss)
            grads, norm = clip_global_norm(grads, clip)
            if not np.isfinite(norm):
                raise NumericDivergence(epoch, batch, loss)
            if clip is not None and norm > clip:
                report.clipped_batches += 1
            optimizer.step(grads)
            loss_sum += loss * idx.shape[0]

        predicted = np.argmax(predict_proba(model, x), axis=1)
        stats = EpochStats(epoch=epoch, loss=loss_sum / n, accuracy=float(np.mean(predicted == y)))
        report.epochs.append(stats)
        emit(f"epoch,{epoch},loss,{stats.loss:.6f},acc,{stats.accuracy:.6f}")

    report.wall_seconds = time.perf_counter() - started
    report.checksum = parameter_checksum(model.parameters())
    logger.info("Trained in %.2fs, checksum %s", report.wall_seconds, report.checksum)

    artifact = ModelArtifact(
        config=ExperimentConfig.from_dict(config.to_dict()),
        pipeline=pipeline,
        spec=spec,
        class_names=class_names,
        model=model,
    )
    return artifact, report
