from __future__ import annotations

import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, IO


@dataclass(frozen=True)
class RunWorkspace:
    root: Path

    @property
    def model_path(self) -> Path:
        return self.root / "model.json"

    @property
    def pipeline_path(self) -> Path:
        return self.root / "pipeline.json"

    @property
    def train_report_path(self) -> Path:
        return self.root / "train_report.json"

    @property
    def metrics_json(self) -> Path:
        return self.root / "metrics.json"

    @property
    def metrics_csv(self) -> Path:
        return self.root / "metrics.csv"

    @property
    def predictions_csv(self) -> Path:
        return self.root / "predictions.csv"

    @property
    def roc_dir(self) -> Path:
        return self.root / "roc"

    @property
    def logs_dir(self) -> Path:
        return self.root / "logs"

    def ensure(self) -> "RunWorkspace":
        self.root.mkdir(parents=True, exist_ok=True)
        self.roc_dir.mkdir(parents=True, exist_ok=True)
        self.logs_dir.mkdir(parents=True, exist_ok=True)
        return self

    @staticmethod
    def create(runs_dir: Path, name: str | None = None) -> "RunWorkspace":
        runs_dir.mkdir(parents=True, exist_ok=True)
        safe = (name or "run").strip().replace(" ", "_")
        ts = time.strftime("%Y%m%d-%H%M%S")
        return RunWorkspace(root=runs_dir / f"{safe}-{ts}").ensure()


def atomic_write(path: Path, write: Callable[[IO], None], *, binary: bool = False) -> None:
    """Write through a temp file in the target directory, then rename over `path`.

    A failure inside `write` leaves no partial file behind.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        if binary:
            with os.fdopen(fd, "wb") as f:
                write(f)
        else:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                write(f)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write(path, lambda f: f.write(text))
