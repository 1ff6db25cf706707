from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from platformdirs import user_data_dir

DATA_DIR_ENV = "IDSFLOW_DATA_DIR"


@dataclass(frozen=True)
class AppPaths:
    app_name: str = "idsflow"
    app_author: str = "idsflow"
    data_dir_override: str | None = None

    @property
    def data_dir(self) -> Path:
        if self.data_dir_override:
            return Path(self.data_dir_override)
        env = os.environ.get(DATA_DIR_ENV)
        if env:
            return Path(env)
        return Path(user_data_dir(self.app_name, self.app_author))

    @property
    def datasets_dir(self) -> Path:
        return self.data_dir / "datasets"

    @property
    def runs_dir(self) -> Path:
        return self.data_dir / "runs"

    def ensure(self) -> "AppPaths":
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.datasets_dir.mkdir(parents=True, exist_ok=True)
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        return self

    def resolve_input(self, path: str | Path) -> Path:
        """Return `path` as given if it exists, else try it under the data directory."""
        p = Path(path)
        if p.exists() or p.is_absolute():
            return p
        for base in (self.datasets_dir, self.data_dir):
            candidate = base / p
            if candidate.exists():
                return candidate
        return p
