from __future__ import annotations

import gzip
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import requests

from .errors import ValidationError
from .workspace import atomic_write

logger = logging.getLogger(__name__)

HttpGet = Callable[..., Any]


@dataclass(frozen=True)
class DatasetFile:
    url: str
    filename: str  # name on disk after optional gunzip
    gzipped: bool = False


DATASET_FILES: dict[str, tuple[DatasetFile, ...]] = {
    "nslkdd": (
        DatasetFile(
            "https://raw.githubusercontent.com/defcom17/NSL_KDD/master/KDDTrain%2B.txt",
            "KDDTrain+.txt",
        ),
        DatasetFile(
            "https://raw.githubusercontent.com/defcom17/NSL_KDD/master/KDDTest%2B.txt",
            "KDDTest+.txt",
        ),
    ),
    "kdd99": (
        DatasetFile(
            "http://kdd.ics.uci.edu/databases/kddcup99/kddcup.data_10_percent.gz",
            "kddcup.data_10_percent",
            gzipped=True,
        ),
        DatasetFile(
            "http://kdd.ics.uci.edu/databases/kddcup99/corrected.gz",
            "corrected",
            gzipped=True,
        ),
    ),
}

UNSW_NB15_PAGE = "https://research.unsw.edu.au/projects/unsw-nb15-dataset"


@dataclass(frozen=True)
class DownloadResult:
    url: str
    path: Path
    bytes: int


def download_file(
    url: str, dest: Path, *, timeout_s: int = 60, http_get: HttpGet = requests.get
) -> DownloadResult:
    """Stream `url` to `dest`; a failed transfer leaves no partial file."""
    total = 0

    def write(f) -> None:
        nonlocal total
        with http_get(url, stream=True, timeout=timeout_s) as r:
            r.raise_for_status()
            for chunk in r.iter_content(chunk_size=1024 * 1024):
                if chunk:
                    f.write(chunk)
                    total += len(chunk)

    atomic_write(dest, write, binary=True)
    return DownloadResult(url=url, path=dest, bytes=total)


def gunzip_file(archive: Path, dest: Path) -> None:
    def write(out) -> None:
        with gzip.open(archive, "rb") as src:
            shutil.copyfileobj(src, out)

    atomic_write(dest, write, binary=True)


def fetch_dataset(
    name: str,
    dest_dir: Path,
    *,
    overwrite: bool = False,
    timeout_s: int = 60,
    http_get: HttpGet = requests.get,
) -> list[Path]:
    """Download the public train/test files of `name` into `dest_dir`."""
    if name == "unswnb15":
        raise ValidationError(
            f"UNSW-NB15 must be downloaded manually from {UNSW_NB15_PAGE} "
            "(partitioned training/testing CSV files)"
        )
    files = DATASET_FILES.get(name)
    if files is None:
        raise ValidationError(f"No download source for dataset {name!r}")

    dest_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for item in files:
        target = dest_dir / item.filename
        if target.exists() and not overwrite:
            logger.info("Keeping existing %s", target)
            paths.append(target)
            continue
        if item.gzipped:
            archive = dest_dir / (item.filename + ".gz")
            result = download_file(item.url, archive, timeout_s=timeout_s, http_get=http_get)
            gunzip_file(archive, target)
            archive.unlink()
        else:
            result = download_file(item.url, target, timeout_s=timeout_s, http_get=http_get)
        logger.info("Downloaded %s (%d bytes)", item.url, result.bytes)
        paths.append(target)
    return paths
