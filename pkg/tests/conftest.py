import os
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

# one raw label per KDD category, in class-index order (DoS, Probe, R2L, U2R, normal)
TOY_LABELS = ("neptune", "ipsweep", "guess_passwd", "rootkit", "normal")
TOY_SERVICES = ("private", "eco_i", "ftp", "telnet", "http")
TOY_PROTOCOLS = ("tcp", "icmp", "tcp", "tcp", "udp")


def nsl_row(
    label: str,
    *,
    protocol: str = "tcp",
    service: str = "http",
    flag: str = "SF",
    numeric: float = 0.0,
    difficulty: int = 20,
) -> list[str]:
    """One 43-column NSL-KDD line: 41 features, label, difficulty."""
    numerics = [repr(numeric + 0.01 * i) for i in range(37)]
    return ["0", protocol, service, flag, *numerics, label, str(difficulty)]


def write_rows(path: Path, rows: list[list[str]], header: list[str] | None = None) -> Path:
    lines = [",".join(header)] if header else []
    lines += [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def toy_nsl_rows(per_class: int = 12, seed: int = 0) -> list[list[str]]:
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(per_class):
        for c, label in enumerate(TOY_LABELS):
            rows.append(
                nsl_row(
                    label,
                    protocol=TOY_PROTOCOLS[c],
                    service=TOY_SERVICES[c],
                    flag="SF" if i % 2 else "REJ",
                    numeric=float(c) * 10.0 + float(rng.uniform(0.0, 1.0)),
                )
            )
    return rows


@pytest.fixture
def toy_nsl_csv(tmp_path: Path) -> Path:
    return write_rows(tmp_path / "toy_train.txt", toy_nsl_rows())


@pytest.fixture
def toy_nsl_test_csv(tmp_path: Path) -> Path:
    return write_rows(tmp_path / "toy_test.txt", toy_nsl_rows(per_class=4, seed=1))


@pytest.fixture
def nslkdd_dir() -> Path:
    value = os.environ.get("IDSFLOW_NSLKDD_DIR")
    if not value:
        pytest.skip("set IDSFLOW_NSLKDD_DIR to a directory with KDDTrain+.txt and KDDTest+.txt")
    path = Path(value)
    if not (path / "KDDTrain+.txt").exists() or not (path / "KDDTest+.txt").exists():
        pytest.skip(f"{path} does not hold KDDTrain+.txt and KDDTest+.txt")
    return path
