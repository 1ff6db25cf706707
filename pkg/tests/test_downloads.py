from __future__ import annotations

import gzip
from pathlib import Path

import pytest
import requests

from idsflow.backend.downloads import download_file, fetch_dataset
from idsflow.backend.errors import ValidationError


class FakeResponse:
    def __init__(self, body: bytes, status: int = 200) -> None:
        self.body = body
        self.status = status

    def __enter__(self) -> "FakeResponse":
        return self

    def __exit__(self, *exc) -> None:
        return None

    def raise_for_status(self) -> None:
        if self.status >= 400:
            raise requests.HTTPError(f"{self.status} error")

    def iter_content(self, chunk_size: int = 1):
        for i in range(0, len(self.body), 4):
            yield self.body[i : i + 4]


class FakeHttp:
    def __init__(self, bodies: dict[str, bytes], status: int = 200) -> None:
        self.bodies = bodies
        self.status = status
        self.calls: list[str] = []

    def __call__(self, url: str, **kwargs) -> FakeResponse:
        self.calls.append(url)
        name = url.rsplit("/", 1)[-1]
        return FakeResponse(self.bodies.get(name, b""), self.status)


def test_fetch_nslkdd_writes_both_files(tmp_path: Path) -> None:
    http = FakeHttp({"KDDTrain%2B.txt": b"train rows\n", "KDDTest%2B.txt": b"test rows\n"})
    files = fetch_dataset("nslkdd", tmp_path, http_get=http)
    assert [p.name for p in files] == ["KDDTrain+.txt", "KDDTest+.txt"]
    assert (tmp_path / "KDDTrain+.txt").read_bytes() == b"train rows\n"
    assert len(http.calls) == 2

    again = fetch_dataset("nslkdd", tmp_path, http_get=http)
    assert again == files
    assert len(http.calls) == 2


def test_fetch_kdd99_gunzips(tmp_path: Path) -> None:
    http = FakeHttp(
        {
            "kddcup.data_10_percent.gz": gzip.compress(b"0,tcp,http\n"),
            "corrected.gz": gzip.compress(b"1,udp,private\n"),
        }
    )
    files = fetch_dataset("kdd99", tmp_path, http_get=http)
    assert files[0].read_bytes() == b"0,tcp,http\n"
    assert files[1].name == "corrected"
    assert not list(tmp_path.glob("*.gz"))


def test_failed_download_leaves_no_file(tmp_path: Path) -> None:
    with pytest.raises(requests.HTTPError):
        download_file("https://example.invalid/x.txt", tmp_path / "x.txt", http_get=FakeHttp({}, 404))
    assert list(tmp_path.iterdir()) == []


def test_unsw_needs_manual_download(tmp_path: Path) -> None:
    with pytest.raises(ValidationError) as err:
        fetch_dataset("unswnb15", tmp_path, http_get=FakeHttp({}))
    assert "manually" in str(err.value)
