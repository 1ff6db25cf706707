"""Schema-driven ingestion of KDD'99, NSL-KDD and UNSW-NB15 connection records.

Records stay as raw string fields; numeric parsing happens in `preprocess`.
Rows are returned in file order. Shuffling is the trainer's job.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .errors import (
    EmptyDataset,
    InvalidFraction,
    MalformedRow,
    SchemaMismatch,
    TaxonomyError,
    UnknownLabel,
)

logger = logging.getLogger(__name__)

DatasetName = Literal["kdd99", "nslkdd", "unswnb15"]
LabelMode = Literal["multiclass", "binary"]

RawRecord = list[str]

KDD_FEATURES: tuple[str, ...] = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
    "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
    "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
)

# 42 features: of the 45 CSV columns, `id` and the binary `label` are dropped and
# `attack_cat` is the target. `label` is only attack_cat != Normal, so keeping it
# as a feature would leak the answer.
UNSW_FEATURES: tuple[str, ...] = (
    "dur", "proto", "service", "state", "spkts", "dpkts", "sbytes", "dbytes", "rate", "sttl",
    "dttl", "sload", "dload", "sloss", "dloss", "sinpkt", "dinpkt", "sjit", "djit", "swin",
    "stcpb", "dtcpb", "dwin", "tcprtt", "synack", "ackdat", "smean", "dmean", "trans_depth",
    "response_body_len", "ct_srv_src", "ct_state_ttl", "ct_dst_ltm", "ct_src_dport_ltm",
    "ct_dst_sport_ltm", "ct_dst_src_ltm", "is_ftp_login", "ct_ftp_cmd", "ct_flw_http_mthd",
    "ct_src_ltm", "ct_srv_dst", "is_sm_ips_ports",
)

KDD_CLASSES: tuple[str, ...] = ("DoS", "Probe", "R2L", "U2R", "normal")
UNSW_CLASSES: tuple[str, ...] = (
    "Exploits", "Reconnaissance", "Backdoor", "DoS", "Analysis",
    "Fuzzers", "Worms", "Shellcode", "Generic", "normal",
)
NORMAL_CLASS = "normal"
BINARY_CLASSES: tuple[str, ...] = ("attack", NORMAL_CLASS)


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of one benchmark file.

    `label_index` and `extra_columns` index raw CSV columns; `categorical_indices`
    index the feature row left after the label and extra columns are removed.
    """

    name: DatasetName
    feature_names: tuple[str, ...]
    categorical_indices: tuple[int, ...]
    label_index: int
    extra_columns: tuple[int, ...]
    class_names: tuple[str, ...]
    taxonomy_resource: str
    has_header: bool = False
    strip_label_period: bool = False

    def __post_init__(self) -> None:
        n = self.feature_count
        if any(not 0 <= c < n for c in self.categorical_indices):
            raise SchemaMismatch(f"{self.name}: categorical index outside [0, {n})")
        if self.label_index in self.extra_columns:
            raise SchemaMismatch(f"{self.name}: label column is also declared extra")
        if any(not 0 <= c < self.raw_width for c in (self.label_index, *self.extra_columns)):
            raise SchemaMismatch(f"{self.name}: label/extra column outside the raw row")

    @property
    def feature_count(self) -> int:
        return len(self.feature_names)

    @property
    def raw_width(self) -> int:
        return self.feature_count + 1 + len(self.extra_columns)

    @property
    def normal_class(self) -> int:
        return self.class_names.index(NORMAL_CLASS)

    def feature_columns(self) -> list[int]:
        dropped = {self.label_index, *self.extra_columns}
        return [i for i in range(self.raw_width) if i not in dropped]

    @staticmethod
    def for_name(name: str) -> "DatasetSchema":
        try:
            return SCHEMAS[name]  # type: ignore[index]
        except KeyError:
            raise SchemaMismatch(
                f"Unknown dataset {name!r}; expected one of {', '.join(SCHEMAS)}"
            ) from None


SCHEMAS: dict[DatasetName, DatasetSchema] = {
    "kdd99": DatasetSchema(
        name="kdd99",
        feature_names=KDD_FEATURES,
        categorical_indices=(1, 2, 3),
        label_index=41,
        extra_columns=(),
        class_names=KDD_CLASSES,
        taxonomy_resource="kdd.tsv",
        strip_label_period=True,
    ),
    # 43rd column is the difficulty score
    "nslkdd": DatasetSchema(
        name="nslkdd",
        feature_names=KDD_FEATURES,
        categorical_indices=(1, 2, 3),
        label_index=41,
        extra_columns=(42,),
        class_names=KDD_CLASSES,
        taxonomy_resource="kdd.tsv",
    ),
    # id, 42 features, attack_cat, binary label
    "unswnb15": DatasetSchema(
        name="unswnb15",
        feature_names=UNSW_FEATURES,
        categorical_indices=(1, 2, 3),
        label_index=43,
        extra_columns=(0, 44),
        class_names=UNSW_CLASSES,
        taxonomy_resource="unswnb15.tsv",
        has_header=True,
    ),
}


@dataclass(frozen=True)
class AttackTaxonomy:
    class_names: tuple[str, ...]
    raw_to_class: dict[str, int]

    def lookup(self, raw_label: str) -> int | None:
        return self.raw_to_class.get(raw_label)

    @property
    def normal_class(self) -> int:
        return self.class_names.index(NORMAL_CLASS)

    def binary(self) -> "AttackTaxonomy":
        """Collapse to attack (0) vs normal (1)."""
        normal = self.normal_class
        mapping = {raw: 1 if idx == normal else 0 for raw, idx in self.raw_to_class.items()}
        return AttackTaxonomy(class_names=BINARY_CLASSES, raw_to_class=mapping)


def load_taxonomy(
    schema: DatasetSchema,
    path: str | Path | None = None,
    *,
    label_mode: LabelMode = "multiclass",
) -> AttackTaxonomy:
    if path is None:
        resource = resources.files("idsflow.backend") / "taxonomies" / schema.taxonomy_resource
        text = resource.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")

    index = {name: i for i, name in enumerate(schema.class_names)}
    mapping: dict[str, int] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split("\t")
        if len(parts) != 2:
            raise TaxonomyError(line_no, "expected `raw_label<TAB>category`")
        raw, category = parts[0].strip(), parts[1].strip()
        if category not in index:
            raise TaxonomyError(line_no, f"category {category!r} is not a {schema.name} class")
        if raw in mapping and mapping[raw] != index[category]:
            raise TaxonomyError(line_no, f"label {raw!r} mapped to two categories")
        mapping[raw] = index[category]

    taxonomy = AttackTaxonomy(class_names=schema.class_names, raw_to_class=mapping)
    return taxonomy.binary() if label_mode == "binary" else taxonomy


@dataclass
class LabeledDataset:
    schema: DatasetSchema
    records: list[RawRecord]
    class_indices: np.ndarray
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        self.class_indices = np.asarray(self.class_indices, dtype=np.int64)
        if not self.class_names:
            self.class_names = self.schema.class_names
        if len(self.records) != len(self.class_indices):
            raise SchemaMismatch("records and class_indices differ in length")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def normal_class(self) -> int:
        return self.class_names.index(NORMAL_CLASS)

    def take(self, indices: Sequence[int] | np.ndarray) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            schema=self.schema,
            records=[self.records[i] for i in idx],
            class_indices=self.class_indices[idx],
            class_names=self.class_names,
        )


def load_csv(
    path: str | Path,
    schema: DatasetSchema,
    taxonomy: AttackTaxonomy,
    has_header: bool | None = None,
) -> LabeledDataset:
    """Parse a benchmark CSV file.

    Blank lines are skipped. Raises MalformedRow / UnknownLabel with the
    1-based physical line number of the offending row.
    """
    has_header = schema.has_header if has_header is None else has_header
    keep = schema.feature_columns()
    records: list[RawRecord] = []
    classes: list[int] = []

    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        first = True
        for row in reader:
            if first and has_header:
                first = False
                continue
            first = False
            if not row:
                continue
            if len(row) != schema.raw_width:
                raise MalformedRow(reader.line_num, schema.raw_width, len(row))
            raw_label = row[schema.label_index].strip()
            if schema.strip_label_period:
                raw_label = raw_label.rstrip(".")
            cls = taxonomy.lookup(raw_label)
            if cls is None:
                raise UnknownLabel(reader.line_num, raw_label)
            records.append([row[i] for i in keep])
            classes.append(cls)

    logger.info("Loaded %d %s records from %s", len(records), schema.name, path)
    return LabeledDataset(
        schema=schema,
        records=records,
        class_indices=np.asarray(classes, dtype=np.int64),
        class_names=taxonomy.class_names,
    )


def class_distribution(ds: LabeledDataset) -> dict[int, int]:
    counts = np.bincount(ds.class_indices, minlength=ds.num_classes)
    return {i: int(c) for i, c in enumerate(counts)}


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded partition of range(n); both halves come back in ascending order."""
    if not 0.0 < test_fraction < 1.0:
        raise InvalidFraction(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = int(round(n * test_fraction))
    perm = np.random.default_rng(_seed_key(seed)).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split(
    ds: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    if len(ds) == 0:
        raise EmptyDataset("Cannot split an empty dataset")
    train_idx, test_idx = split_indices(len(ds), test_fraction, seed)
    return ds.take(train_idx), ds.take(test_idx)


def stratified_subsample(ds: LabeledDataset, n: int, seed: int) -> LabeledDataset:
    """Draw `n` records keeping class proportions (largest-remainder allocation)."""
    if len(ds) == 0:
        raise EmptyDataset("Cannot subsample an empty dataset")
    if n >= len(ds):
        return ds
    counts = np.bincount(ds.class_indices, minlength=ds.num_classes)
    exact = counts * (n / len(ds))
    alloc = np.floor(exact).astype(np.int64)
    remainder = n - int(alloc.sum())
    # ties broken by class index for determinism
    order = sorted(range(len(counts)), key=lambda c: (-(exact[c] - alloc[c]), c))
    for c in order[:remainder]:
        alloc[c] += 1

    rng = np.random.default_rng(_seed_key(seed))
    chosen: list[np.ndarray] = []
    for c, k in enumerate(alloc):
        if k == 0:
            continue
        members = np.flatnonzero(ds.class_indices == c)
        chosen.append(rng.choice(members, size=int(k), replace=False))
    picked = np.sort(np.concatenate(chosen)) if chosen else np.empty(0, dtype=np.int64)
    return ds.take(picked)


def _seed_key(seed: int) -> int:
    return int(seed) & 0xFFFF_FFFF_FFFF_FFFF
