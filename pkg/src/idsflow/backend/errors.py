from __future__ import annotations

from dataclasses import dataclass


class IdsFlowError(Exception):
    """Base exception for idsflow."""


class ValidationError(IdsFlowError):
    """Bad input data or configuration; the CLI reports these with exit code 2."""


class ConfigInvalid(ValidationError):
    pass


class InvalidFraction(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class SchemaMismatch(ValidationError):
    pass


@dataclass(frozen=True)
class MalformedRow(ValidationError):
    line_no: int
    expected: int
    got: int

    def __str__(self) -> str:
        return f"Malformed row at line {self.line_no}: expected {self.expected} fields, got {self.got}"


@dataclass(frozen=True)
class UnknownLabel(ValidationError):
    line_no: int
    label: str

    def __str__(self) -> str:
        return f"Unknown label {self.label!r} at line {self.line_no}"


@dataclass(frozen=True)
class TaxonomyError(ValidationError):
    line_no: int
    reason: str

    def __str__(self) -> str:
        return f"Taxonomy file line {self.line_no}: {self.reason}"


@dataclass(frozen=True)
class NonNumericValue(ValidationError):
    row: int
    col: int
    value: str

    def __str__(self) -> str:
        return f"Non-numeric value {self.value!r} at row {self.row}, column {self.col}"


class NumericError(IdsFlowError):
    """Violated shape or numeric contract inside the toolkit."""


class DimensionMismatch(NumericError):
    pass


class ShapeMismatch(NumericError):
    pass


class StaleCache(NumericError):
    pass


class UninitializedState(NumericError):
    pass


class EmptyMatrix(NumericError):
    pass


class LengthMismatch(NumericError):
    pass


class OutOfRangeClass(NumericError):
    pass


@dataclass(frozen=True)
class DegenerateClass(NumericError):
    class_index: int
    positives: int
    negatives: int

    def __str__(self) -> str:
        return (
            f"ROC undefined for class {self.class_index}: "
            f"{self.positives} positives, {self.negatives} negatives"
        )


class ArtifactError(IdsFlowError):
    pass


@dataclass(frozen=True)
class VersionMismatch(ArtifactError):
    found: object
    expected: int

    def __str__(self) -> str:
        return f"Unsupported artifact version {self.found!r} (expected {self.expected})"


class CorruptArtifact(ArtifactError):
    pass


@dataclass(frozen=True)
class NumericDivergence(IdsFlowError):
    epoch: int
    batch: int
    loss: float

    def __str__(self) -> str:
        return (
            f"Training diverged at epoch {self.epoch}, batch {self.batch}: loss={self.loss!r}. "
            "Try a smaller learning rate or enable clip_norm."
        )
