"""Commit/file record schema and the CSV representation of a dataset."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import SchemaError

DEFECTIVE = "defective"
CLEAN = "clean"
LABELS = (DEFECTIVE, CLEAN)

NUMERIC_ATTRIBUTES = (
    "lines_added",
    "lines_removed",
    "file_age_days",
    "sloc",
    "comment_lines",
    "maturity_days",
    "time_since_last_commit_hours",
)
CATEGORICAL_ATTRIBUTES = ("owner", "file_name")
# attributes a model may use as explanatory variables
FEATURE_ATTRIBUTES = NUMERIC_ATTRIBUTES + CATEGORICAL_ATTRIBUTES

CSV_HEADER = (
    "commit_id",
    "file_name",
    "owner",
    "lines_added",
    "lines_removed",
    "file_age_days",
    "sloc",
    "comment_lines",
    "maturity_days",
    "time_since_last_commit_hours",
    "label",
)


@dataclass(frozen=True)
class CommitFileRecord:
    """One (commit, file) tuple with its activity, size and experience attributes.

    Count-valued attributes are ints when mined and become floats once jittered.
    ``label`` is ``None`` until injection labeling has run.
    """

    commit_id: str
    file_name: str
    owner: str
    lines_added: float = 0
    lines_removed: float = 0
    file_age_days: float = 0.0
    sloc: float = 0
    comment_lines: float = 0
    maturity_days: float = 0.0
    time_since_last_commit_hours: float = 0.0
    label: str | None = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.commit_id, self.file_name)

    def replace(self, **changes) -> "CommitFileRecord":
        return dataclasses.replace(self, **changes)

    def numeric(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in NUMERIC_ATTRIBUTES)

    def features(self, selection: Sequence[str]) -> tuple:
        return tuple(getattr(self, name) for name in selection)


def validate_features(selection: Iterable[str]) -> tuple[str, ...]:
    selection = tuple(selection)
    unknown = [name for name in selection if name not in FEATURE_ATTRIBUTES]
    if unknown:
        raise SchemaError(f"unknown feature(s): {', '.join(unknown)}")
    if len(set(selection)) != len(selection):
        raise SchemaError("feature selection contains duplicates")
    return selection


@dataclass
class Dataset:
    records: list[CommitFileRecord]
    feature_selection: tuple[str, ...] = FEATURE_ATTRIBUTES
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.records = list(self.records)
        self.feature_selection = validate_features(self.feature_selection)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def labels(self) -> list[str | None]:
        return [r.label for r in self.records]

    def class_counts(self) -> dict[str, int]:
        counts = {DEFECTIVE: 0, CLEAN: 0}
        for r in self.records:
            if r.label in counts:
                counts[r.label] += 1
        return counts

    def select(self, features: Sequence[str]) -> "Dataset":
        return Dataset(self.records, tuple(features), dict(self.provenance))

    def derive(self, records: Iterable[CommitFileRecord], **provenance) -> "Dataset":
        """New dataset over ``records`` with the lineage extended by ``provenance``."""
        lineage = dict(self.provenance)
        lineage.update(provenance)
        return Dataset(list(records), self.feature_selection, lineage)

    def to_csv(self) -> str:
        return records_to_csv(self.records)

    def write(self, path: str | Path, sidecar: bool = True) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")
        if sidecar:
            sidecar_path(path).write_text(
                json.dumps(self.provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )

    @classmethod
    def read(cls, path: str | Path) -> "Dataset":
        path = Path(path)
        records = records_from_csv(path.read_text(encoding="utf-8"))
        provenance = {}
        side = sidecar_path(path)
        if side.exists():
            provenance = json.loads(side.read_text(encoding="utf-8"))
        return cls(records, provenance=provenance)


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(".provenance.json")


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_number(text: str, column: str) -> float:
    try:
        if any(c in text for c in ".eEn"):
            return float(text)
        return int(text)
    except ValueError:
        raise SchemaError(f"column {column}: not a number: {text!r}") from None


def records_to_csv(records: Iterable[CommitFileRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([_format_value(getattr(r, name)) for name in CSV_HEADER])
    return buf.getvalue()


def records_from_csv(text: str) -> list[CommitFileRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty dataset file (no header)") from None
    if tuple(header) != CSV_HEADER:
        raise SchemaError(f"unexpected header: {','.join(header)}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise SchemaError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        values = dict(zip(CSV_HEADER, row))
        for name in NUMERIC_ATTRIBUTES:
            values[name] = _parse_number(values[name], name)
        label = values["label"] or None
        if label is not None and label not in LABELS:
            raise SchemaError(f"line {lineno}: bad label {label!r}")
        values["label"] = label
        records.append(CommitFileRecord(**values))
    return records
