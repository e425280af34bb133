"""Cleansing, stratified splitting, random oversampling and multiplicative jitter.

Every random operation takes an explicit seed and draws from its own
``numpy.random.Generator``, consuming draws in record order, so the whole
preparation pipeline is a pure function of (dataset, parameters).
"""

from __future__ import annotations

import fnmatch
import math
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path, PurePosixPath
from typing import Sequence

import numpy as np

from .dataset import CLEAN, DEFECTIVE, LABELS, NUMERIC_ATTRIBUTES, Dataset
from .errors import DegenerateSplit, SingleClass

DEFAULT_EXCLUDE_GLOBS = ("README*", "test*/", "*_test*", "docs/**", "*.md", "*.txt")
DEFAULT_OUTLIER_THRESHOLD = 10_000


@dataclass
class CleanseOptions:
    exclude_globs: tuple[str, ...] = DEFAULT_EXCLUDE_GLOBS
    outlier_threshold: float = DEFAULT_OUTLIER_THRESHOLD
    drop_zero_churn: bool = False


def matches_glob(path: str, pattern: str) -> bool:
    """Case-insensitive path glob.

    ``dir/`` patterns match any directory component, patterns containing a
    slash match the whole path, anything else matches the base name.
    """
    path = path.lower()
    pattern = pattern.lower()
    parts = PurePosixPath(path).parts
    if pattern.endswith("/"):
        return any(fnmatch.fnmatchcase(part, pattern[:-1]) for part in parts[:-1])
    if "/" in pattern:
        return fnmatch.fnmatchcase(path, pattern.replace("**", "*"))
    return fnmatch.fnmatchcase(parts[-1] if parts else path, pattern)


def cleanse(ds: Dataset, opts: CleanseOptions | None = None) -> Dataset:
    """Drop non-production files and churn outliers; counts go to the provenance."""
    opts = opts or CleanseOptions()
    kept, non_production, outliers, zero_churn = [], 0, 0, 0
    for record in ds.records:
        if any(matches_glob(record.file_name, g) for g in opts.exclude_globs):
            non_production += 1
        elif record.lines_added + record.lines_removed > opts.outlier_threshold:
            outliers += 1
        elif opts.drop_zero_churn and record.lines_added == 0 and record.lines_removed == 0:
            zero_churn += 1
        else:
            kept.append(record)
    report = {
        "exclude_globs": list(opts.exclude_globs),
        "outlier_threshold": opts.outlier_threshold,
        "removed_non_production": non_production,
        "removed_outliers": outliers,
        "removed_zero_churn": zero_churn,
        "kept": len(kept),
    }
    return _derive(ds, kept, "cleanse", report)


def _derive(ds: Dataset, records, step: str, report: dict) -> Dataset:
    steps = list(ds.provenance.get("steps", [])) + [step]
    return ds.derive(records, steps=steps, **{step: report})


@dataclass
class SplitResult:
    train: Dataset
    validation: Dataset
    seed: int


def _allocate(class_sizes: Sequence[int], total: int) -> list[int]:
    """Largest-remainder allocation of ``total`` proportionally to class sizes."""
    n = sum(class_sizes)
    quotas = [total * size / n for size in class_sizes]
    alloc = [math.floor(q) for q in quotas]
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[: total - sum(alloc)]:
        alloc[i] += 1
    return alloc


def split(
    ds: Dataset, train_fraction: float = 0.7, seed: int = 0, stratify: bool = True
) -> SplitResult:
    """Partition into train/validation without replacement.

    The training side receives ``floor(train_fraction * n)`` records; under
    stratification that total is shared between the classes by largest
    remainder.  Both sides keep the input record order.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(ds)
    n_train = math.floor(train_fraction * n)
    rng = np.random.default_rng(seed)
    if stratify:
        groups = [[i for i, r in enumerate(ds.records) if r.label == lab] for lab in LABELS]
        alloc = _allocate([len(g) for g in groups], n_train)
        for label, group, k in zip(LABELS, groups, alloc):
            if k == 0 or k == len(group):
                raise DegenerateSplit(
                    f"class {label!r} ({len(group)} records) cannot appear on both sides"
                )
        chosen = []
        for group, k in zip(groups, alloc):
            perm = rng.permutation(len(group))
            chosen.extend(group[j] for j in perm[:k])
    else:
        if n_train == 0 or n_train == n:
            raise DegenerateSplit(f"{n} records cannot be split at {train_fraction}")
        chosen = list(rng.permutation(n)[:n_train])
    in_train = np.zeros(n, dtype=bool)
    in_train[chosen] = True
    train = [r for r, t in zip(ds.records, in_train) if t]
    validation = [r for r, t in zip(ds.records, in_train) if not t]
    info = {"seed": seed, "train_fraction": train_fraction, "stratify": stratify}
    return SplitResult(
        _derive(ds, train, "split", {**info, "side": "train", "size": len(train)}),
        _derive(ds, validation, "split", {**info, "side": "validation", "size": len(validation)}),
        seed,
    )


def minority_label(ds: Dataset) -> str:
    """The rarer class; the defective class wins ties."""
    counts = ds.class_counts()
    return CLEAN if counts[CLEAN] < counts[DEFECTIVE] else DEFECTIVE


def oversample(train: Dataset, seed: int = 0) -> Dataset:
    """Randomly duplicate minority records until both classes have equal counts.

    The original records keep their order; drawn replicates are appended.
    """
    counts = train.class_counts()
    if min(counts.values()) == 0:
        raise SingleClass(f"oversampling needs both classes, got {counts}")
    minority = minority_label(train)
    pool = [r for r in train.records if r.label == minority]
    deficit = max(counts.values()) - counts[minority]
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, len(pool), size=deficit)
    replicates = [pool[j] for j in draws]
    report = {
        "seed": seed,
        "minority": minority,
        "before": counts,
        "replicates": deficit,
        "after": {lab: counts[lab] + (deficit if lab == minority else 0) for lab in LABELS},
    }
    return _derive(train, train.records + replicates, "oversample", report)


def jitter(
    train: Dataset,
    amplitude: float = 0.02,
    seed: int = 0,
    label: str | None = None,
    rows: Sequence[int] | None = None,
    per_record: bool = False,
) -> Dataset:
    """Multiply numeric attributes of minority rows by U(1 - amplitude, 1 + amplitude).

    ``label`` picks the class to jitter (default: the minority, defective on
    ties); ``rows`` further restricts jitter to those record positions.  One
    factor is drawn per value, or per record when ``per_record`` is set.
    Categorical attributes and labels are left alone, values are not rounded.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    label = label or minority_label(train)
    allowed = None if rows is None else set(rows)
    report = {"seed": seed, "amplitude": amplitude, "label": label, "per_record": per_record}
    if amplitude == 0:
        return _derive(train, train.records, "jitter", {**report, "jittered": 0})
    rng = np.random.default_rng(seed)
    low, high = 1.0 - amplitude, 1.0 + amplitude
    out, jittered = [], 0
    for i, record in enumerate(train.records):
        if record.label != label or (allowed is not None and i not in allowed):
            out.append(record)
            continue
        if per_record:
            factors = [rng.uniform(low, high)] * len(NUMERIC_ATTRIBUTES)
        else:
            factors = rng.uniform(low, high, size=len(NUMERIC_ATTRIBUTES))
        changes = {
            name: float(getattr(record, name) * u) for name, u in zip(NUMERIC_ATTRIBUTES, factors)
        }
        out.append(record.replace(**changes))
        jittered += 1
    return _derive(train, out, "jitter", {**report, "jittered": jittered})


@dataclass
class PrepParams:
    """Parameters of the cleanse -> split -> oversample -> jitter pipeline."""

    train_fraction: float = 0.7
    stratify: bool = True
    amplitude: float = 0.02
    jitter_originals: bool = True
    per_record_jitter: bool = False
    cleanse: CleanseOptions = field(default_factory=CleanseOptions)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cleanse"]["exclude_globs"] = list(self.cleanse.exclude_globs)
        return d


@dataclass
class Prepared:
    train: Dataset
    validation: Dataset
    seed: int

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "train.csv").write_text(self.train.to_csv(), encoding="utf-8")
        (out / "validation.csv").write_text(self.validation.to_csv(), encoding="utf-8")
        sidecar = {
            "seed": self.seed,
            "train": self.train.provenance,
            "validation": self.validation.provenance,
            "class_counts": {
                "train": self.train.class_counts(),
                "validation": self.validation.class_counts(),
            },
        }
        (out / "provenance.json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def prepare(ds: Dataset, seed: int = 0, params: PrepParams | None = None) -> Prepared:
    """Run the full preparation; the validation side never sees resampling or noise."""
    params = params or PrepParams()
    cleaned = cleanse(ds, params.cleanse)
    parts = split(cleaned, params.train_fraction, seed, params.stratify)
    minority = minority_label(parts.train)
    n_original = len(parts.train)
    balanced = oversample(parts.train, seed + 1)
    rows = None if params.jitter_originals else range(n_original, len(balanced))
    train = jitter(
        balanced,
        params.amplitude,
        seed + 2,
        label=minority,
        rows=rows,
        per_record=params.per_record_jitter,
    )
    return Prepared(train, parts.validation, seed)
