"""Metrics, cross-validation, the cumulative-variable experiment and descriptive statistics."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import classifiers
from .classifiers import ALGORITHMS
from .dataset import DEFECTIVE, LABELS, NUMERIC_ATTRIBUTES, Dataset
from .errors import EmptyDataset, EmptyMatrix, InsufficientData, LengthMismatch
from .prep import PrepParams, prepare

NA = "n/a"

# report rows: label and the attributes each row adds to the previous one
CUMULATIVE_SETS = (
    ("+Lines added", ("lines_added",)),
    ("+Lines removed", ("lines_removed",)),
    ("+Age", ("file_age_days",)),
    ("+Size (SLOC & Comments)", ("sloc", "comment_lines")),
    ("+Experience", ("maturity_days",)),
    ("+Time since last commit", ("time_since_last_commit_hours",)),
    ("+Owner", ("owner",)),
    ("+File name", ("file_name",)),
)

# descriptive statistics rows, in order
STAT_LABELS = {
    "lines_added": "Lines added",
    "lines_removed": "Lines removed",
    "file_age_days": "File age (days)",
    "sloc": "SLOC",
    "comment_lines": "Comment lines",
    "maturity_days": "Maturity/Expertise (days)",
    "time_since_last_commit_hours": "Time since last commit (hours)",
}


def cumulative_feature_sets() -> list[tuple[str, tuple[str, ...]]]:
    sets, acc = [], ()
    for label, added in CUMULATIVE_SETS:
        acc = acc + added
        sets.append((label, acc))
    return sets


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )


def confusion(predictions: Sequence[str], truth: Sequence[str]) -> ConfusionMatrix:
    """Counts with the defective class as positive."""
    if len(predictions) != len(truth):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(truth)} labels")
    tp = fp = tn = fn = 0
    for pred, actual in zip(predictions, truth):
        if pred not in LABELS or actual not in LABELS:
            raise ValueError(f"labels must be one of {LABELS}")
        if pred == DEFECTIVE:
            if actual == DEFECTIVE:
                tp += 1
            else:
                fp += 1
        elif actual == DEFECTIVE:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, tn, fn)


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


@dataclass(frozen=True)
class MetricSet:
    """Accuracy, precision, recall and false-positive rate; None where 0/0."""

    acc: float | None
    ppv: float | None
    tpr: float | None
    fpr: float | None
    specificity: float | None = None


def compute_metrics(cm: ConfusionMatrix) -> MetricSet:
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix has no records")
    return MetricSet(
        acc=_ratio(cm.tp + cm.tn, cm.total),
        ppv=_ratio(cm.tp, cm.tp + cm.fp),
        tpr=_ratio(cm.tp, cm.tp + cm.fn),
        fpr=_ratio(cm.fp, cm.fp + cm.tn),
        specificity=_ratio(cm.tn, cm.fp + cm.tn),
    )


def fmt(value: float | None) -> str:
    return NA if value is None else f"{value:.4f}"


def stratified_folds(labels: Sequence[str], k: int, seed: int) -> list[list[int]]:
    """Deal each class's shuffled indices round-robin over ``k`` folds.

    Dealing continues across classes, so fold sizes differ by at most one.
    """
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    position = 0
    for label in LABELS:
        members = [i for i, lab in enumerate(labels) if lab == label]
        for j in rng.permutation(len(members)):
            folds[position % k].append(members[j])
            position += 1
    return [sorted(f) for f in folds]


@dataclass
class CVResult:
    confusion: ConfusionMatrix
    metrics: MetricSet
    folds: list[list[int]] = field(repr=False)


def cross_validate(
    algorithm: str,
    train: Dataset,
    k: int = 10,
    seed: int = 0,
    features: Sequence[str] | None = None,
    **params,
) -> CVResult:
    """Stratified k-fold CV; per-fold confusion matrices are pooled before computing metrics."""
    if k < 2:
        raise ValueError("k must be >= 2")
    n = len(train)
    if n < k:
        raise InsufficientData(f"{n} records cannot fill {k} folds")
    labels = train.labels()
    folds = stratified_folds(labels, k, seed)
    pooled = ConfusionMatrix()
    for fold in folds:
        held = set(fold)
        fit_records = [r for i, r in enumerate(train.records) if i not in held]
        fit_labels = {r.label for r in fit_records}
        if fit_labels != set(LABELS):
            raise InsufficientData("a training fold lacks one of the classes")
        model = classifiers.train(algorithm, train.derive(fit_records), features, seed=seed, **params)
        test = [train.records[i] for i in fold]
        predictions = model.predict_many([r.features(model.feature_selection) for r in test])
        pooled = pooled + confusion(predictions, [r.label for r in test])
    return CVResult(pooled, compute_metrics(pooled), folds)


def holdout(model, validation: Dataset) -> tuple[ConfusionMatrix, MetricSet]:
    cm = confusion(model.predict_dataset(validation), validation.labels())
    return cm, compute_metrics(cm)


@dataclass(frozen=True)
class ReportRow:
    row_index: int
    variables: str
    algorithm: str
    phase: str  # "cv" or "holdout"
    metrics: MetricSet


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row_index", "variables", "algorithm", "phase", "tpr", "acc", "ppv", "fpr"])
        for r in self.rows:
            m = r.metrics
            w.writerow([r.row_index, r.variables, r.algorithm, r.phase, fmt(m.tpr), fmt(m.acc), fmt(m.ppv), fmt(m.fpr)])
        return buf.getvalue()

    def roc_points_csv(self, phase: str = "holdout") -> str:
        """True-positive vs false-positive rate per (row, algorithm)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fpr", "tpr", "row_label", "algorithm"])
        for r in self.rows:
            if r.phase == phase:
                w.writerow([fmt(r.metrics.fpr), fmt(r.metrics.tpr), r.variables, r.algorithm])
        return buf.getvalue()

    def lookup(self, row_index: int, algorithm: str, phase: str = "holdout") -> MetricSet:
        for r in self.rows:
            if (r.row_index, r.algorithm, r.phase) == (row_index, algorithm, phase):
                return r.metrics
        raise KeyError((row_index, algorithm, phase))


def cumulative_experiment(
    ds: Dataset,
    seed: int = 0,
    prep_params: PrepParams | None = None,
    algorithms: Sequence[str] = ALGORITHMS,
    feature_sets: Sequence[tuple[str, Sequence[str]]] | None = None,
    k: int = 10,
    phases: Sequence[str] = ("cv", "holdout"),
) -> ExperimentReport:
    """Prepare the data once, then train every algorithm on every variable set.

    By default the variable sets are the eight cumulative rows of CUMULATIVE_SETS; pass
    ``feature_sets`` for a custom (e.g. single-row) experiment.
    """
    prep_params = prep_params or PrepParams()
    prepared = prepare(ds, seed, prep_params)
    sets = list(feature_sets) if feature_sets is not None else cumulative_feature_sets()
    algorithms = [classifiers.canonical(a) for a in algorithms]
    rows = []
    for index, (label, features) in enumerate(sets, start=1):
        for algorithm in algorithms:
            if "cv" in phases:
                result = cross_validate(algorithm, prepared.train, k, seed, features)
                rows.append(ReportRow(index, label, algorithm, "cv", result.metrics))
            if "holdout" in phases:
                model = classifiers.train(algorithm, prepared.train, features, seed=seed)
                _, metrics = holdout(model, prepared.validation)
                rows.append(ReportRow(index, label, algorithm, "holdout", metrics))
    metadata = {
        "seed": seed,
        "prep": prep_params.to_dict(),
        "k": k,
        "train_counts": prepared.train.class_counts(),
        "validation_counts": prepared.validation.class_counts(),
        "provenance": ds.provenance,
    }
    return ExperimentReport(rows, metadata)


@dataclass(frozen=True)
class StatRow:
    attribute: str
    label: str
    min: float
    max: float
    mean: float
    median: float


def descriptive_stats(ds: Dataset) -> list[StatRow]:
    if len(ds) == 0:
        raise EmptyDataset("no records")
    rows = []
    for name in NUMERIC_ATTRIBUTES:
        values = [getattr(r, name) for r in ds.records]
        rows.append(
            StatRow(
                name,
                STAT_LABELS[name],
                min(values),
                max(values),
                statistics.fmean(values),
                statistics.median(values),
            )
        )
    return rows


def stats_csv(rows: Sequence[StatRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["attribute", "min", "max", "mean", "median"])
    for r in rows:
        w.writerow([r.label, fmt(r.min), fmt(r.max), fmt(r.mean), fmt(r.median)])
    return buf.getvalue()


@dataclass
class CorrelationMatrix:
    """Pearson coefficients with Fisher-z confidence intervals; None where undefined."""

    attributes: tuple[str, ...]
    rho: list[list[float | None]]
    ci: list[list[tuple[float, float] | None]]
    n: int
    confidence: float = 0.95

    def get(self, a: str, b: str) -> float | None:
        return self.rho[self.attributes.index(a)][self.attributes.index(b)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["attribute_a", "attribute_b", "rho", "ci_low", "ci_high"])
        for i, a in enumerate(self.attributes):
            for j, b in enumerate(self.attributes):
                ci = self.ci[i][j]
                w.writerow([a, b, fmt(self.rho[i][j]), fmt(ci and ci[0]), fmt(ci and ci[1])])
        return buf.getvalue()


def fisher_interval(r: float, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 3:
        return (-1.0, 1.0)
    if abs(r) >= 1.0:
        return (r, r)
    z = math.atanh(r)
    half = statistics.NormalDist().inv_cdf(0.5 + confidence / 2) / math.sqrt(n - 3)
    return (math.tanh(z - half), math.tanh(z + half))


def correlation_matrix(
    ds: Dataset, attributes: Sequence[str] = NUMERIC_ATTRIBUTES, confidence: float = 0.95
) -> CorrelationMatrix:
    n = len(ds)
    if n == 0:
        raise EmptyDataset("no records")
    if n < 3:
        raise InsufficientData("correlation needs at least 3 records")
    attributes = tuple(attributes)
    data = np.array([[float(getattr(r, a)) for a in attributes] for r in ds.records])
    centered = data - data.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    m = len(attributes)
    rho: list[list[float | None]] = [[None] * m for _ in range(m)]
    ci: list[list[tuple[float, float] | None]] = [[None] * m for _ in range(m)]
    for i in range(m):
        if norms[i] == 0:
            continue
        for j in range(i, m):
            if norms[j] == 0:
                continue
            if i == j:
                r = 1.0
            else:
                r = float(centered[:, i] @ centered[:, j] / (norms[i] * norms[j]))
                r = max(-1.0, min(1.0, r))
            rho[i][j] = rho[j][i] = r
            ci[i][j] = ci[j][i] = fisher_interval(r, n, confidence)
    return CorrelationMatrix(attributes, rho, ci, n, confidence)
