from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from ..dataset import CATEGORICAL_ATTRIBUTES, CLEAN, DEFECTIVE, Dataset, validate_features
from ..errors import ArityMismatch, EmptyDataset, SchemaError, SingleClass

FORMAT = "perfseer-model"
FORMAT_VERSION = 1
THRESHOLD = 0.5

C45, NAIVE_BAYES, BAYES_NET, LOGISTIC = "c45", "naive_bayes", "bayes_net", "logistic"
ALGORITHMS = (C45, NAIVE_BAYES, BAYES_NET, LOGISTIC)

# algorithm -> fn(parameters, feature_selection, columns) -> P(defective) per row
_PROBABILITY: dict[str, Callable] = {}


def register(algorithm: str):
    def deco(fn):
        _PROBABILITY[algorithm] = fn
        return fn

    return deco


def is_categorical(feature: str) -> bool:
    return feature in CATEGORICAL_ATTRIBUTES


def columns_from_rows(features: Sequence[str], rows: Sequence[Sequence]) -> list[np.ndarray]:
    """Column-major arrays: float64 for numeric features, str objects for categorical."""
    cols = []
    for j, name in enumerate(features):
        values = [row[j] for row in rows]
        if is_categorical(name):
            cols.append(np.array([str(v) for v in values], dtype=object))
        else:
            cols.append(np.asarray(values, dtype=float))
    return cols


def training_data(
    ds: Dataset, features: Sequence[str] | None = None, require_both: bool = True
) -> tuple[tuple[str, ...], list[np.ndarray], np.ndarray]:
    """Validated (features, columns, y) with y = 1 for defective records."""
    features = validate_features(features if features is not None else ds.feature_selection)
    if not features:
        raise SchemaError("at least one feature is required")
    if len(ds) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    labels = ds.labels()
    if any(lab not in (DEFECTIVE, CLEAN) for lab in labels):
        raise SchemaError("every training record needs a label")
    y = np.array([lab == DEFECTIVE for lab in labels], dtype=np.int64)
    if require_both and (y.min() == y.max()):
        raise SingleClass(f"training data has a single class: {labels[0]}")
    rows = [r.features(features) for r in ds.records]
    return features, columns_from_rows(features, rows), y


def _plain(obj):
    """Convert numpy scalars/arrays into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass(frozen=True)
class TrainedModel:
    """Algorithm tag plus JSON-native learned parameters.

    Predictions are computed from ``parameters`` alone, so a model read back
    from its JSON document predicts bit-identically.
    """

    algorithm: str
    feature_selection: tuple[str, ...]
    parameters: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise SchemaError(f"unknown algorithm {self.algorithm!r}")
        object.__setattr__(self, "feature_selection", tuple(self.feature_selection))
        object.__setattr__(self, "parameters", _plain(self.parameters))
        object.__setattr__(self, "metadata", _plain(self.metadata))

    def _columns(self, rows: Sequence[Sequence]) -> list[np.ndarray]:
        arity = len(self.feature_selection)
        for row in rows:
            if len(row) != arity:
                raise ArityMismatch(
                    f"expected {arity} values ({', '.join(self.feature_selection)}), got {len(row)}"
                )
        return columns_from_rows(self.feature_selection, rows)

    def probabilities(self, rows: Sequence[Sequence]) -> np.ndarray:
        """P(defective) for each feature vector in ``rows``."""
        if len(rows) == 0:
            return np.zeros(0)
        fn = _PROBABILITY[self.algorithm]
        return fn(self.parameters, self.feature_selection, self._columns(rows))

    def predict(self, vector: Sequence) -> tuple[str, float]:
        p = float(self.probabilities([vector])[0])
        return (DEFECTIVE if p >= THRESHOLD else CLEAN), p

    def predict_many(self, rows: Sequence[Sequence]) -> list[str]:
        return [DEFECTIVE if p >= THRESHOLD else CLEAN for p in self.probabilities(rows)]

    def predict_dataset(self, ds: Dataset) -> list[str]:
        return self.predict_many([r.features(self.feature_selection) for r in ds.records])

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "algorithm": self.algorithm,
            "feature_selection": list(self.feature_selection),
            "parameters": self.parameters,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping) -> "TrainedModel":
        if doc.get("format") != FORMAT:
            raise SchemaError("not a perfseer model document")
        if doc.get("version") != FORMAT_VERSION:
            raise SchemaError(f"unsupported model version {doc.get('version')}")
        return cls(doc["algorithm"], tuple(doc["feature_selection"]), doc["parameters"], doc["metadata"])

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
