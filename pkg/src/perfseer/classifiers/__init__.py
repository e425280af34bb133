"""The four classifiers behind one train/predict interface."""

from __future__ import annotations

from typing import Sequence

from ..dataset import Dataset
from .base import (
    ALGORITHMS,
    BAYES_NET,
    C45,
    LOGISTIC,
    NAIVE_BAYES,
    THRESHOLD,
    TrainedModel,
)
from .bayes import train_bayes_net, train_naive_bayes
from .c45 import train_c45
from .logistic import CoefficientRow, coefficients, train_logistic

# short names accepted on the command line
ALIASES = {
    "c45": C45,
    "j48": C45,
    "nb": NAIVE_BAYES,
    "naive_bayes": NAIVE_BAYES,
    "bayesnet": BAYES_NET,
    "bayes_net": BAYES_NET,
    "logreg": LOGISTIC,
    "logistic": LOGISTIC,
}

_TRAINERS = {
    C45: train_c45,
    NAIVE_BAYES: train_naive_bayes,
    BAYES_NET: train_bayes_net,
    LOGISTIC: train_logistic,
}


def canonical(algorithm: str) -> str:
    try:
        return ALIASES[algorithm.lower()]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}") from None


def train(
    algorithm: str,
    ds: Dataset,
    features: Sequence[str] | None = None,
    seed: int | None = None,
    **params,
) -> TrainedModel:
    return _TRAINERS[canonical(algorithm)](ds, features, seed=seed, **params)


def predict(model: TrainedModel, vector: Sequence) -> tuple[str, float]:
    return model.predict(vector)


__all__ = [
    "ALGORITHMS",
    "BAYES_NET",
    "C45",
    "LOGISTIC",
    "NAIVE_BAYES",
    "THRESHOLD",
    "CoefficientRow",
    "TrainedModel",
    "canonical",
    "coefficients",
    "predict",
    "train",
    "train_bayes_net",
    "train_c45",
    "train_logistic",
    "train_naive_bayes",
]
