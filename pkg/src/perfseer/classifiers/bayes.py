"""Gaussian naive Bayes and a naive-structure Bayesian network over discretized features."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..dataset import Dataset
from .base import BAYES_NET, NAIVE_BAYES, TrainedModel, is_categorical, register, training_data

# classes are indexed 0 = clean, 1 = defective throughout
VARIANCE_FLOOR_REL = 1e-9
VARIANCE_FLOOR_ABS = 1e-9


def _frequency_table(x: np.ndarray, y: np.ndarray) -> dict:
    """Laplace-smoothed P(symbol | class) with one extra slot for unseen symbols."""
    symbols = sorted(set(x.tolist()))
    k = len(symbols) + 1
    table = {}
    unseen = []
    for c in (0, 1):
        xc = x[y == c].tolist()
        n_c = len(xc)
        counts = {s: 0 for s in symbols}
        for s in xc:
            counts[s] += 1
        table[c] = {s: math.log((counts[s] + 1) / (n_c + k)) for s in symbols}
        unseen.append(math.log(1 / (n_c + k)))
    return {
        "symbols": symbols,
        "log_prob": [[table[c][s] for s in symbols] for c in (0, 1)],
        "log_unseen": unseen,
    }


def _categorical_loglik(table: dict, x: np.ndarray) -> np.ndarray:
    index = {s: i for i, s in enumerate(table["symbols"])}
    out = np.empty((len(x), 2))
    for c in (0, 1):
        lp = table["log_prob"][c]
        out[:, c] = [lp[index[s]] if s in index else table["log_unseen"][c] for s in x.tolist()]
    return out


def _posterior(log_joint: np.ndarray) -> np.ndarray:
    """Normalized class posteriors (n x 2) from unnormalized log joints."""
    m = log_joint.max(axis=1, keepdims=True)
    w = np.exp(log_joint - m)
    return w / w.sum(axis=1, keepdims=True)


# -- naive Bayes --------------------------------------------------------------


def train_naive_bayes(
    train: Dataset, features: Sequence[str] | None = None, seed: int | None = None
) -> TrainedModel:
    """Relative-frequency priors, per-class Gaussians for numerics, smoothed tables for symbols."""
    features, columns, y = training_data(train, features)
    n = len(y)
    n_c = np.bincount(y, minlength=2)
    params: dict = {"log_prior": [math.log(n_c[0] / n), math.log(n_c[1] / n)], "features": []}
    for name, x in zip(features, columns):
        if is_categorical(name):
            params["features"].append({"kind": "categorical", **_frequency_table(x, y)})
            continue
        floor = max(VARIANCE_FLOOR_ABS, VARIANCE_FLOOR_REL * float(np.var(x)))
        means, variances = [], []
        for c in (0, 1):
            xc = x[y == c]
            means.append(float(xc.mean()))
            variances.append(max(float(xc.var()), floor))
        params["features"].append({"kind": "gaussian", "mean": means, "var": variances})
    return TrainedModel(NAIVE_BAYES, features, params, {"seed": seed, "records": n, "defective": int(n_c[1])})


def _gaussian_loglik(table: dict, x: np.ndarray) -> np.ndarray:
    out = np.empty((len(x), 2))
    for c in (0, 1):
        mu, var = table["mean"][c], table["var"][c]
        out[:, c] = -0.5 * math.log(2 * math.pi * var) - (x - mu) ** 2 / (2 * var)
    return out


def naive_bayes_posteriors(params: dict, columns) -> np.ndarray:
    log_joint = np.tile(np.asarray(params["log_prior"], dtype=float), (len(columns[0]), 1))
    for table, x in zip(params["features"], columns):
        if table["kind"] == "categorical":
            log_joint += _categorical_loglik(table, x)
        else:
            log_joint += _gaussian_loglik(table, x)
    return _posterior(log_joint)


@register(NAIVE_BAYES)
def _nb_probabilities(params, features, columns) -> np.ndarray:
    return naive_bayes_posteriors(params, columns)[:, 1]


# -- Bayesian network (class -> each feature) ---------------------------------


def equal_frequency_edges(x: np.ndarray, bins: int) -> list[float]:
    """Interior cut points splitting ``x`` into ``bins`` roughly equal-count bins.

    Duplicate cut points (from tied values) are merged, so fewer bins may result.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if bins == 1 or len(x) == 0:
        return []
    edges = np.quantile(x, np.arange(1, bins) / bins)
    edges = np.unique(edges)
    # a cut at the maximum would leave an empty top bin
    return [float(e) for e in edges if e < x.max()]


def bin_index(edges: Sequence[float], x: np.ndarray) -> np.ndarray:
    """Bin b holds values in (edges[b-1], edges[b]]; out-of-range values clamp to the end bins."""
    return np.searchsorted(np.asarray(edges, dtype=float), x, side="left")


def train_bayes_net(
    train: Dataset, features: Sequence[str] | None = None, bins: int = 10, seed: int | None = None
) -> TrainedModel:
    """Naive-structure network over equal-frequency bins with Laplace-smoothed CPTs."""
    features, columns, y = training_data(train, features)
    n = len(y)
    n_c = np.bincount(y, minlength=2)
    params: dict = {
        "bins": bins,
        "log_prior": [math.log((n_c[c] + 1) / (n + 2)) for c in (0, 1)],
        "features": [],
    }
    for name, x in zip(features, columns):
        if is_categorical(name):
            params["features"].append({"kind": "categorical", **_frequency_table(x, y)})
            continue
        edges = equal_frequency_edges(x, bins)
        b = bin_index(edges, x)
        k = len(edges) + 1
        cpt = []
        for c in (0, 1):
            counts = np.bincount(b[y == c], minlength=k)
            cpt.append([math.log((counts[i] + 1) / (n_c[c] + k)) for i in range(k)])
        params["features"].append({"kind": "discrete", "edges": edges, "log_cpt": cpt})
    return TrainedModel(BAYES_NET, features, params, {"seed": seed, "records": n, "defective": int(n_c[1])})


def bayes_net_posteriors(params: dict, columns) -> np.ndarray:
    log_joint = np.tile(np.asarray(params["log_prior"], dtype=float), (len(columns[0]), 1))
    for table, x in zip(params["features"], columns):
        if table["kind"] == "categorical":
            log_joint += _categorical_loglik(table, x)
        else:
            b = bin_index(table["edges"], x)
            cpt = np.asarray(table["log_cpt"], dtype=float)
            log_joint += cpt[:, b].T
    return _posterior(log_joint)


@register(BAYES_NET)
def _bn_probabilities(params, features, columns) -> np.ndarray:
    return bayes_net_posteriors(params, columns)[:, 1]
