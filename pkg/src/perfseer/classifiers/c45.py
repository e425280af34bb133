"""C4.5 decision tree: gain-ratio splits with pessimistic-error subtree replacement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from ..dataset import Dataset
from .base import C45, TrainedModel, is_categorical, register, training_data

# split candidates within this much of the best gain ratio count as ties
TIE_TOLERANCE = 1e-12
MIN_GAIN = 1e-12


@dataclass(frozen=True)
class Split:
    feature: int
    gain_ratio: float
    gain: float
    threshold: float | None = None  # None for a multiway categorical split


def entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _binary_entropy(pos: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Vectorized class entropy for nodes with ``pos`` positives out of ``n``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        p = pos / n
        q = 1.0 - p
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


def _numeric_split(x: np.ndarray, y: np.ndarray, min_leaf: int, parent_h: float):
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    cum_pos = np.cumsum(ys)
    # candidate boundary i separates xs[:i] from xs[i:]
    i = np.arange(1, n)
    ok = (xs[1:] > xs[:-1]) & (i >= min_leaf) & (n - i >= min_leaf)
    if not ok.any():
        return None
    i = i[ok]
    left_pos = cum_pos[i - 1].astype(float)
    right_pos = cum_pos[-1] - left_pos
    left_n = i.astype(float)
    right_n = n - left_n
    children_h = (left_n * _binary_entropy(left_pos, left_n) + right_n * _binary_entropy(right_pos, right_n)) / n
    gain = parent_h - children_h
    split_info = _binary_entropy(left_n, np.full_like(left_n, n))
    ratio = np.where(gain > MIN_GAIN, gain / split_info, -np.inf)
    best = ratio.max()
    if not np.isfinite(best):
        return None
    k = int(np.flatnonzero(ratio >= best - TIE_TOLERANCE)[0])
    lo, hi = xs[i[k] - 1], xs[i[k]]
    threshold = (lo + hi) / 2.0
    if not lo <= threshold < hi:  # adjacent floats
        threshold = lo
    return float(ratio[k]), float(gain[k]), float(threshold)


def _categorical_split(x: np.ndarray, y: np.ndarray, min_leaf: int, parent_h: float):
    values, inverse = np.unique(x, return_inverse=True)
    if len(values) < 2:
        return None
    sizes = np.bincount(inverse).astype(float)
    if (sizes >= min_leaf).sum() < 2:
        return None
    pos = np.bincount(inverse, weights=y).astype(float)
    n = float(len(x))
    children_h = float((sizes * _binary_entropy(pos, sizes)).sum() / n)
    gain = parent_h - children_h
    split_info = entropy(sizes)
    if gain <= MIN_GAIN or split_info <= 0:
        return None
    return gain / split_info, gain


def best_split(columns: Sequence[np.ndarray], y: np.ndarray, features: Sequence[str], min_leaf: int = 2):
    """Maximum gain-ratio split over all features, or None.

    Ties go to the earlier feature, then to the smaller threshold.
    """
    y = np.asarray(y)
    counts = np.bincount(y, minlength=2)
    parent_h = entropy(counts)
    best: Split | None = None
    for j, (name, x) in enumerate(zip(features, columns)):
        if is_categorical(name):
            found = _categorical_split(x, y, min_leaf, parent_h)
            cand = Split(j, found[0], found[1]) if found else None
        else:
            found = _numeric_split(x, y, min_leaf, parent_h)
            cand = Split(j, found[0], found[1], found[2]) if found else None
        if cand and (best is None or cand.gain_ratio > best.gain_ratio + TIE_TOLERANCE):
            best = cand
    return best


def _leaf(y: np.ndarray) -> dict:
    counts = np.bincount(y, minlength=2)
    return {"dist": [int(counts[0]), int(counts[1])]}


def _grow(columns, y, features, min_leaf) -> dict:
    node = _leaf(y)
    clean, defective = node["dist"]
    if clean == 0 or defective == 0 or len(y) < 2 * min_leaf:
        return node
    split = best_split(columns, y, features, min_leaf)
    if split is None:
        return node
    x = columns[split.feature]
    node["feature"] = split.feature
    if split.threshold is None:
        branches = {}
        for value in sorted(set(x.tolist())):
            mask = x == value
            branches[value] = _grow([c[mask] for c in columns], y[mask], features, min_leaf)
        node["branches"] = branches
    else:
        mask = x <= split.threshold
        node["threshold"] = split.threshold
        node["le"] = _grow([c[mask] for c in columns], y[mask], features, min_leaf)
        node["gt"] = _grow([c[~mask] for c in columns], y[~mask], features, min_leaf)
    return node


def added_errors(n: float, e: float, confidence: float) -> float:
    """Extra errors predicted at the upper confidence limit of the binomial error rate.

    Follows the pessimistic estimate used by C4.5 (and Weka's J48).
    """
    if confidence > 0.5:
        raise ValueError("confidence must not exceed 0.5")
    if e < 1:
        base = n * (1 - confidence ** (1 / n))
        if e == 0:
            return base
        return base + e * (added_errors(n, 1, confidence) - base)
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = NormalDist().inv_cdf(1 - confidence)
    f = (e + 0.5) / n
    r = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n)
    return r * n - e


def _children(node: dict) -> list[dict]:
    if "branches" in node:
        return list(node["branches"].values())
    if "le" in node:
        return [node["le"], node["gt"]]
    return []


def _leaf_estimate(node: dict, confidence: float) -> float:
    n = sum(node["dist"])
    e = n - max(node["dist"])
    return e + added_errors(n, e, confidence)


def _prune(node: dict, confidence: float) -> float:
    """Prune in place bottom-up; returns the estimated errors of the result."""
    children = _children(node)
    if not children:
        return _leaf_estimate(node, confidence)
    subtree = sum(_prune(child, confidence) for child in children)
    as_leaf = _leaf_estimate(node, confidence)
    if as_leaf <= subtree + 0.1:
        for key in ("feature", "threshold", "le", "gt", "branches"):
            node.pop(key, None)
        return as_leaf
    return subtree


def tree_size(node: dict) -> int:
    return 1 + sum(tree_size(c) for c in _children(node))


def tree_depth(node: dict) -> int:
    children = _children(node)
    return 0 if not children else 1 + max(tree_depth(c) for c in children)


def train_c45(
    train: Dataset,
    features: Sequence[str] | None = None,
    min_leaf: int = 2,
    confidence: float = 0.25,
    prune: bool = True,
    allow_single_class: bool = False,
    seed: int | None = None,
) -> TrainedModel:
    features, columns, y = training_data(train, features, require_both=not allow_single_class)
    root = _grow(columns, y, features, min_leaf)
    if prune:
        _prune(root, confidence)
    return TrainedModel(
        C45,
        features,
        {"root": root, "min_leaf": min_leaf, "confidence": confidence, "pruned": prune},
        {"seed": seed, "records": len(y), "defective": int(y.sum()), "nodes": tree_size(root)},
    )


def _node_probability(node: dict, row: Sequence) -> float:
    while True:
        if "branches" in node:
            child = node["branches"].get(row[node["feature"]])
            if child is None:  # symbol unseen at this node
                break
            node = child
        elif "le" in node:
            node = node["le"] if row[node["feature"]] <= node["threshold"] else node["gt"]
        else:
            break
    clean, defective = node["dist"]
    return defective / (clean + defective)


@register(C45)
def _probabilities(params: dict, features, columns) -> np.ndarray:
    rows = list(zip(*[c.tolist() for c in columns]))
    return np.array([_node_probability(params["root"], row) for row in rows], dtype=float)
