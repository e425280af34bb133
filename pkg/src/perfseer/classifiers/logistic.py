"""Binary logistic regression fitted by IRLS with Wald inference.

Design columns are centered and scaled before fitting and the ridge penalty
acts on the scaled coefficients, so rescaling an input column rescales its
coefficient inversely and leaves the fitted probabilities unchanged.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataset import Dataset
from ..errors import NonConvergenceWarning, Unsupported
from .base import LOGISTIC, TrainedModel, is_categorical, register, sigmoid, training_data

INTERCEPT = "(intercept)"


def _design_layout(features: Sequence[str], columns) -> list[dict]:
    """Expansion of each feature into design columns (one-of-k against a reference level)."""
    layout = []
    for name, x in zip(features, columns):
        if is_categorical(name):
            levels = sorted(set(x.tolist()))
            layout.append({"feature": name, "reference": levels[0], "levels": levels[1:]})
        else:
            layout.append({"feature": name})
    return layout


def design_matrix(layout: list[dict], columns) -> tuple[np.ndarray, list[str]]:
    """Raw (unscaled) design matrix without the intercept, plus column names.

    Symbols not seen during training fall on the reference level.
    """
    blocks, names = [], []
    for entry, x in zip(layout, columns):
        if "levels" in entry:
            values = np.asarray(x, dtype=object)
            for level in entry["levels"]:
                blocks.append((values == level).astype(float))
                names.append(f"{entry['feature']}={level}")
        else:
            blocks.append(np.asarray(x, dtype=float))
            names.append(entry["feature"])
    n = len(columns[0]) if columns else 0
    X = np.column_stack(blocks) if blocks else np.zeros((n, 0))
    return X, names


def penalized_loglik(beta: np.ndarray, Z: np.ndarray, y: np.ndarray, ridge: float) -> float:
    """Log-likelihood on the scaled design ``Z`` (intercept first) minus the ridge term."""
    eta = Z @ beta
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    return ll - 0.5 * ridge * float(beta[1:] @ beta[1:])


def _gradient(beta, Z, y, ridge):
    g = Z.T @ (y - sigmoid(Z @ beta))
    g[1:] -= ridge * beta[1:]
    return g


def irls(Z: np.ndarray, y: np.ndarray, ridge: float, max_iter: int, tol: float):
    """Newton/IRLS with step halving. Returns (beta, covariance, iterations, converged)."""
    p = Z.shape[1]
    beta = np.zeros(p)
    penalty = np.full(p, ridge)
    penalty[0] = 0.0
    objective = penalized_loglik(beta, Z, y, ridge)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = sigmoid(Z @ beta)
        w = mu * (1 - mu)
        hessian = (Z * w[:, None]).T @ Z + np.diag(penalty)
        grad = _gradient(beta, Z, y, ridge)
        step = np.linalg.lstsq(hessian, grad, rcond=None)[0]
        t = 1.0
        while True:
            candidate = beta + t * step
            value = penalized_loglik(candidate, Z, y, ridge)
            if value >= objective - 1e-12 * abs(objective) or t < 1e-10:
                break
            t /= 2
        beta, objective = candidate, value
        if np.max(np.abs(t * step)) < tol:
            converged = True
            break
    mu = sigmoid(Z @ beta)
    w = mu * (1 - mu)
    hessian = (Z * w[:, None]).T @ Z + np.diag(penalty)
    covariance = np.linalg.pinv(hessian)
    return beta, covariance, it, converged


def wald_p_value(estimate: float, std_error: float) -> float:
    if std_error <= 0 or not math.isfinite(std_error):
        return 1.0
    return math.erfc(abs(estimate / std_error) / math.sqrt(2))


def train_logistic(
    train: Dataset,
    features: Sequence[str] | None = None,
    max_iter: int = 100,
    tol: float = 1e-8,
    ridge: float = 1e-8,
    seed: int | None = None,
) -> TrainedModel:
    features, columns, y = training_data(train, features)
    layout = _design_layout(features, columns)
    X, names = design_matrix(layout, columns)
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = np.column_stack([np.ones(len(y)), (X - center) / scale])
    yf = y.astype(float)
    beta_z, cov_z, iterations, converged = irls(Z, yf, ridge, max_iter, tol)
    if not converged:
        warnings.warn(
            f"IRLS did not reach tol={tol} within {max_iter} iterations",
            NonConvergenceWarning,
            stacklevel=2,
        )
    # back-transform to the raw design: beta = A @ beta_z
    p = Z.shape[1]
    A = np.zeros((p, p))
    A[0, 0] = 1.0
    A[0, 1:] = -center / scale
    A[1:, 1:] = np.diag(1.0 / scale)
    beta = A @ beta_z
    cov = A @ cov_z @ A.T
    std_err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    rows = []
    for name, est, se in zip([INTERCEPT] + names, beta, std_err):
        rows.append(
            {"term": name, "estimate": float(est), "std_error": float(se), "p_value": wald_p_value(est, se)}
        )
    params = {
        "design": layout,
        "intercept": float(beta[0]),
        "coefficients": [float(b) for b in beta[1:]],
        "terms": rows,
        "ridge": ridge,
        "center": [float(c) for c in center],
        "scale": [float(s) for s in scale],
    }
    meta = {
        "seed": seed,
        "records": len(y),
        "defective": int(y.sum()),
        "iterations": iterations,
        "converged": converged,
    }
    return TrainedModel(LOGISTIC, features, params, meta)


def linear_predictor(params: dict, columns) -> np.ndarray:
    X, _ = design_matrix(params["design"], columns)
    if X.shape[1] == 0:
        return np.full(X.shape[0], params["intercept"])
    return params["intercept"] + X @ np.asarray(params["coefficients"], dtype=float)


@register(LOGISTIC)
def _probabilities(params, features, columns) -> np.ndarray:
    return sigmoid(linear_predictor(params, columns))


@dataclass(frozen=True)
class CoefficientRow:
    term: str
    estimate: float
    std_error: float
    p_value: float


def coefficients(model: TrainedModel) -> list[CoefficientRow]:
    """Per-term estimates with the intercept as the first row."""
    if model.algorithm != LOGISTIC:
        raise Unsupported(f"coefficients are only defined for logistic models, not {model.algorithm}")
    return [CoefficientRow(**row) for row in model.parameters["terms"]]
