"""Candidate classifiers: symbolic feature sets feeding a logistic head.

An individual is a list of feature programs plus logistic weights (bias
last). Program outputs are standardized with statistics frozen at fit time;
weights are trained by full-batch gradient descent on mean logistic loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, SimpleGroup
from .program import Program, eval_program, parse_program

PROB_CLAMP = 1e-9


@dataclass(frozen=True)
class Individual:
    """One candidate classifier: programs phi and head weights (bias last)."""

    features: tuple[Program, ...]
    weights: np.ndarray                    # (k+1,), bias last
    means: np.ndarray | None = None        # standardization stats frozen at fit time
    stds: np.ndarray | None = None
    train_iters: int = 0
    train_loss: float = float("nan")

    def __post_init__(self):
        k = len(self.features)
        if k < 1:
            raise ValueError("individual needs at least one feature program")
        if self.weights.shape != (k + 1,) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite with length |features|+1")
        self.weights.setflags(write=False)

    @property
    def k(self) -> int:
        return len(self.features)

    def complexity(self) -> int:
        return sum(p.size() for p in self.features)

    def to_json(self) -> dict:
        return {
            "features": [str(p) for p in self.features],
            "weights": list(map(float, self.weights)),
            "standardization": None if self.means is None else {
                "means": list(map(float, self.means)),
                "stds": list(map(float, self.stds)),
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Individual":
        std = obj.get("standardization")
        return cls(
            features=tuple(parse_program(s) for s in obj["features"]),
            weights=np.asarray(obj["weights"], dtype=float),
            means=None if std is None else np.asarray(std["means"], dtype=float),
            stds=None if std is None else np.asarray(std["stds"], dtype=float),
        )


@dataclass(frozen=True)
class LossMatrix:
    """Per-sample losses, probabilities, and hard labels for one individual."""

    losses: np.ndarray           # (m,) logistic loss, >= 0
    probabilities: np.ndarray    # (m,) in [clamp, 1-clamp]
    predictions: np.ndarray      # (m,) in {0, 1}; 1 iff probability >= 0.5


def new_individual(programs: list[Program]) -> Individual:
    """Unfitted individual with zero weights."""
    return Individual(features=tuple(programs), weights=np.zeros(len(programs) + 1))


def _feature_outputs(ind: Individual, ds: Dataset) -> np.ndarray:
    return np.column_stack([eval_program(p, ds) for p in ind.features])


def _standardize(phi: np.ndarray, means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    return (phi - means) / stds


def _design(ind: Individual, ds: Dataset) -> np.ndarray:
    phi = _feature_outputs(ind, ds)
    if ind.means is not None:
        phi = _standardize(phi, ind.means, ind.stds)
    return np.column_stack([phi, np.ones(ds.m)])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def predict_proba(ind: Individual, ds: Dataset) -> np.ndarray:
    """Predicted probabilities, clamped to [1e-9, 1-1e-9]."""
    z = _design(ind, ds) @ ind.weights
    return np.clip(_sigmoid(z), PROB_CLAMP, 1.0 - PROB_CLAMP)


def loss_matrix(ind: Individual, ds: Dataset) -> LossMatrix:
    p = predict_proba(ind, ds)
    y = ds.labels
    losses = -(y * np.log(p) + (1 - y) * np.log(1.0 - p))
    return LossMatrix(losses=losses, probabilities=p, predictions=(p >= 0.5).astype(int))


def loss_overall(ind: Individual, ds: Dataset) -> float:
    """Mean per-sample logistic loss over the whole dataset."""
    return float(np.mean(loss_matrix(ind, ds).losses))


def loss_on_group(ind: Individual, ds: Dataset, g: SimpleGroup) -> float | None:
    """Mean loss over the members of g, or None when g is empty on ds."""
    member = g.membership(ds).astype(bool)
    if not member.any():
        return None
    return float(np.mean(loss_matrix(ind, ds).losses[member]))


def _mean_loss(X1: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    p = np.clip(_sigmoid(X1 @ w), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1.0 - p))))


def loss_gradient(X1: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Analytic gradient of the mean logistic loss w.r.t. the weights."""
    p = _sigmoid(X1 @ w)
    return X1.T @ (p - y) / len(y)


def fit_weights(ind: Individual, ds: Dataset, iters: int = 10, lr: float = 0.1) -> Individual:
    """Train the logistic head by full-batch gradient descent.

    Standardization statistics are computed from ds and frozen on the result.
    A step that would increase the training loss triggers learning-rate
    halving (at most 5 times), then early stop. The recorded loss sequence is
    non-increasing.
    """
    assert iters >= 0 and lr > 0
    phi = _feature_outputs(ind, ds)
    means = phi.mean(axis=0)
    stds = phi.std(axis=0)
    stds = np.where(stds < 1e-12, 1.0, stds)
    X1 = np.column_stack([_standardize(phi, means, stds), np.ones(ds.m)])
    y = ds.labels.astype(float)

    w = ind.weights.copy()
    loss = _mean_loss(X1, y, w)
    used = 0
    step = lr
    halvings = 0
    for _ in range(iters):
        grad = loss_gradient(X1, y, w)
        while True:
            w_new = w - step * grad
            loss_new = _mean_loss(X1, y, w_new)
            if loss_new <= loss:
                break
            if halvings >= 5:
                w_new = None
                break
            step *= 0.5
            halvings += 1
        if w_new is None:
            break
        w, loss = w_new, loss_new
        used += 1

    return replace(ind, weights=w, means=means, stds=stds,
                   train_iters=used, train_loss=loss)


def export_model(ind: Individual, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(ind.to_json(), fh, indent=1, sort_keys=True)


def load_model(path: str) -> Individual:
    with open(path) as fh:
        return Individual.from_json(json.load(fh))
