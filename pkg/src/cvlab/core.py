"""Domain primitives for two-class performance assessment.

Conventions used throughout the package:

- A dataset is stratified into class 1 and class 2 feature matrices.
- A trained classifier is represented by a :class:`ScoringRule` mapping a
  feature vector to a real score.  Scores are oriented so that *higher score
  means class 2*; a well-behaved classifier therefore has AUC above 0.5.
- The zero-one loss classifies as class 1 when ``score < th`` and as class 2
  when ``score >= th`` (equality breaks toward class 2, a fixed convention so
  the loss is deterministic).
- The two-sample rank kernel ``mw_kernel(a, b)`` is 0, 0.5, 1 for a > b,
  a == b, a < b.  Ties are exact floating-point ties, no epsilon.
- The empirical AUC of score samples ``s1`` (class 1) and ``s2`` (class 2) is
  the mean of the kernel over all n1*n2 pairs.
"""

from __future__ import annotations

import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DomainError(ValueError):
    """Invalid input: wrong shape, non-finite values, empty class, bad label."""


class DivisibilityError(DomainError):
    """A fold count that does not divide the number of observations."""


def _as_float_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise DomainError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DomainError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class StratifiedDataset:
    """Two-class dataset: n1 x p features for class 1, n2 x p for class 2."""

    class1: np.ndarray
    class2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "class1", _as_float_matrix(self.class1, "class1"))
        object.__setattr__(self, "class2", _as_float_matrix(self.class2, "class2"))
        if self.class1.shape[1] != self.class2.shape[1]:
            raise DomainError(
                "class matrices disagree on dimension: "
                f"{self.class1.shape[1]} vs {self.class2.shape[1]}"
            )

    @property
    def n1(self) -> int:
        return self.class1.shape[0]

    @property
    def n2(self) -> int:
        return self.class2.shape[0]

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def p(self) -> int:
        return self.class1.shape[1]

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        """All observations as one matrix plus a {1,2} label vector.

        Class-1 rows come first; the row order is the fixed observation order
        used by the pooled (error-rate) resampling estimators.
        """
        features = np.vstack([self.class1, self.class2])
        labels = np.concatenate(
            [np.ones(self.n1, dtype=int), np.full(self.n2, 2, dtype=int)]
        )
        return features, labels

    def restratify(self, features: np.ndarray, labels: np.ndarray) -> "StratifiedDataset":
        """Rebuild a stratified dataset from pooled rows (used by fold logic)."""
        m1 = labels == 1
        m2 = labels == 2
        if not m1.any() or not m2.any():
            raise DomainError("training subset lost one of the classes")
        return StratifiedDataset(features[m1], features[m2])


@dataclass(frozen=True, eq=False)
class LabeledPoint:
    """A single observation with its class tag (1 or 2)."""

    features: np.ndarray
    label: int

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 1:
            raise DomainError("features must be a 1-D vector")
        if not np.all(np.isfinite(feats)):
            raise DomainError("features contain non-finite values")
        feats = feats.copy()
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)
        if self.label not in (1, 2):
            raise DomainError(f"label must be 1 or 2, got {self.label}")


class ScoringRule(ABC):
    """A trained classifier: a deterministic map from feature vector to score.

    Higher scores point toward class 2.
    """

    @abstractmethod
    def score(self, x: np.ndarray) -> float:
        """Score a single feature vector of length p."""

    def score_many(self, X: np.ndarray) -> np.ndarray:
        """Score the rows of an (m, p) matrix.  Default: row-by-row loop."""
        X = np.asarray(X, dtype=float)
        return np.array([self.score(row) for row in X], dtype=float)


@dataclass(frozen=True, eq=False)
class LinearScoringRule(ScoringRule):
    """score(x) = weights . x + offset"""

    weights: np.ndarray
    offset: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def p(self) -> int:
        return self.weights.shape[0]

    def score(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.p:
            raise DomainError(f"expected dimension {self.p}, got {x.shape[0]}")
        return float(self.weights @ x + self.offset)

    def score_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.p:
            raise DomainError(f"expected dimension {self.p}, got {X.shape[1]}")
        return X @ self.weights + self.offset


class Trainer(ABC):
    """A training procedure: deterministic map from dataset to scoring rule.

    Implementations must be pure functions of the dataset and their own
    hyperparameters; any internal randomness has to be seed-parameterized.
    """

    name: str = "trainer"

    @abstractmethod
    def train(self, dataset: StratifiedDataset) -> ScoringRule:
        ...


def mw_kernel(a: float, b: float) -> float:
    """Two-sample rank kernel: 0 if a > b, 0.5 if a == b, 1 if a < b."""
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("mw_kernel requires finite scores")
    if a > b:
        return 0.0
    if a < b:
        return 1.0
    return 0.5


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean rank of their block."""
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    n = values.size
    is_new = np.empty(n, dtype=bool)
    is_new[0] = True
    np.not_equal(sorted_values[1:], sorted_values[:-1], out=is_new[1:])
    starts = np.flatnonzero(is_new)
    sizes = np.diff(np.append(starts, n))
    mid_of_block = starts + 1 + (sizes - 1) / 2.0
    ranks = np.empty(n, dtype=float)
    ranks[order] = np.repeat(mid_of_block, sizes)
    return ranks


def empirical_auc(scores1, scores2) -> float:
    """Mean of the rank kernel over all pairs (class-1 score, class-2 score).

    Equals the Mann-Whitney statistic normalized to [0, 1]; 0.5 for all-tied
    scores, 1.0 when every class-2 score exceeds every class-1 score.
    Computed through midranks, so large samples cost O(n log n) rather than
    one kernel evaluation per pair; ranks are half-integers, which keeps the
    result exactly equal to the pair-averaged kernel.
    """
    s1 = np.asarray(scores1, dtype=float).reshape(-1)
    s2 = np.asarray(scores2, dtype=float).reshape(-1)
    if s1.size == 0 or s2.size == 0:
        raise DomainError("empirical_auc requires non-empty score vectors")
    if not (np.all(np.isfinite(s1)) and np.all(np.isfinite(s2))):
        raise DomainError("empirical_auc requires finite scores")
    n1, n2 = s1.size, s2.size
    ranks = _midranks(np.concatenate([s1, s2]))
    rank_sum_2 = float(ranks[n1:].sum())
    wins_plus_half_ties = rank_sum_2 - n2 * (n2 + 1) / 2.0
    return wins_plus_half_ties / (n1 * n2)


def pairwise_kernel(scores1: np.ndarray, scores2: np.ndarray) -> np.ndarray:
    """(n1, n2) matrix of kernel values for all score pairs."""
    s1 = np.asarray(scores1, dtype=float).reshape(-1, 1)
    s2 = np.asarray(scores2, dtype=float).reshape(1, -1)
    return (s1 < s2).astype(float) + 0.5 * (s1 == s2)


def classify(score: float, th: float) -> int:
    """Predicted class under the fixed tie-break: score >= th means class 2."""
    return 2 if score >= th else 1


def zero_one_loss(rule: ScoringRule, point: LabeledPoint, th: float) -> float:
    """1.0 on misclassification, 0.0 otherwise."""
    predicted = classify(rule.score(point.features), float(th))
    return float(predicted != point.label)


def zero_one_losses(scores: np.ndarray, labels: np.ndarray, th: float) -> np.ndarray:
    """Vectorized zero-one loss for score/label vectors."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    predicted = np.where(scores >= float(th), 2, 1)
    return (predicted != labels).astype(float)


def read_dataset_csv(path: str | Path) -> StratifiedDataset:
    """Load a dataset CSV with header ``class,f1,...,fp`` and labels in {1,2}."""
    path = Path(path)
    rows1: list[list[float]] = []
    rows2: list[list[float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty dataset file") from None
        if not header or header[0] != "class":
            raise DomainError(f"{path}: first column must be 'class'")
        p = len(header) - 1
        if p < 1:
            raise DomainError(f"{path}: no feature columns")
        expected = ["class"] + [f"f{j}" for j in range(1, p + 1)]
        if header != expected:
            raise DomainError(f"{path}: header must be {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != p + 1:
                raise DomainError(f"{path}:{lineno}: expected {p + 1} fields")
            try:
                label = int(row[0])
                feats = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
            if label == 1:
                rows1.append(feats)
            elif label == 2:
                rows2.append(feats)
            else:
                raise DomainError(f"{path}:{lineno}: class must be 1 or 2")
    if not rows1 or not rows2:
        raise DomainError(f"{path}: both classes must be present")
    return StratifiedDataset(np.array(rows1), np.array(rows2))


def write_dataset_csv(dataset: StratifiedDataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class"] + [f"f{j}" for j in range(1, dataset.p + 1)])
        for row in dataset.class1:
            writer.writerow([1] + [repr(float(v)) for v in row])
        for row in dataset.class2:
            writer.writerow([2] + [repr(float(v)) for v in row])
