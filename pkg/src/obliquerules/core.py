"""Domain types for additive rule ensembles with linear-threshold conditions.

A proposition is a sparse half-space indicator ``step{w.x >= t}``; a rule is a
conjunction of propositions with an output weight; an ensemble sums rule
outputs on top of an intercept.  Model complexity counts rules, propositions,
and nonzero proposition weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Task(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


def _as_row_matrix(x) -> tuple[np.ndarray, bool]:
    """Coerce a single vector or a matrix to 2-d, remembering which it was."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr.reshape(1, -1), True
    if arr.ndim != 2:
        raise ValueError(f"expected a vector or matrix, got ndim={arr.ndim}")
    return arr, False


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature affine transform ``(x - mean) / scale`` fitted on training data."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        scale = np.atleast_1d(np.asarray(self.scale, dtype=float))
        if mean.shape != scale.shape or mean.ndim != 1:
            raise ValueError("mean and scale must be 1-d arrays of equal length")
        if not np.all(scale > 0):
            raise ValueError("scale entries must be strictly positive")
        mean.flags.writeable = False
        scale.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("expected a 2-d feature matrix")
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        # zero-variance columns: center only, keep unit scale
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    @classmethod
    def identity(cls, n_features: int) -> "Standardizer":
        return cls(np.zeros(n_features), np.ones(n_features))

    def __eq__(self, other):
        if not isinstance(other, Standardizer):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(
            self.scale, other.scale
        )

    def __hash__(self):
        return hash((self.mean.tobytes(), self.scale.tobytes()))

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def transform(self, X) -> np.ndarray:
        X, single = _as_row_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"feature count mismatch: transform expects {self.n_features}, got {X.shape[1]}"
            )
        Z = (X - self.mean) / self.scale
        return Z[0] if single else Z


@dataclass(frozen=True, eq=False)
class SparseProposition:
    """Half-space indicator ``step{sum_j w_j x_j >= threshold}`` with sparse w.

    Weights are stored as a strictly increasing index array plus matching
    nonzero values.  An axis-parallel condition ``x_j <= t`` is expressed with
    weight -1 and threshold -t.

    >>> p = SparseProposition(indices=(0, 2), weights=(1.0, -0.5), threshold=0.25)
    >>> p.evaluate([1.0, 9.9, 1.0])
    1
    >>> p.evaluate([0.0, 0.0, 1.0])
    0
    """

    indices: np.ndarray
    weights: np.ndarray
    threshold: float

    def __post_init__(self):
        idx = np.atleast_1d(np.asarray(self.indices, dtype=np.int64))
        wts = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if idx.ndim != 1 or wts.ndim != 1 or idx.shape != wts.shape:
            raise ValueError("indices and weights must be 1-d arrays of equal length")
        if idx.size == 0:
            raise ValueError("a proposition needs at least one nonzero weight")
        if np.any(idx < 0):
            raise ValueError("feature indices must be nonnegative")
        if idx.size > 1 and not np.all(np.diff(idx) > 0):
            raise ValueError("feature indices must be strictly increasing")
        if not np.all(np.isfinite(wts)) or np.any(wts == 0):
            raise ValueError("weights must be finite and nonzero")
        if not np.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        idx.flags.writeable = False
        wts.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", wts)
        object.__setattr__(self, "threshold", float(self.threshold))

    @classmethod
    def from_dense(cls, w, threshold: float) -> "SparseProposition":
        """Build from a dense weight vector, keeping only exact nonzeros."""
        w = np.asarray(w, dtype=float)
        idx = np.flatnonzero(w)
        return cls(indices=idx, weights=w[idx], threshold=threshold)

    def __eq__(self, other):
        if not isinstance(other, SparseProposition):
            return NotImplemented
        return (
            np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
            and self.threshold == other.threshold
        )

    def __hash__(self):
        return hash((self.indices.tobytes(), self.weights.tobytes(), self.threshold))

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def _check_width(self, n_columns: int):
        if int(self.indices[-1]) >= n_columns:
            raise ValueError(
                f"proposition references feature {int(self.indices[-1])} "
                f"but input has only {n_columns} columns"
            )

    def activations(self, X) -> np.ndarray:
        """0/1 array of the indicator over the rows of ``X`` (standardized scale)."""
        X, _ = _as_row_matrix(X)
        self._check_width(X.shape[1])
        proj = X[:, self.indices] @ self.weights
        return (proj >= self.threshold).astype(float)

    def evaluate(self, x) -> int:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("evaluate expects a single feature vector")
        return int(self.activations(x.reshape(1, -1))[0])


@dataclass(frozen=True, eq=False)
class Rule:
    """Conjunction of propositions with an additive output weight."""

    propositions: tuple[SparseProposition, ...]
    weight: float

    def __post_init__(self):
        props = tuple(self.propositions)
        if len(props) == 0:
            raise ValueError("a rule needs at least one proposition")
        if not all(isinstance(p, SparseProposition) for p in props):
            raise ValueError("propositions must be SparseProposition instances")
        if not np.isfinite(self.weight):
            raise ValueError("rule weight must be finite")
        object.__setattr__(self, "propositions", props)
        object.__setattr__(self, "weight", float(self.weight))

    def __eq__(self, other):
        if not isinstance(other, Rule):
            return NotImplemented
        return self.weight == other.weight and self.propositions == other.propositions

    def __hash__(self):
        return hash((self.propositions, self.weight))

    def cover(self, X) -> np.ndarray:
        """0/1 array: rows where every proposition fires."""
        X, _ = _as_row_matrix(X)
        out = self.propositions[0].activations(X)
        for p in self.propositions[1:]:
            out *= p.activations(X)
        return out

    def evaluate(self, x) -> int:
        x = np.asarray(x, dtype=float)
        return int(self.cover(x.reshape(1, -1))[0])

    def complexity(self) -> int:
        """Number of propositions plus total nonzero proposition weights."""
        return len(self.propositions) + sum(p.nnz for p in self.propositions)


@dataclass(frozen=True, eq=False)
class RuleEnsemble:
    """Additive model ``score(x) = intercept + sum_i weight_i * rule_i(x~)``.

    Inputs to :meth:`decision_function` are raw feature vectors; the stored
    standardizer (fitted on training data) is applied before any rule is
    evaluated.
    """

    intercept: float
    rules: tuple[Rule, ...]
    task: Task
    standardizer: Standardizer

    def __post_init__(self):
        rules = tuple(self.rules)
        if not all(isinstance(r, Rule) for r in rules):
            raise ValueError("rules must be Rule instances")
        if not np.isfinite(self.intercept):
            raise ValueError("intercept must be finite")
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "task", Task(self.task))

    def __eq__(self, other):
        if not isinstance(other, RuleEnsemble):
            return NotImplemented
        return (
            self.intercept == other.intercept
            and self.task is other.task
            and self.rules == other.rules
            and self.standardizer == other.standardizer
        )

    def __hash__(self):
        return hash((self.intercept, self.rules, self.task, self.standardizer))

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    def decision_function(self, X) -> np.ndarray:
        X, single = _as_row_matrix(X)
        Z = self.standardizer.transform(X)
        score = np.full(Z.shape[0], self.intercept)
        for rule in self.rules:
            score += rule.weight * rule.cover(Z)
        return score[0] if single else score

    def score_one(self, x) -> float:
        return float(self.decision_function(np.asarray(x, dtype=float)))

    def predict(self, X) -> np.ndarray:
        """Regression: the score.  Classification: step of the score at 0."""
        score = self.decision_function(X)
        if self.task is Task.CLASSIFICATION:
            return (np.asarray(score) >= 0).astype(int)
        return score

    def complexity(self) -> int:
        return ensemble_complexity(self)


def conjunction_complexity(rule: Rule) -> int:
    return rule.complexity()


def ensemble_complexity(ensemble: RuleEnsemble) -> int:
    """Rule count plus per-rule complexities; 0 for the intercept-only model."""
    return ensemble.n_rules + sum(r.complexity() for r in ensemble.rules)


# --------------------------------------------------------------------------
# Fit traces shared by the boosting learners
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FitStage:
    """Snapshot after one boosting round: the refitted ensemble plus its stats."""

    ensemble: RuleEnsemble
    train_risk: float
    complexity: int


@dataclass(frozen=True, eq=False)
class FitTrace:
    """Nested sequence of ensembles with 0..r rules produced by one fit call."""

    stages: tuple[FitStage, ...]
    wall_time_seconds: float

    def __post_init__(self):
        stages = tuple(self.stages)
        if len(stages) == 0:
            raise ValueError("a trace holds at least the intercept-only stage")
        for m, stage in enumerate(stages):
            if stage.ensemble.n_rules != m:
                raise ValueError(f"stage {m} must hold an ensemble with {m} rules")
        object.__setattr__(self, "stages", stages)

    @property
    def final(self) -> RuleEnsemble:
        return self.stages[-1].ensemble

    @property
    def n_rounds(self) -> int:
        return len(self.stages) - 1
