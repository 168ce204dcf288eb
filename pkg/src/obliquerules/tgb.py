"""Axis-parallel threshold boosting baseline.

Rules are conjunctions of single-feature threshold conditions found by
exhaustive scan; the rest of the pipeline (fully corrective weight refits,
staged traces) matches the oblique learner so the two are directly
comparable at equal rule counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from time import perf_counter
from typing import NamedTuple

import numpy as np

from .core import FitStage, FitTrace, Rule, RuleEnsemble, SparseProposition, Standardizer
from .losses import LossKind, fitting_task, gradient, init_intercept, loss
from .sparse_logreg import corrective_refit


@dataclass(frozen=True)
class TGBConfig:
    """Settings for the axis-parallel booster.

    ``reg_strength`` enters the proposition score as
    ``|<g, q>| / sqrt(reg_strength + <q, q>)`` when ``normalize_objective``
    is on; with normalization off the score is the plain gradient sum
    ``|<g, q>|`` and ``reg_strength`` is ignored.
    """

    max_rules: int = 10
    max_propositions: int = 5
    loss: LossKind = LossKind.LOGISTIC
    reg_strength: float = 0.0
    normalize_objective: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_rules < 1 or self.max_propositions < 1:
            raise ValueError("rule and proposition budgets must be >= 1")
        if self.reg_strength < 0:
            raise ValueError("reg_strength must be nonnegative")
        object.__setattr__(self, "loss", LossKind(self.loss))


class AxisCandidate(NamedTuple):
    feature: int
    direction: str  # ">=" or "<="
    threshold: float
    score: float

    def to_proposition(self) -> SparseProposition:
        if self.direction == ">=":
            return SparseProposition((self.feature,), (1.0,), self.threshold)
        return SparseProposition((self.feature,), (-1.0,), -self.threshold)


def best_axis_proposition(active, X, g, reg_strength: float = 0.0,
                          normalize: bool = True) -> AxisCandidate | None:
    """Exhaustive scan over single-feature threshold conditions.

    Candidate thresholds are the midpoints between consecutive distinct
    feature values over the active rows, in both directions.  Ties are
    broken toward the lowest feature index, then the smallest threshold,
    then ``>=`` before ``<=``.  Returns ``None`` when no feature has two
    distinct values.
    """
    active = np.asarray(active, dtype=int)
    ga = g[active]
    total = float(ga.sum())
    n_act = active.size
    best: AxisCandidate | None = None
    for j in range(X.shape[1]):
        vals = X[active, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cum = np.cumsum(ga[order])
        edges = np.flatnonzero(sv[:-1] < sv[1:])
        if edges.size == 0:
            continue
        mids = 0.5 * (sv[edges] + sv[edges + 1])
        le_sum = cum[edges]
        ge_sum = total - le_sum
        if normalize:
            le_count = edges + 1.0
            score_le = np.abs(le_sum) / np.sqrt(reg_strength + le_count)
            score_ge = np.abs(ge_sum) / np.sqrt(reg_strength + (n_act - le_count))
        else:
            score_le = np.abs(le_sum)
            score_ge = np.abs(ge_sum)
        # interleave so that, within this feature, candidates are ordered by
        # ascending threshold with >= ahead of <= at the same threshold
        flat = np.empty(2 * edges.size)
        flat[0::2] = score_ge
        flat[1::2] = score_le
        k = int(np.argmax(flat))
        score = float(flat[k])
        if best is None or score > best.score:
            mid = float(mids[k // 2])
            direction = ">=" if k % 2 == 0 else "<="
            best = AxisCandidate(j, direction, mid, score)
    return best


def _grow_conjunction(Z, g, cfg: TGBConfig) -> list[SparseProposition] | None:
    active = np.arange(Z.shape[0])
    body: list[SparseProposition] = []
    current = 0.0
    for _ in range(cfg.max_propositions):
        cand = best_axis_proposition(
            active, Z, g, cfg.reg_strength, cfg.normalize_objective
        )
        if cand is None or cand.score <= current:
            break
        prop = cand.to_proposition()
        keep = prop.activations(Z[active]) >= 0.5
        if not keep.any():
            break
        body.append(prop)
        active = active[keep]
        current = cand.score
    return body or None


def fit(X, y, cfg: TGBConfig) -> FitTrace:
    """Boost up to ``cfg.max_rules`` axis-parallel rules, tracing every stage.

    Mirrors the oblique learner's loop - standardize, grow one conjunction
    per round on the current gradients, then refit all weights jointly with
    a warm start - but uses the exhaustive single-feature scan and no
    validation carve-out, so training risk is measured on all rows.
    """
    t_start = perf_counter()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("features must be a matrix with one target per row")
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two training rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("features and targets must be finite")
    kind = cfg.loss
    task = fitting_task(kind)
    if kind is LossKind.LOGISTIC and not np.all((y == 0) | (y == 1)):
        raise ValueError("classification targets must be in {0, 1}")

    standardizer = Standardizer.fit(X)
    Z = standardizer.transform(X)
    beta = np.array([init_intercept(kind, y, clamp_single_class=True)])
    scores = np.full(n, beta[0])
    covers: list[np.ndarray] = []
    bodies: list[list[SparseProposition]] = []

    def stage_from(beta_vec) -> FitStage:
        rules = tuple(
            Rule(propositions=tuple(b), weight=float(w))
            for b, w in zip(bodies, beta_vec[1:])
        )
        ensemble = RuleEnsemble(
            intercept=float(beta_vec[0]), rules=rules, task=task, standardizer=standardizer
        )
        risk = float(np.mean(loss(kind, y, scores)))
        return FitStage(ensemble=ensemble, train_risk=risk, complexity=ensemble.complexity())

    stages = [stage_from(beta)]
    for _ in range(cfg.max_rules):
        g = gradient(kind, y, scores)
        body = _grow_conjunction(Z, g, cfg)
        if body is None:
            break
        cover = body[0].activations(Z)
        for prop in body[1:]:
            cover *= prop.activations(Z)
        covers.append(cover)
        bodies.append(body)
        design = np.column_stack([np.ones(n)] + covers)
        warm = np.append(beta, 0.0)
        beta = corrective_refit(design, y, kind, warm)
        scores = design @ beta
        stages.append(stage_from(beta))

    return FitTrace(stages=tuple(stages), wall_time_seconds=perf_counter() - t_start)
