"""Risk-vs-complexity benchmarking protocol.

Runs bootstrap/out-of-bag repetitions of each learner over each dataset,
collects per-stage risk-complexity curves, derives the risk target (mean
axis-parallel-baseline test risk) and complexity target, and aggregates
medians with order-statistic confidence intervals.  All randomness flows
from per-(dataset, repetition) seeds derived from one master seed, so serial
and parallel runs produce identical reports; wall-clock timings are kept in
a separate table for the same reason.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import lltboost, tgb
from .core import Standardizer, Task
from .datasets import Dataset
from .losses import LossKind, loss

INF = float("inf")


# ---------------------------------------------------------------------------
# aggregation primitives
# ---------------------------------------------------------------------------


class CIKind(str, Enum):
    RANKS_4_7 = "ranks_4_7"
    RANKS_3_8 = "ranks_3_8"


@dataclass(frozen=True)
class AggregateRow:
    median: float
    ci_low: float
    ci_high: float
    ci_kind: CIKind
    n_reps: int


@dataclass(frozen=True)
class CurvePoint:
    complexity: int
    test_risk: float
    train_risk: float
    r: int
    hyper: str


@dataclass(frozen=True)
class MethodCurve:
    points: tuple[CurvePoint, ...]


def median_with_ci(values, ci_kind) -> AggregateRow:
    """Median of exactly 10 values with a rank-based confidence interval.

    The median is the midpoint of the 5th and 6th order statistics (infinite
    if either is), the interval the (4th, 7th) or (3rd, 8th) order statistics
    depending on ``ci_kind``.  The rank choices are specific to samples of
    size 10, so any other length is rejected.
    """
    ci_kind = CIKind(ci_kind)
    vals = sorted(float(v) for v in values)
    if len(vals) != 10:
        raise ValueError("rank-based intervals are defined for exactly 10 values")
    median = (vals[4] + vals[5]) / 2.0
    if ci_kind is CIKind.RANKS_4_7:
        lo, hi = vals[3], vals[6]
    else:
        lo, hi = vals[2], vals[7]
    return AggregateRow(median=median, ci_low=lo, ci_high=hi,
                        ci_kind=ci_kind, n_reps=10)


def _median(values) -> float:
    """Midpoint-of-central-order-statistics median; inf-aware, any length."""
    vals = sorted(float(v) for v in values)
    if not vals:
        raise ValueError("median of empty sequence")
    k = len(vals)
    return (vals[(k - 1) // 2] + vals[k // 2]) / 2.0


def min_complexity_to_risk_target(curve: MethodCurve, risk_target: float) -> float:
    """Smallest complexity reaching test risk <= target; inf if never."""
    best = INF
    for p in curve.points:
        if p.test_risk <= risk_target and p.complexity < best:
            best = float(p.complexity)
    return best


def risk_at_complexity_target(curve: MethodCurve, complexity_target: float) -> float:
    """Test risk of the point with greatest complexity <= target; inf if none."""
    chosen = None
    for p in curve.points:
        if p.complexity <= complexity_target and (
            chosen is None or p.complexity >= chosen.complexity
        ):
            chosen = p
    return INF if chosen is None else float(chosen.test_risk)


def derive_targets(curves) -> tuple[float, float]:
    """Risk target and complexity target from the baseline's curves.

    The risk target is the mean test risk over every point of every
    repetition; the complexity target is the median over repetitions of the
    minimum complexity reaching that risk target (midpoint-of-5th/6th rule
    for 10 repetitions).
    """
    risks = [p.test_risk for c in curves for p in c.points]
    if not risks:
        raise ValueError("cannot derive targets from curves with no points")
    risk_target = float(np.mean(risks))
    mins = [min_complexity_to_risk_target(c, risk_target) for c in curves]
    return risk_target, _median(mins)


# ---------------------------------------------------------------------------
# bootstrap splits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapSplit:
    train: np.ndarray  # multiset of size min(n, cap), in drawn order
    test: np.ndarray  # sorted out-of-bag indices
    redraws: int  # > 0 only if an empty out-of-bag sample forced a re-draw


def bootstrap_split(n: int, seed, cap: int = 500) -> BootstrapSplit:
    if n < 2:
        raise ValueError("need at least two rows to split")
    size = min(n, cap)
    redraws = 0
    while True:
        rng = np.random.default_rng(seed + redraws if redraws else seed)
        train = rng.integers(0, n, size=size)
        test = np.setdiff1d(np.arange(n), train)
        if test.size > 0:
            return BootstrapSplit(train=train, test=test, redraws=redraws)
        redraws += 1


# ---------------------------------------------------------------------------
# protocol configuration
# ---------------------------------------------------------------------------

TGB_REG_GRID = (0.0001, 0.001, 0.01, 0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class ProtocolConfig:
    repetitions: int = 10
    max_rules: int = 10
    max_propositions: int = 5
    max_nonzeros: int = 5
    bootstrap_cap: int = 500
    tgb_reg_grid: tuple[float, ...] = TGB_REG_GRID
    validation_fraction: float = 0.25
    sparsity_accept_delta: float = 0.01
    methods: tuple[str, ...] = ("lltboost", "tgb")
    master_seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.repetitions < 1 or self.max_rules < 1 or self.jobs < 1:
            raise ValueError("repetitions, max_rules and jobs must be >= 1")
        unknown = set(self.methods) - {"lltboost", "tgb"}
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        object.__setattr__(self, "tgb_reg_grid", tuple(float(v) for v in self.tgb_reg_grid))
        object.__setattr__(self, "methods", tuple(self.methods))


def _fmt_hyper(value: float) -> str:
    return repr(float(value))


def _method_variants(config: ProtocolConfig) -> list[tuple[str, str]]:
    out = []
    if "lltboost" in config.methods:
        out.append(("lltboost", "default"))
    if "tgb" in config.methods:
        out.extend(("tgb", _fmt_hyper(reg)) for reg in config.tgb_reg_grid)
    return out


def _metrics_for(task: Task) -> list[tuple[str, LossKind]]:
    if task is Task.CLASSIFICATION:
        return [("logistic", LossKind.LOGISTIC), ("zero_one", LossKind.ZERO_ONE)]
    return [("squared", LossKind.SQUARED)]


# ---------------------------------------------------------------------------
# one (dataset, repetition) work unit
# ---------------------------------------------------------------------------


def _fit_variant(method, hyper, X, y, kind, config, fit_seed):
    if method == "lltboost":
        cfg = lltboost.LLTConfig(
            max_rules=config.max_rules,
            max_propositions=config.max_propositions,
            max_nonzeros=min(config.max_nonzeros, X.shape[1]),
            loss=kind,
            validation_fraction=config.validation_fraction,
            sparsity_accept_delta=config.sparsity_accept_delta,
            seed=fit_seed,
        )
        return lltboost.fit(X, y, cfg)
    cfg = tgb.TGBConfig(
        max_rules=config.max_rules,
        max_propositions=config.max_propositions,
        loss=kind,
        reg_strength=float(hyper),
        normalize_objective=True,
        seed=fit_seed,
    )
    return tgb.fit(X, y, cfg)


def _run_repetition(dataset: Dataset, config: ProtocolConfig, d_idx: int, rep: int):
    """Fit every method variant on one bootstrap split; returns plain data."""
    ss = np.random.SeedSequence([config.master_seed, d_idx, rep])
    split_seed, fit_seed = (int(v) for v in ss.generate_state(2))
    split = bootstrap_split(dataset.n_rows, split_seed, config.bootstrap_cap)

    X_train = dataset.X[split.train]
    X_test = dataset.X[split.test]
    xs = Standardizer.fit(X_train)
    X_train, X_test = xs.transform(X_train), xs.transform(X_test)
    y_train, y_test = dataset.y[split.train], dataset.y[split.test]
    if dataset.task is Task.REGRESSION:
        # targets standardized with train statistics; risks are reported on
        # this scale
        y_mean = float(y_train.mean())
        y_std = float(y_train.std()) or 1.0
        y_train = (y_train - y_mean) / y_std
        y_test = (y_test - y_mean) / y_std

    fit_kind = LossKind.LOGISTIC if dataset.task is Task.CLASSIFICATION else LossKind.SQUARED
    metrics = _metrics_for(dataset.task)

    fits = {}
    for method, hyper in _method_variants(config):
        error = None
        seconds = 0.0
        curves: dict[str, tuple[CurvePoint, ...]] = {name: () for name, _ in metrics}
        try:
            trace = _fit_variant(method, hyper, X_train, y_train, fit_kind, config, fit_seed)
            seconds = trace.wall_time_seconds
            staged = []
            for r, stage in enumerate(trace.stages):
                if r == 0:
                    continue
                ens = stage.ensemble
                staged.append(
                    (r, stage.complexity, ens.decision_function(X_train),
                     ens.decision_function(X_test))
                )
            for metric_name, metric_kind in metrics:
                curves[metric_name] = tuple(
                    CurvePoint(
                        complexity=complexity,
                        test_risk=float(np.mean(loss(metric_kind, y_test, s_te))),
                        train_risk=float(np.mean(loss(metric_kind, y_train, s_tr))),
                        r=r,
                        hyper=hyper,
                    )
                    for r, complexity, s_tr, s_te in staged
                )
        except Exception as exc:  # recorded, never aborts the sweep
            error = f"{type(exc).__name__}: {exc}"
        fits[(method, hyper)] = {"curves": curves, "seconds": seconds, "error": error}

    return {"d_idx": d_idx, "rep": rep, "redraws": split.redraws, "fits": fits}


def _task_args(args):
    return _run_repetition(*args)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, float):
        if v == INF:
            return "inf"
        if v == -INF:
            return "-inf"
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not np.isfinite(v):
        return _cell(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass
class BenchmarkReport:
    config: ProtocolConfig
    dataset_summaries: list[dict]
    targets: dict  # dataset -> metric -> target provenance
    complexity_rows: list[dict]
    risk_rows: list[dict]
    curve_rows: list[dict]  # flat, one per curve point
    timing_rows: list[dict]
    notes: list[str]

    def to_json_dict(self) -> dict:
        # wall-clock timings deliberately excluded: everything here is a
        # deterministic function of (datasets, config)
        from dataclasses import asdict

        cfg = asdict(self.config)
        cfg["tgb_reg_grid"] = list(self.config.tgb_reg_grid)
        cfg["methods"] = list(self.config.methods)
        # execution infrastructure, not protocol: a parallel run must emit
        # the same bytes as a serial one
        del cfg["jobs"]
        return _jsonable(
            {
                "config": cfg,
                "datasets": self.dataset_summaries,
                "targets": self.targets,
                "complexity_table": self.complexity_rows,
                "risk_table": self.risk_rows,
                "curves": self.curve_rows,
                "notes": self.notes,
            }
        )

    def write(self, out_dir) -> None:
        """Emit report.json plus flat CSV tables into ``out_dir``.

        Everything except timing_table.csv is byte-identical across runs
        with the same master seed, regardless of parallelism.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w", encoding="utf-8") as handle:
            json.dump(self.to_json_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
        self._write_csv(out / "complexity_table.csv", self.complexity_rows)
        self._write_csv(out / "risk_table.csv", self.risk_rows)
        self._write_csv(out / "curves.csv", self.curve_rows)
        self._write_csv(out / "timing_table.csv", self.timing_rows)

    @staticmethod
    def _write_csv(path, rows):
        with open(path, "w", newline="", encoding="utf-8") as handle:
            if not rows:
                handle.write("\n")
                return
            writer = csv.writer(handle)
            header = list(rows[0].keys())
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(row[k]) for k in header])


def _aggregate_cells(values, repetitions):
    cells = {"median": _median(values)}
    if repetitions == 10:
        for kind, tag in ((CIKind.RANKS_4_7, "ci47"), (CIKind.RANKS_3_8, "ci38")):
            agg = median_with_ci(values, kind)
            cells[f"{tag}_low"] = agg.ci_low
            cells[f"{tag}_high"] = agg.ci_high
    else:
        cells.update(ci47_low="", ci47_high="", ci38_low="", ci38_high="")
    cells["n_inf"] = sum(1 for v in values if float(v) == INF)
    cells["n_reps"] = len(values)
    return cells


def run_benchmark(datasets, config: ProtocolConfig) -> BenchmarkReport:
    """Run the full protocol over the given datasets.

    With ``config.jobs > 1`` the (dataset, repetition) work units run in a
    process pool; the report assembly is a deterministic reduction over the
    sorted unit keys, so the output is identical to a serial run.
    """
    datasets = list(datasets)
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ValueError("dataset names must be unique")

    tasks = [
        (dataset, config, d_idx, rep)
        for d_idx, dataset in enumerate(datasets)
        for rep in range(config.repetitions)
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            raw = list(pool.map(_task_args, tasks))
    else:
        raw = [_run_repetition(*args) for args in tasks]
    by_key = {(r["d_idx"], r["rep"]): r for r in raw}

    notes: list[str] = []
    curve_rows: list[dict] = []
    timing_rows: list[dict] = []
    complexity_rows: list[dict] = []
    risk_rows: list[dict] = []
    targets: dict = {}

    for d_idx, dataset in enumerate(datasets):
        reps = [by_key[(d_idx, rep)] for rep in range(config.repetitions)]
        for unit in reps:
            if unit["redraws"]:
                notes.append(
                    f"{dataset.name} rep {unit['rep']}: empty out-of-bag sample, "
                    f"re-drew split {unit['redraws']} time(s)"
                )
            for (method, hyper), fit in sorted(unit["fits"].items()):
                if fit["error"]:
                    notes.append(
                        f"{dataset.name} rep {unit['rep']} {method}[{hyper}] "
                        f"failed: {fit['error']} (recorded as inf)"
                    )
        metrics = _metrics_for(dataset.task)
        variants = _method_variants(config)

        # flat curve dump and timing aggregation over every variant
        for method, hyper in variants:
            seconds = [u["fits"][(method, hyper)]["seconds"] for u in reps]
            n_ok = sum(1 for u in reps if not u["fits"][(method, hyper)]["error"])
            timing_rows.append(
                {
                    "dataset": dataset.name,
                    "method": method,
                    "hyper": hyper,
                    "mean_fit_seconds": float(np.mean(seconds)) if seconds else 0.0,
                    "n_fits": n_ok,
                }
            )
            for u in reps:
                for metric_name, _ in metrics:
                    for p in u["fits"][(method, hyper)]["curves"][metric_name]:
                        curve_rows.append(
                            {
                                "dataset": dataset.name,
                                "method": method,
                                "hyper": hyper,
                                "metric": metric_name,
                                "rep": u["rep"],
                                "r": p.r,
                                "complexity": p.complexity,
                                "train_risk": p.train_risk,
                                "test_risk": p.test_risk,
                            }
                        )

        targets[dataset.name] = {}
        for metric_name, _ in metrics:
            # oracle baseline hyperparameter: the grid value whose mean test
            # risk over all points of all repetitions is lowest
            mean_by_reg = {}
            curves_by_reg = {}
            for method, hyper in variants:
                if method != "tgb":
                    continue
                curves = [
                    MethodCurve(points=u["fits"][(method, hyper)]["curves"][metric_name])
                    for u in reps
                ]
                curves_by_reg[hyper] = curves
                risks = [p.test_risk for c in curves for p in c.points]
                mean_by_reg[hyper] = float(np.mean(risks)) if risks else INF
            if not mean_by_reg or min(mean_by_reg.values()) == INF:
                notes.append(
                    f"{dataset.name}/{metric_name}: no baseline curves; "
                    "targets unavailable, tables skipped"
                )
                continue
            oracle = min(mean_by_reg, key=lambda h: (mean_by_reg[h], float(h)))
            risk_target, complexity_target = derive_targets(curves_by_reg[oracle])
            targets[dataset.name][metric_name] = {
                "risk_target": risk_target,
                "complexity_target": complexity_target,
                "tgb_oracle_reg": oracle,
                "tgb_mean_risk_by_reg": mean_by_reg,
            }

            table_variants = [v for v in variants if v[0] != "tgb"] + [("tgb", oracle)]
            for method, hyper in table_variants:
                curves = [
                    MethodCurve(points=u["fits"][(method, hyper)]["curves"][metric_name])
                    for u in reps
                ]
                mins = [min_complexity_to_risk_target(c, risk_target) for c in curves]
                row = {
                    "dataset": dataset.name,
                    "metric": metric_name,
                    "method": method,
                    "hyper": hyper,
                    "risk_target": risk_target,
                }
                row.update(_aggregate_cells(mins, config.repetitions))
                complexity_rows.append(row)

                if complexity_target != INF:
                    risks = [risk_at_complexity_target(c, complexity_target) for c in curves]
                    row = {
                        "dataset": dataset.name,
                        "metric": metric_name,
                        "method": method,
                        "hyper": hyper,
                        "complexity_target": complexity_target,
                    }
                    row.update(_aggregate_cells(risks, config.repetitions))
                    risk_rows.append(row)
            if complexity_target == INF:
                notes.append(
                    f"{dataset.name}/{metric_name}: baseline median complexity is inf; "
                    "risk-at-complexity table skipped"
                )

    summaries = [
        {
            "name": d.name,
            "n_rows": d.n_rows,
            "n_features": d.n_features,
            "task": d.task.value,
        }
        for d in datasets
    ]
    return BenchmarkReport(
        config=config,
        dataset_summaries=summaries,
        targets=targets,
        complexity_rows=complexity_rows,
        risk_rows=risk_rows,
        curve_rows=curve_rows,
        timing_rows=timing_rows,
        notes=notes,
    )
