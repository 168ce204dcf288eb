import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obliquerules import lltboost
from obliquerules.datasets import Dataset, make_oblique
from obliquerules.core import Task
from obliquerules.evaluation import (
    INF,
    AggregateRow,
    CIKind,
    CurvePoint,
    MethodCurve,
    ProtocolConfig,
    bootstrap_split,
    derive_targets,
    median_with_ci,
    min_complexity_to_risk_target,
    risk_at_complexity_target,
    run_benchmark,
)


def curve(pairs, hyper="h"):
    return MethodCurve(
        points=tuple(
            CurvePoint(complexity=c, test_risk=r, train_risk=0.0, r=i + 1, hyper=hyper)
            for i, (c, r) in enumerate(pairs)
        )
    )


finite_or_inf = st.one_of(
    st.floats(min_value=-100, max_value=100, allow_nan=False),
    st.just(INF),
)


# ---------------------------------------------------------------------------
# target operators
# ---------------------------------------------------------------------------


def test_min_complexity_hand_examples():
    c = curve([(3, 0.5), (5, 0.3), (9, 0.1)])
    assert min_complexity_to_risk_target(c, 0.25) == 9.0
    assert min_complexity_to_risk_target(c, 0.05) == INF
    assert min_complexity_to_risk_target(c, 0.5) == 3.0


def test_risk_at_complexity_hand_examples():
    c = curve([(3, 0.5), (5, 0.3), (9, 0.1)])
    assert risk_at_complexity_target(c, 6) == 0.3
    assert risk_at_complexity_target(c, 2) == INF
    assert risk_at_complexity_target(c, 9) == 0.1


def test_operators_on_empty_curve():
    empty = MethodCurve(points=())
    assert min_complexity_to_risk_target(empty, 1.0) == INF
    assert risk_at_complexity_target(empty, 100.0) == INF


@given(
    pairs=st.lists(
        st.tuples(st.integers(1, 40), st.floats(0, 10, allow_nan=False)),
        min_size=0,
        max_size=12,
    ),
    t1=st.floats(0, 10, allow_nan=False),
    t2=st.floats(0, 10, allow_nan=False),
)
def test_min_complexity_monotone_in_target(pairs, t1, t2):
    c = curve(pairs)
    lo, hi = min(t1, t2), max(t1, t2)
    assert min_complexity_to_risk_target(c, hi) <= min_complexity_to_risk_target(c, lo)


@given(
    pairs=st.lists(
        st.tuples(st.integers(1, 40), st.floats(0, 10, allow_nan=False)),
        min_size=1,
        max_size=12,
    ),
    t1=st.floats(0, 50, allow_nan=False),
    t2=st.floats(0, 50, allow_nan=False),
)
def test_risk_at_complexity_selected_point_monotone(pairs, t1, t2):
    # the complexity of the selected point is nondecreasing in the target
    c = curve(pairs)
    lo, hi = min(t1, t2), max(t1, t2)

    def chosen_complexity(target):
        best = -1
        for p in c.points:
            if p.complexity <= target:
                best = max(best, p.complexity)
        return best

    assert chosen_complexity(hi) >= chosen_complexity(lo)


# ---------------------------------------------------------------------------
# median and rank intervals
# ---------------------------------------------------------------------------


def test_median_with_ci_hand_examples():
    vals = list(range(1, 11))
    agg = median_with_ci(vals, CIKind.RANKS_4_7)
    assert agg == AggregateRow(5.5, 4.0, 7.0, CIKind.RANKS_4_7, 10)
    agg = median_with_ci(vals, CIKind.RANKS_3_8)
    assert (agg.ci_low, agg.ci_high) == (3.0, 8.0)


def test_median_infinite_when_sixth_order_stat_infinite():
    vals = [1.0] * 5 + [INF] * 5
    assert median_with_ci(vals, CIKind.RANKS_4_7).median == INF
    vals = [1.0] * 6 + [INF] * 4  # sixth value finite -> finite midpoint
    assert math.isfinite(median_with_ci(vals, CIKind.RANKS_4_7).median)


def test_median_with_ci_requires_exactly_ten():
    for k in (0, 5, 9, 11):
        with pytest.raises(ValueError):
            median_with_ci([1.0] * k, CIKind.RANKS_4_7)


def test_median_order_does_not_matter():
    vals = [7, 1, 9, 3, 10, 2, 8, 5, 4, 6]
    assert median_with_ci(vals, CIKind.RANKS_3_8) == median_with_ci(
        sorted(vals), CIKind.RANKS_3_8
    )


@given(vals=st.lists(finite_or_inf, min_size=10, max_size=10))
@settings(max_examples=200)
def test_ci_brackets_median_for_both_kinds(vals):
    for kind in CIKind:
        agg = median_with_ci(vals, kind)
        assert agg.ci_low <= agg.median <= agg.ci_high


def test_derive_targets_single_repetition():
    rt, ct = derive_targets([curve([(3, 0.4), (5, 0.2)])])
    assert abs(rt - 0.3) <= 1e-15
    assert ct == 5.0


def test_derive_targets_pools_points_across_repetitions():
    rt, ct = derive_targets([curve([(2, 1.0)]), curve([(4, 0.0), (6, 0.0)])])
    assert abs(rt - 1.0 / 3.0) <= 1e-15
    # rep 1 never reaches 1/3 -> inf; rep 2 reaches it at complexity 4
    assert ct == INF or ct > 4.0  # midpoint of (4, inf) is inf
    assert ct == INF


def test_derive_targets_rejects_empty():
    with pytest.raises(ValueError):
        derive_targets([MethodCurve(points=())])


# ---------------------------------------------------------------------------
# bootstrap splits
# ---------------------------------------------------------------------------


def test_bootstrap_split_sizes_and_disjointness():
    s = bootstrap_split(200, seed=5)
    assert s.train.size == 200
    assert np.all((0 <= s.train) & (s.train < 200))
    assert np.array_equal(s.test, np.unique(s.test))
    assert not set(s.test) & set(s.train)
    assert set(s.train) | set(s.test) == set(range(200))


def test_bootstrap_split_caps_train_size():
    s = bootstrap_split(1200, seed=5, cap=500)
    assert s.train.size == 500
    assert s.test.size == 1200 - np.unique(s.train).size


def test_bootstrap_split_deterministic_and_seed_sensitive():
    a = bootstrap_split(60, seed=9)
    b = bootstrap_split(60, seed=9)
    c = bootstrap_split(60, seed=10)
    assert np.array_equal(a.train, b.train) and np.array_equal(a.test, b.test)
    assert not np.array_equal(a.train, c.train)


def test_bootstrap_split_redraws_until_out_of_bag_nonempty():
    seen_redraw = False
    for seed in range(200):
        s = bootstrap_split(2, seed=seed)
        assert s.test.size > 0
        seen_redraw = seen_redraw or s.redraws > 0
    assert seen_redraw


# ---------------------------------------------------------------------------
# protocol runs
# ---------------------------------------------------------------------------


def small_config(**kw):
    base = dict(
        repetitions=10,
        max_rules=2,
        max_propositions=2,
        bootstrap_cap=50,
        tgb_reg_grid=(0.01, 1.0),
        methods=("tgb",),
        master_seed=3,
    )
    base.update(kw)
    return ProtocolConfig(**base)


def test_report_counts_one_aggregate_row_per_metric_and_curves_per_rep():
    data = [make_oblique(n=60, d=3, noise=0.1, seed=0)]
    rep = run_benchmark(data, small_config())
    # classification reports two metrics; one table row per (metric, method)
    assert len(rep.complexity_rows) == 2
    for metric in ("logistic", "zero_one"):
        rows = [
            r
            for r in rep.curve_rows
            if r["metric"] == metric and r["hyper"] == repr(0.01)
        ]
        assert {r["rep"] for r in rows} == set(range(10))
    oracle = rep.targets["oblique"]["zero_one"]
    by_reg = oracle["tgb_mean_risk_by_reg"]
    assert oracle["tgb_oracle_reg"] == min(by_reg, key=lambda h: (by_reg[h], float(h)))
    assert oracle["risk_target"] == by_reg[oracle["tgb_oracle_reg"]]


def test_failed_fits_record_inf_rows_and_note(monkeypatch):
    def boom(X, y, cfg):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(lltboost, "fit", boom)
    data = [make_oblique(n=60, d=3, noise=0.1, seed=0)]
    rep = run_benchmark(data, small_config(methods=("lltboost", "tgb")))
    llt_rows = [r for r in rep.complexity_rows if r["method"] == "lltboost"]
    assert len(llt_rows) == 2
    for row in llt_rows:
        assert row["median"] == INF
        assert row["n_inf"] == 10
    assert any("synthetic failure" in n for n in rep.notes)
    # the baseline sweep still produced its rows
    assert [r for r in rep.complexity_rows if r["method"] == "tgb"]


def test_regression_risks_invariant_to_target_scale():
    # targets are standardized with train statistics, so scaling y by a
    # power of two (exact in binary floating point) must leave every
    # reported risk bit-identical
    rng = np.random.default_rng(4)
    X = rng.normal(size=(80, 3))
    y = X[:, 0] - 2.0 * X[:, 1] + 0.1 * rng.normal(size=80)
    mk = lambda yy: Dataset(
        name="d", feature_names=("a", "b", "c"), X=X, y=yy, task=Task.REGRESSION
    )
    rep_a = run_benchmark([mk(y)], small_config())
    rep_b = run_benchmark([mk(1024.0 * y)], small_config())
    risks_a = [r["test_risk"] for r in rep_a.curve_rows]
    risks_b = [r["test_risk"] for r in rep_b.curve_rows]
    assert len(risks_a) == len(risks_b) > 0
    assert risks_a == risks_b


def test_serial_and_parallel_reports_identical(tmp_path):
    data = [make_oblique(n=60, d=3, noise=0.1, seed=0)]
    out = {}
    for jobs in (1, 2):
        rep = run_benchmark(data, small_config(jobs=jobs))
        d = tmp_path / f"jobs{jobs}"
        rep.write(d)
        out[jobs] = {
            p.name: p.read_bytes()
            for p in sorted(d.iterdir())
            if p.name != "timing_table.csv"
        }
    assert set(out[1]) == {
        "report.json",
        "complexity_table.csv",
        "risk_table.csv",
        "curves.csv",
    }
    for name in out[1]:
        assert out[1][name] == out[2][name], f"{name} differs"


def test_same_seed_same_report_different_seed_differs(tmp_path):
    data = [make_oblique(n=60, d=3, noise=0.1, seed=0)]
    reports = [run_benchmark(data, small_config()) for _ in range(2)]
    assert reports[0].to_json_dict() == reports[1].to_json_dict()
    other = run_benchmark(data, small_config(master_seed=99))
    assert other.to_json_dict() != reports[0].to_json_dict()


def test_report_json_serializes_inf_as_string(tmp_path, monkeypatch):
    monkeypatch.setattr(
        lltboost, "fit", lambda X, y, cfg: (_ for _ in ()).throw(RuntimeError("x"))
    )
    data = [make_oblique(n=60, d=3, noise=0.1, seed=0)]
    rep = run_benchmark(data, small_config(methods=("lltboost", "tgb")))
    rep.write(tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    llt = [r for r in doc["complexity_table"] if r["method"] == "lltboost"]
    assert llt and all(r["median"] == "inf" for r in llt)


def test_duplicate_dataset_names_rejected():
    d = make_oblique(n=30, d=3, seed=0)
    with pytest.raises(ValueError, match="unique"):
        run_benchmark([d, d], small_config())


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(repetitions=0)
    with pytest.raises(ValueError):
        ProtocolConfig(methods=("lltboost", "mystery"))
    with pytest.raises(ValueError):
        ProtocolConfig(jobs=0)


def test_config_defaults_match_protocol_constants():
    cfg = ProtocolConfig()
    assert cfg.repetitions == 10
    assert cfg.max_rules == 10
    assert cfg.max_propositions == 5
    assert cfg.max_nonzeros == 5
    assert cfg.bootstrap_cap == 500
    assert cfg.tgb_reg_grid == (0.0001, 0.001, 0.01, 0.1, 1.0, 10.0, 100.0)
    assert cfg.methods == ("lltboost", "tgb")
