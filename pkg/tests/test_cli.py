import json

import numpy as np
import pytest

from obliquerules.cli import main, print_rules
from obliquerules.core import Rule, RuleEnsemble, SparseProposition, Standardizer, Task
from obliquerules.datasets import load_csv, make_oblique, write_csv
from obliquerules.serialize import ModelFile, load_model, save_model


@pytest.fixture()
def clf_csv(tmp_path):
    data = make_oblique(n=60, d=3, noise=0.1, seed=0)
    path = tmp_path / "train.csv"
    write_csv(data, path, target_column="y")
    return path


def empty_model(intercept, d=2):
    ens = RuleEnsemble(
        intercept=intercept,
        rules=(),
        task=Task.CLASSIFICATION,
        standardizer=Standardizer.identity(d),
    )
    return ModelFile(ensemble=ens, feature_names=tuple(f"x{i+1}" for i in range(d)))


# ---------------------------------------------------------------------------
# rule rendering
# ---------------------------------------------------------------------------


def test_print_rules_empty_model():
    text = print_rules(empty_model(0.25))
    assert text.splitlines() == ["score = +0.25", "complexity: C(f) = 0"]


def test_print_rules_weighted_condition_format():
    ens = RuleEnsemble(
        intercept=0.0,
        rules=(
            Rule(
                propositions=(
                    SparseProposition(
                        indices=(0, 3), weights=(0.3, -0.2), threshold=1.2
                    ),
                ),
                weight=1.5,
            ),
        ),
        task=Task.CLASSIFICATION,
        standardizer=Standardizer.identity(4),
    )
    model = ModelFile(ensemble=ens, feature_names=("x1", "x2", "x3", "x4"))
    lines = print_rules(model, precision=2).splitlines()
    assert lines[0] == "score = +0.00"
    assert lines[1] == "+1.50 if 0.30·x1 − 0.20·x4 ≥ 1.20"
    assert lines[2] == "complexity: C(f) = 4"


def test_print_rules_joins_conjunctions_and_negative_lead():
    ens = RuleEnsemble(
        intercept=-1.0,
        rules=(
            Rule(
                propositions=(
                    SparseProposition(indices=(0,), weights=(-1.0,), threshold=-2.0),
                    SparseProposition(indices=(1,), weights=(2.0,), threshold=0.5),
                ),
                weight=-0.75,
            ),
        ),
        task=Task.REGRESSION,
        standardizer=Standardizer.identity(2),
    )
    model = ModelFile(ensemble=ens, feature_names=("a", "b"))
    line = print_rules(model).splitlines()[1]
    assert line == (
        "-0.75 if −1.00·a ≥ -2.00 & 2.00·b ≥ 0.50"
    )


def test_printed_complexity_matches_ensemble_complexity():
    rng = np.random.default_rng(0)
    for _ in range(50):
        d = int(rng.integers(2, 6))
        rules = []
        for _ in range(int(rng.integers(0, 4))):
            props = []
            for _ in range(int(rng.integers(1, 3))):
                k = int(rng.integers(1, d + 1))
                idx = np.sort(rng.choice(d, size=k, replace=False))
                w = np.where(rng.normal(size=k) == 0, 1.0, rng.normal(size=k))
                props.append(
                    SparseProposition(indices=idx, weights=w, threshold=0.0)
                )
            rules.append(Rule(propositions=tuple(props), weight=1.0))
        ens = RuleEnsemble(
            intercept=0.0,
            rules=tuple(rules),
            task=Task.CLASSIFICATION,
            standardizer=Standardizer.identity(d),
        )
        model = ModelFile(
            ensemble=ens, feature_names=tuple(f"f{i}" for i in range(d))
        )
        last = print_rules(model).splitlines()[-1]
        assert last == f"complexity: C(f) = {ens.complexity()}"


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def test_train_writes_model_and_stage_table(tmp_path, clf_csv, capsys):
    out = tmp_path / "model.json"
    code = main(
        [
            "train", "--data", str(clf_csv), "--target", "y",
            "--task", "clf", "--method", "tgb", "--rules", "2",
            "--seed", "7", "--out", str(out),
        ]
    )
    assert code == 0
    captured = capsys.readouterr()
    lines = captured.out.strip().splitlines()
    assert lines[0] == "stage,complexity,train_risk"
    assert len(lines) == 4  # header + stages 0..2
    assert out.exists()
    model = load_model(out)
    assert model.metadata["method"] == "tgb"
    assert model.metadata["seed"] == 7


def test_train_config_file_with_flag_override(tmp_path, clf_csv):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"rules": 1, "seed": 3}), encoding="utf-8")
    out = tmp_path / "m.json"
    code = main(
        [
            "train", "--data", str(clf_csv), "--target", "y", "--task",
            "classification", "--method", "tgb", "--config", str(cfg),
            "--rules", "2", "--out", str(out),
        ]
    )
    assert code == 0
    model = load_model(out)
    assert model.metadata["config"]["max_rules"] == 2  # flag wins
    assert model.metadata["seed"] == 3  # file value kept


def test_train_usage_errors(tmp_path, clf_csv):
    out = str(tmp_path / "m.json")
    # unknown flag -> argparse usage error
    assert main(["train", "--bogus", "1"]) == 2
    # unknown task
    assert main(
        ["train", "--data", str(clf_csv), "--target", "y", "--task", "nope",
         "--method", "tgb", "--out", out]
    ) == 2
    # malformed config file
    bad = tmp_path / "bad.json"
    bad.write_text("{oops", encoding="utf-8")
    assert main(
        ["train", "--data", str(clf_csv), "--target", "y", "--task", "clf",
         "--method", "tgb", "--config", str(bad), "--out", out]
    ) == 2
    # unknown config key
    bad2 = tmp_path / "bad2.json"
    bad2.write_text(json.dumps({"mystery": 1}), encoding="utf-8")
    assert main(
        ["train", "--data", str(clf_csv), "--target", "y", "--task", "clf",
         "--method", "tgb", "--config", str(bad2), "--out", out]
    ) == 2
    # invalid hyperparameter value
    assert main(
        ["train", "--data", str(clf_csv), "--target", "y", "--task", "clf",
         "--method", "tgb", "--rules", "0", "--out", out]
    ) == 2


def test_train_data_error_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\n1,x1\n2,x2\n3,x3\n", encoding="utf-8")
    code = main(
        ["train", "--data", str(bad), "--target", "y", "--task", "clf",
         "--method", "tgb", "--out", str(tmp_path / "m.json")]
    )
    assert code == 3  # three distinct labels


def test_train_fit_failure_exit_code(tmp_path):
    # logistic loss on a continuous regression target cannot be fitted
    rows = ["a,y"] + [f"{i},{i * 0.37}" for i in range(12)]
    data = tmp_path / "reg.csv"
    data.write_text("\n".join(rows) + "\n", encoding="utf-8")
    code = main(
        ["train", "--data", str(data), "--target", "y", "--task", "reg",
         "--method", "tgb", "--loss", "logistic", "--out", str(tmp_path / "m.json")]
    )
    assert code == 4


# ---------------------------------------------------------------------------
# predict / print commands
# ---------------------------------------------------------------------------


def trained_model(tmp_path, clf_csv, method="tgb"):
    out = tmp_path / f"{method}.json"
    code = main(
        ["train", "--data", str(clf_csv), "--target", "y", "--task", "clf",
         "--method", method, "--rules", "2", "--out", str(out)]
    )
    assert code == 0
    return out


def test_predict_reproduces_final_train_risk(tmp_path, clf_csv, capsys):
    model_path = trained_model(tmp_path, clf_csv)
    capsys.readouterr()
    code = main(
        ["predict", "--model", str(model_path), "--data", str(clf_csv),
         "--target", "y"]
    )
    assert code == 0
    out_lines = capsys.readouterr().out.strip().splitlines()
    risk_line = out_lines[-1]
    assert risk_line.startswith("risk = ")
    risk = float(risk_line.removeprefix("risk = "))
    stored = load_model(model_path).metadata["final_train_risk"]
    assert abs(risk - stored) <= 1e-12


def test_predict_without_target_writes_scores(tmp_path, clf_csv, capsys):
    model_path = trained_model(tmp_path, clf_csv)
    capsys.readouterr()
    out_file = tmp_path / "scores.txt"
    code = main(
        ["predict", "--model", str(model_path), "--data", str(clf_csv),
         "--out", str(out_file)]
    )
    assert code == 0
    scores = [float(v) for v in out_file.read_text().split()]
    model = load_model(model_path)
    data = load_csv(clf_csv, "y", Task.CLASSIFICATION)
    expect = model.ensemble.decision_function(data.X)
    assert np.array_equal(np.asarray(scores), expect)


def test_predict_missing_feature_column(tmp_path, clf_csv):
    model_path = trained_model(tmp_path, clf_csv)
    other = tmp_path / "narrow.csv"
    other.write_text("x1,x2\n0.1,0.2\n", encoding="utf-8")
    code = main(["predict", "--model", str(model_path), "--data", str(other)])
    assert code == 3


def test_predict_rejects_bad_model_file(tmp_path, clf_csv):
    bad = tmp_path / "model.json"
    bad.write_text("{}", encoding="utf-8")
    assert main(["predict", "--model", str(bad), "--data", str(clf_csv)]) == 3


def test_print_command(tmp_path, capsys):
    path = tmp_path / "m.json"
    save_model(empty_model(0.25), path)
    code = main(["print", "--model", str(path)])
    assert code == 0
    out = capsys.readouterr().out
    assert out == "score = +0.25\ncomplexity: C(f) = 0\n"


# ---------------------------------------------------------------------------
# benchmark / make-synthetic commands
# ---------------------------------------------------------------------------


def test_make_synthetic_round_trips_and_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["make-synthetic", "--generator", "staircase", "--n", "40",
            "--d", "3", "--noise", "0.1", "--seed", "5"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    back = load_csv(a, "target", Task.CLASSIFICATION)
    assert back.n_rows == 40 and back.n_features == 3


def test_benchmark_command_writes_report(tmp_path, capsys):
    data_csv = tmp_path / "d.csv"
    assert main(
        ["make-synthetic", "--generator", "oblique", "--n", "50", "--d", "3",
         "--noise", "0.1", "--seed", "0", "--out", str(data_csv)]
    ) == 0
    cfg = {
        "datasets": [
            {"synthetic": "oblique", "n": 50, "d": 3, "noise": 0.1, "seed": 1},
            {"path": str(data_csv), "target": "target", "task": "clf",
             "name": "fromfile"},
        ],
        "repetitions": 10,
        "max_rules": 2,
        "bootstrap_cap": 40,
        "tgb_reg_grid": [0.1, 10.0],
        "methods": ["tgb"],
    }
    cfg_path = tmp_path / "protocol.json"
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    out_dir = tmp_path / "report"
    assert main(["benchmark", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
    found = {p.name for p in out_dir.iterdir()}
    assert found == {
        "report.json",
        "complexity_table.csv",
        "risk_table.csv",
        "curves.csv",
        "timing_table.csv",
    }
    doc = json.loads((out_dir / "report.json").read_text())
    assert {d["name"] for d in doc["datasets"]} == {"oblique", "fromfile"}


def test_benchmark_config_errors(tmp_path):
    no_data = tmp_path / "c1.json"
    no_data.write_text(json.dumps({"repetitions": 10}), encoding="utf-8")
    assert main(["benchmark", "--config", str(no_data), "--out", str(tmp_path / "o")]) == 2

    bad_key = tmp_path / "c2.json"
    bad_key.write_text(
        json.dumps({"datasets": [{"synthetic": "oblique"}], "zzz": 1}),
        encoding="utf-8",
    )
    assert main(["benchmark", "--config", str(bad_key), "--out", str(tmp_path / "o")]) == 2

    bad_gen = tmp_path / "c3.json"
    bad_gen.write_text(
        json.dumps({"datasets": [{"synthetic": "cubes"}]}), encoding="utf-8"
    )
    assert main(["benchmark", "--config", str(bad_gen), "--out", str(tmp_path / "o")]) == 2


def test_version_flag_exits_zero(capsys):
    assert main(["--version"]) == 0
