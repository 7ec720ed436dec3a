import io
import json
import subprocess
import sys

import numpy as np
import pytest

from coalition_attrib.cli import main
from coalition_attrib.data import read_csv


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_game_solve(abc_path):
    code, text = run("game", "solve", str(abc_path))
    assert code == 0
    lines = text.splitlines()
    assert lines[:3] == ["A  166.667", "B  266.667", "C  366.667"]
    assert lines[3].startswith("efficiency: sum 800 = v(all) 800 - v(empty) 0 [ok]")


def test_game_solve_permutations(abc_path):
    assert run("game", "solve", str(abc_path), "--method", "permutations")[1] == \
        run("game", "solve", str(abc_path))[1]


def test_single_player_and_dummy(tmp_path):
    single = tmp_path / "one.json"
    single.write_text('{"players": ["Solo"], "worth": {"": 0, "Solo": 42}}')
    assert run("game", "solve", str(single))[1].startswith("Solo  42\n")
    dummy = tmp_path / "dummy.json"
    dummy.write_text(json.dumps({"players": ["A", "D"],
                                 "worth": {"": 0, "A": 7, "D": 0, "A,D": 7}}))
    assert "D  0\n" in run("game", "solve", str(dummy))[1]


def test_game_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"players": ["A"],\n "worth": {"": 0,}}')
    assert run("game", "solve", str(bad))[0] == 2
    assert "bad.json:2:" in capsys.readouterr().err
    partial = tmp_path / "partial.json"
    partial.write_text('{"players": ["A", "B"], "worth": {"": 0, "A": 1}}')
    assert run("game", "solve", str(partial))[0] == 2
    assert "missing worth for coalitions ['B', 'A,B']" in capsys.readouterr().err
    assert run("game", "solve", str(tmp_path / "nope.json"))[0] == 4


def test_experiment_run_outputs(tmp_path):
    out = tmp_path / "r.json"
    dump = tmp_path / "d.csv"
    code, _ = run("experiment", "run", "--name", "twofactor", "--n", "80", "--trees", "5",
                  "--out", str(out), "--dump-csv", str(dump))
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["feature_names"] == ["Factor1", "Factor2"]
    assert read_csv(dump, "Return").n_samples == 80

    code, text = run("experiment", "run", "--name", "twofactor", "--n", "80", "--trees", "5")
    assert text.startswith("Linear Regression Coefficients:\nFactor1: ")
    code, text = run("experiment", "run", "--name", "twofactor", "--n", "80", "--trees", "5",
                     "--format", "markdown")
    assert text.startswith("| feature |")
    code, text = run("experiment", "run", "--name", "twofactor", "--n", "80", "--trees", "5",
                     "--format", "json")
    streamed = json.loads(text)
    assert streamed["mean_abs_shap"] == doc["mean_abs_shap"]
    assert streamed["metadata"]["config"]["output"] == {"format": "json", "path": None}


def test_experiment_validation_exit_code():
    assert run("experiment", "run", "--name", "linear3", "--n", "5")[0] == 2
    with pytest.raises(SystemExit) as info:
        run("experiment", "run", "--name", "cubic")
    assert info.value.code == 2


def test_explain(tmp_path):
    csv_path = tmp_path / "d.csv"
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 2))
    y = 2 * X[:, 0] - X[:, 1] + 0.01 * rng.normal(size=40)
    rows = (f"{float(a)!r},{float(b)!r},{float(t)!r}\n" for (a, b), t in zip(X, y))
    csv_path.write_text("a,b,y\n" + "".join(rows))
    out = tmp_path / "attr.json"
    code, text = run("explain", "--data", str(csv_path), "--target", "y", "--model", "ols",
                     "--out", str(out))
    assert code == 0
    assert "Mean Absolute SHAP Values:\na: " in text
    doc = json.loads(out.read_text())
    assert doc["feature_names"] == ["a", "b"]
    assert len(doc["per_instance"]) == 40
    per = np.array(doc["per_instance"])
    np.testing.assert_allclose(np.abs(per).mean(axis=0), doc["mean_abs"])

    out_csv = tmp_path / "attr.csv"
    code, _ = run("explain", "--data", str(csv_path), "--target", "y", "--model", "forest",
                  "--trees", "5", "--out", str(out_csv), "--format", "csv")
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "instance,a,b" and len(lines) == 41


def test_explain_rank_deficiency_exit_code(tmp_path):
    csv_path = tmp_path / "d.csv"
    csv_path.write_text("a,b,y\n" + "".join(f"{i},{2 * i},{i % 3}\n" for i in range(10)))
    assert run("explain", "--data", str(csv_path), "--target", "y", "--model", "ols")[0] == 3


def test_module_entry_point(abc_path):
    proc = subprocess.run([sys.executable, "-m", "coalition_attrib", "game", "solve",
                           str(abc_path)], capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("A  166.667")
