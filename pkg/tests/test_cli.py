import json
import subprocess
import sys

import pytest

from spaceiv.cli import main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def model_file(tmp_path, capsys):
    p = tmp_path / "model.json"
    assert run(["example", "three-node", "--out", str(p)], capsys)[0] == 0
    return p


@pytest.fixture
def data_file(tmp_path, model_file, capsys):
    p = tmp_path / "data.csv"
    assert run(["simulate", str(model_file), "--n", "2000", "--seed", "1", "--out", str(p)], capsys)[0] == 0
    return p


def test_simulate_is_reproducible(model_file, capsys):
    _, a, _ = run(["simulate", str(model_file), "--n", "50", "--seed", "4"], capsys)
    _, b, _ = run(["simulate", str(model_file), "--n", "50", "--seed", "4"], capsys)
    assert a == b
    assert a.splitlines()[0] == "I1,I2,X1,X2,X3,Y" and len(a.splitlines()) == 51


def test_fit(data_file, capsys):
    code, out, _ = run(["fit", str(data_file)], capsys)
    res = json.loads(out)
    assert code == 0 and res["support"] == [2] and res["accepted"]
    _, out, _ = run(["fit", str(data_file), "--method", "ols-sparse"], capsys)
    assert json.loads(out)["method"] == "OLS-sparse"


def test_subset(data_file, capsys):
    _, out, _ = run(["subset", str(data_file)], capsys)
    assert json.loads(out)["set"] == [2]


def test_check_rank_and_graphical(model_file, tmp_path, capsys):
    _, out, _ = run(["check", str(model_file)], capsys)
    rep = json.loads(out)
    assert rep["A1"] and rep["A3"]
    _, out, _ = run(["check", str(model_file), "--graphical", "--monte-carlo", "20"], capsys)
    rep = json.loads(out)
    assert rep["B1"] and rep["B3"] and rep["monte_carlo"]["A1_and_A3"] == 20
    g = tmp_path / "g.json"
    run(["example", "few-instruments", "--graph", "--out", str(g)], capsys)
    _, out, _ = run(["check", str(g)], capsys)
    assert json.loads(out)["B3"] is True


def test_errors_are_json(tmp_path, capsys):
    code, _, err = run(["fit", str(tmp_path / "missing.csv")], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "FileNotFoundError"
    code, _, err = run(["example", "channel"], capsys)
    assert code == 1 and "message" in json.loads(err)


def test_invalid_sample_size(model_file, capsys):
    code, _, err = run(["simulate", str(model_file), "--n", "1"], capsys)
    assert code == 1 and json.loads(err)["error"] == "InvalidSampleSize"


def test_bench(tmp_path, capsys):
    out_dir = tmp_path / "bench"
    code, out, _ = run(["bench", "--models", "2", "--sizes", "60,120", "--methods", "spaceIV,oracle-set",
                        "--out", str(out_dir)], capsys)
    res = json.loads(out)
    assert code == 0 and sum(res["groups"].values()) == 2
    assert (out_dir / "records.csv").exists() and (out_dir / "rmse_by_group_liml.csv").exists()


def test_console_module_entry_point(model_file):
    proc = subprocess.run([sys.executable, "-m", "spaceiv.cli", "check", str(model_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["pa_y"] == [2]
