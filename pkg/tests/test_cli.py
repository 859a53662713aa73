import csv
import json

import pytest

from gnepsolve.cli import MC_COLUMNS, SWEEP_COLUMNS, run


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_solve_1d(tmp_path, capsys):
    out = tmp_path / "o"
    assert run(["solve-1d", "--a2", "1", "--a3", "1", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "1 1.125 1.125" in text
    sol = json.loads((out / "solution.json").read_text())
    assert sol["x"][1] == pytest.approx(1.125, abs=1e-9)
    m = manifest(out)
    assert m["subcommand"] == "solve-1d" and m["outputs"] == ["solution.json"]


def test_solve_1d_scaled(tmp_path):
    out = tmp_path / "o"
    assert run(["solve-1d", "--a2", "1", "--a3", "3", "--out", str(out)]) == 0
    sol = json.loads((out / "solution.json").read_text())
    assert sol["x"][1] == pytest.approx(1.3125, abs=1e-9)
    assert sol["x"][2] == pytest.approx(1.3125, abs=1e-9)


def test_solve_1d_rejects_zero(tmp_path, capsys):
    assert run(["solve-1d", "--a2", "0", "--out", str(tmp_path)]) == 1
    assert "positive" in capsys.readouterr().err


def test_unknown_flag(capsys):
    assert run(["solve-1d", "--bogus"]) == 1


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "sweep" in capsys.readouterr().out


def test_sweep_straight(tmp_path):
    out = tmp_path / "o"
    assert run(["sweep", "straight", "--out", str(out)]) == 0
    rows = list(csv.reader(open(out / "sweep.csv")))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 16
    assert all(r[3] == "true" and r[4] == "false" for r in rows[1:])
    m = manifest(out)
    assert m["outputs"][0] == "sweep.csv" and len(m["outputs"]) == 16
    for rel in m["outputs"]:
        assert (out / rel).is_file() and not rel.startswith("/")


def test_sweep_custom_alphas(tmp_path):
    out = tmp_path / "o"
    assert run(["sweep", "straight", "--alphas", "0.5,1,2", "--cold", "--out", str(out)]) == 0
    assert len(list(csv.reader(open(out / "sweep.csv")))) == 4


@pytest.mark.parametrize("alphas", [",", "1:2:0", "a,b", "-1,2"])
def test_sweep_bad_alphas(tmp_path, alphas):
    assert run(["sweep", "straight", "--alphas", alphas, "--out", str(tmp_path)]) == 1


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["sweep", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert run(["sweep", str(tmp_path / "missing.json")]) == 1


def test_sweep_needs_scenario(tmp_path):
    # the L-track config has no sweep start states
    assert run(["sweep", "ltrack", "--out", str(tmp_path)]) == 1


def test_race(tmp_path):
    out = tmp_path / "o"
    assert run(["race", "ltrack", "--out", str(out)]) == 0
    outcome = json.loads((out / "outcome.json").read_text())
    assert outcome["winner"] == "ego" and outcome["steps"] == 20
    rows = list(csv.reader(open(out / "race.csv")))
    assert len(rows) == 1 + 2 * 21
    assert {len(r) for r in rows} == {len(rows[0])}


def test_mc(tmp_path, capsys):
    out = tmp_path / "o"
    assert run(["mc", "ltrack", "--n", "2", "--seed", "5", "--out", str(out)]) == 0
    assert "win" in capsys.readouterr().out
    rep = json.loads((out / "report.json").read_text())
    assert rep["n"] == 2 and rep["seed"] == 5
    assert rep["wins"] + rep["losses"] + rep["collisions"] + rep["failures"] == 2
    assert rep["config"]["racing"]["d_safe"] == 0.4
    rows = list(csv.reader(open(out / "runs.csv")))
    assert tuple(rows[0]) == MC_COLUMNS and len(rows) == 3


def test_mc_seed_from_config(tmp_path):
    out = tmp_path / "o"
    assert run(["mc", "ltrack", "--n", "1", "--out", str(out)]) == 0
    assert manifest(out)["seed"] == 7


@pytest.mark.parametrize("n", ["0", "-3"])
def test_mc_rejects_empty(tmp_path, n):
    assert run(["mc", "ltrack", "--n", n, "--out", str(tmp_path)]) == 1


def test_mc_jobs_must_be_positive(tmp_path):
    assert run(["mc", "ltrack", "--n", "1", "--jobs", "0", "--out", str(tmp_path)]) == 1
