import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from hcdeco.cli import CSV_COLUMNS, RunConfig, check_config, main

BOX = {
    "consts": {"hbar": 1, "alpha": 0.5, "n": 1},
    "coupling": {"kind": "sc", "k": 1},
    "environment": {"family": "box", "center": 0, "halfwidth": 1},
    "body": {"kind": "two_point", "positions": [1, -1], "weights": [0.6, "0.8j"]},
    "query": {"a": 1, "b": -1},
    "times": {"start": 0, "stop": 3, "count": 100},
    "oracle": {"points": 1024, "spacing": 0.01},
}


def run(tmp_path, cfg, *args, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "out"
    return main([args[0], "--config", str(path), "--out", str(out), *args[1:]]), out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_curve_box_traces_sinc(tmp_path):
    code, out = run(tmp_path, BOX, "curve", "--engine", "analytic")
    assert code == 0
    rows = read_csv(out / "run_analytic.csv")
    assert len(rows) == 100
    assert list(rows[0]) == list(CSV_COLUMNS)
    for r in rows:
        z = float(r["z_or_y"])
        assert float(r["modulus"]) == pytest.approx(0.48 * abs(np.sinc(z / np.pi)), abs=1e-15)
        assert float(r["modulus"]) == pytest.approx(np.hypot(float(r["re"]), float(r["im"])), abs=1e-12)
        assert r["engine"] == "analytic"


def test_curve_both_reports_discrepancy(tmp_path):
    code, out = run(tmp_path, BOX, "curve", "--engine", "both")
    assert code == 0
    assert (out / "run_oracle.csv").exists() and (out / "run_analytic.csv").exists()
    meta = json.loads((out / "run.json").read_text())
    assert meta["summary"]["max_abs_modulus_discrepancy"] < 1e-4


def test_single_time_zero_row(tmp_path):
    cfg = dict(BOX, times={"start": 0, "stop": 0, "count": 1})
    code, out = run(tmp_path, cfg, "curve")
    rows = read_csv(out / "run_analytic.csv")
    assert code == 0 and len(rows) == 1
    assert float(rows[0]["modulus"]) == pytest.approx(0.48)


def test_curve_is_byte_deterministic(tmp_path):
    _, out = run(tmp_path, BOX, "curve")
    first = (out / "run_analytic.csv").read_bytes()
    _, out = run(tmp_path, BOX, "curve")
    assert (out / "run_analytic.csv").read_bytes() == first
    assert b"\r\n" not in first


def test_config_echo_is_fixpoint(tmp_path):
    _, out = run(tmp_path, BOX, "curve")
    echo = json.loads((out / "run.json").read_text())["config"]
    again = RunConfig.from_dict(echo)
    assert again.to_dict() == echo
    assert RunConfig.from_dict(again.to_dict()).to_dict() == echo


def test_invalid_config_exit_2_no_files(tmp_path, capsys):
    cfg = dict(BOX, environment={"family": "box", "center": 0, "halfwidth": -1})
    code, out = run(tmp_path, cfg, "curve")
    assert code == 2
    assert "L > 0" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_unknown_section_exit_2(tmp_path):
    code, _ = run(tmp_path, dict(BOX, colour="red"), "curve")
    assert code == 2


def test_oracle_needs_few_particles(tmp_path, capsys):
    cfg = dict(BOX, consts={"n": 4})
    code, _ = run(tmp_path, cfg, "curve", "--engine", "oracle")
    assert code == 2
    assert "n ≤ 3" in capsys.readouterr().err


def test_coarse_grid_engine_error(tmp_path, capsys):
    cfg = dict(BOX, oracle={"points": 64, "spacing": 0.05}, times={"start": 0, "stop": 5, "count": 3})
    code, _ = run(tmp_path, cfg, "curve", "--engine", "oracle")
    assert code == 3
    assert "CourantViolation" in capsys.readouterr().err


GAUSS_TAU = {"environment": {"family": "gaussian", "mean": 0, "std": 1}, "query": {"a": 0.5, "b": -0.5}}


def test_tau_unit_and_scaling(tmp_path):
    code, out = run(tmp_path, GAUSS_TAU, "tau")
    assert code == 0
    rep = json.loads((out / "run_tau.json").read_text())["summary"]
    assert rep["tau"] == pytest.approx(1.0)
    ratios = {row["doubled"]: row["ratio"] for row in rep["scaling"]}
    for key in ("n", "strength", "separation", "delta_eta"):
        assert ratios[key] == 0.5
    assert ratios["identical_particles"] == pytest.approx(2**-0.5)


@pytest.mark.parametrize("cfg, word", [
    (dict(GAUSS_TAU, query={"a": 1, "b": 1}), "ZeroSeparation"),
    (dict(GAUSS_TAU, environment={"family": "cauchy", "scale": 1}), "NonFiniteVariance"),
    (dict(GAUSS_TAU, environment={"family": "delta", "location": 0}), "ZeroWidth"),
])
def test_tau_errors_exit_2(tmp_path, capsys, cfg, word):
    code, _ = run(tmp_path, cfg, "tau")
    assert code == 2
    assert word in capsys.readouterr().err


def test_decayfit_cauchy(tmp_path):
    cfg = {"environment": {"family": "cauchy", "scale": 0.7}, "query": {"a": 0.5, "b": -0.5},
           "times": {"start": 0, "stop": 30, "count": 3001}, "window": {"zmin": 1, "zmax": 20}}
    code, out = run(tmp_path, cfg, "decayfit")
    assert code == 0
    rep = json.loads((out / "run_decayfit.json").read_text())["summary"]
    assert rep["model"] == "exponential"
    assert rep["order"] == pytest.approx(0.7, rel=1e-6)


def test_decayfit_insufficient_exit_3(tmp_path):
    cfg = {"times": {"start": 0, "stop": 1, "count": 11}, "window": {"zmin": 50, "zmax": 60}}
    code, _ = run(tmp_path, cfg, "decayfit")
    assert code == 3


COMPARE = {
    "consts": {"alpha": 0.5, "n": 1},
    "environment": {"family": "gaussian", "std": 0.7},
    "times": {"values": [0.5, 1.0]},
    "oracle": {"points": 1024, "spacing": 0.02},
    "draws": {"count": 10, "a": [-1, 1], "b": [-1, 1], "t": [-1.5, 1.5]},
    "tolerances": {"modulus": 1e-5, "phase": 1e-6},
}


def test_compare_gaussian_passes(tmp_path):
    code, out = run(tmp_path, COMPARE, "compare", "--seed", "3")
    rep = json.loads((out / "run_compare.json").read_text())["summary"]
    assert code == 0 and rep["pass"] and rep["queries"] == 12


def test_compare_box_pair_passes_at_1e4(tmp_path):
    cfg = dict(COMPARE, consts={"alpha": 0.25, "n": 2}, environment={"family": "box", "halfwidth": 1},
               oracle={"points": 1024, "spacing": 1 / 256}, tolerances={"modulus": 1e-4, "phase": 1e-6},
               draws={"count": 4, "a": [-1, 1], "b": [-1, 1], "t": [-1, 1]})
    code, out = run(tmp_path, cfg, "compare")
    assert code == 0


def test_compare_tolerance_failure_writes_report(tmp_path):
    cfg = dict(COMPARE, tolerances={"modulus": 1e-30, "phase": 1e-30})
    code, out = run(tmp_path, cfg, "compare")
    assert code == 1
    assert json.loads((out / "run_compare.json").read_text())["summary"]["pass"] is False


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "configs").glob("*.yaml")),
                         ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    cfg = RunConfig.load(path)
    assert check_config(cfg, cfg.data["engine"]) == []
