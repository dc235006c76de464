import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from dngbrane import adm_dynamics as adm
from dngbrane.cli import main
from dngbrane.errors import ConfigError
from dngbrane.scenarios_cli import (CSV_SCHEMA, DEFAULT_TOLERANCES, SCENARIOS, ScenarioConfig,
                                    build_initial_data, csv_columns, custom_initial_data, list_scenarios,
                                    load_config, parse_config, run)

MINIMAL = 'scenario = "collapsing_circle"\n[grid]\nn = 128\n'


def test_minimal_config_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.n == (128,) and cfg.p == 1 and cfg.dim == 4 and cfg.alpha == 1.0
    assert cfg.gauge == "temporal" and cfg.background == "minkowski"
    assert cfg.params == {"R0": 1.0}
    assert cfg.n_steps == round(np.pi / 2 / cfg.dtau)
    assert cfg.tolerance("constraints") == DEFAULT_TOLERANCES["constraints"]


@pytest.mark.parametrize("text,match", [
    ('scenario = "collapsing_circle"\n[evolution]\ndtau = -0.1\n', r"evolution\.dtau: must be positive.*line 3"),
    ('scenario = "foo"\n', r"unknown scenario 'foo'; available: flat_static_brane, collapsing_circle"),
    ('scenario = "collapsing_circle"\ncolour = 3\n', r"colour: unknown key.*line 2"),
    ('scenario = "collapsing_circle"\n[grid]\nn = 64\nsize = 3\n', r"grid\.size: unknown key.*line 4"),
    ('scenario = "collapsing_circle"\n[plot]\nx = 1\n', r"unknown section \[plot\] \(line 2\)"),
    ('scenario = "collapsing_circle"\n[grid]\nn = = 3\n', r"parse error.*line 3"),
    ('scenario = "collapsing_circle"\n[grid]\nn = 2\n', r"grid\.n: need at least 3"),
    ('scenario = "collapsing_circle"\n[params]\nA = 1.0\n', r"params\.A: unknown parameter"),
    ('scenario = "collapsing_circle"\n[evolution]\nsteps = 10\ntau_end = 1.0\n', r"either steps or tau_end"),
    ('scenario = "flat_static_brane"\n[brane]\np = 3\n', r"brane\.p: scenario 'flat_static_brane' supports"),
    ('scenario = "wavy_flat_string"\n[brane]\ndim = 3\n', r"brane\.dim: .*needs dim >= 4"),
    ('scenario = "collapsing_circle"\n[background]\nname = "desitter"\n', r"unknown background 'desitter'"),
    ('scenario = "collapsing_circle"\n[checks]\nacceptance = [13]\n', r"checks\.acceptance"),
    ('scenario = "collapsing_circle"\n[evolution]\ngauge = "harmonic"\n', r"unknown gauge"),
    ('[grid]\nn = 8\n', r"scenario: required"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_config_sections_round_trip():
    cfg = parse_config("""
version = 1
scenario = "flat_static_brane"
seed = 11
[brane]
p = 2
alpha = 2.0
[grid]
n = [12, 10]
[evolution]
dtau = 0.01
steps = 5
[background]
name = "conformal"
epsilon = 0.05
axis = 3
[perturbation]
enabled = false
[checks]
acceptance = "all"
[tolerances]
constraints = 1e-7
[output]
dir = "somewhere"
""")
    assert cfg.n == (12, 10) and cfg.seed == 11 and cfg.n_steps == 5
    assert cfg.background_params == {"axis": 3, "epsilon": 0.05}
    assert cfg.acceptance == tuple(range(1, 13))
    assert cfg.tolerance("constraints", 2.0) == 2e-7
    assert json.loads(json.dumps(cfg.to_dict()))["steps_resolved"] == 5


def test_direct_construction_is_validated():
    with pytest.raises(ConfigError, match="dtau"):
        ScenarioConfig("collapsing_circle", dtau=-1.0)
    with pytest.raises(ConfigError, match="available"):
        ScenarioConfig("foo")


def test_load_config_reports_path(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('scenario = "foo"\n')
    with pytest.raises(ConfigError, match="bad.toml"):
        load_config(bad)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")


def test_unit_circle_initial_data():
    s = build_initial_data(ScenarioConfig("collapsing_circle", n=(64,)))
    u = s.grid.axis(0)
    np.testing.assert_allclose(s.X, np.stack([0 * u, np.cos(u), np.sin(u), 0 * u], -1), atol=1e-15)
    du = s.grid.spacing[0]
    np.testing.assert_allclose(s.phat, np.tile([np.sin(du) / du, 0, 0, 0], (64, 1)), atol=1e-15)


def test_builtin_initial_data_satisfy_constraints():
    flat2 = build_initial_data(ScenarioConfig("flat_static_brane", p=2, n=(12, 12)))
    F0, FA = adm.constraints(flat2)
    assert not np.any(F0) and not np.any(FA)
    rot = build_initial_data(ScenarioConfig("rotating_folded_string", n=(64,)))
    assert max(adm.constraint_norms(rot)) < 1e-10
    wavy = build_initial_data(ScenarioConfig("wavy_flat_string", n=(64,)))
    assert max(adm.constraint_norms(wavy)) < 1e-10


def test_custom_data_is_validated():
    cfg = ScenarioConfig("collapsing_circle", n=(32,))
    good = build_initial_data(cfg)
    assert custom_initial_data(cfg, good.X, good.phat).X is not None
    bad = good.phat.copy()
    bad[:, 1] += 0.1
    with pytest.raises(ConfigError, match="violates the constraints"):
        custom_initial_data(cfg, good.X, bad)


def test_list_scenarios():
    names = [n for n, _ in list_scenarios()]
    assert names == list(SCENARIOS)
    assert {"flat_static_brane", "collapsing_circle", "rotating_folded_string", "wavy_flat_string"} <= set(names)


def test_flat_static_run_all_pass(tmp_path):
    cfg = ScenarioConfig("flat_static_brane", n=(32,), dtau=1e-2, steps=100)
    res = run(cfg, tmp_path)
    assert res.passed and res.report["all_passed"]
    drifts = [c["measured"] for c in res.checks if "drift" in c["name"]]
    assert drifts and max(drifts) < 1e-12


def test_collapse_radius_column(tmp_path):
    cfg = ScenarioConfig("collapsing_circle", n=(128,), dtau=2e-3, record_every=25)
    res = run(cfg, tmp_path)
    lines = (tmp_path / "timeseries.csv").read_text().splitlines()
    assert lines[0] == f"# {CSV_SCHEMA}"
    rows = list(csv.DictReader(lines[1:]))
    assert list(rows[0]) == csv_columns(4)
    tau = np.array([float(r["tau"]) for r in rows])
    R = np.array([float(r["mean_radius"]) for r in rows])
    assert np.max(np.abs(R - np.cos(tau))) < 1e-4
    # collapse is reported as a truncation, not an error
    assert res.report["truncated"] and "collapse" in res.report["truncation_reason"]
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["all_passed"] and report["scenario"] == "collapsing_circle"
    assert np.load(tmp_path / "trajectory" / "X.npy").shape == (len(rows), 128, 4)


def test_runs_are_byte_identical(tmp_path):
    cfg = ScenarioConfig("collapsing_circle", n=(48,), dtau=5e-3, tau_end=0.2, record_every=5,
                         perturbation=True, seed=3)
    outs = []
    for name in ("a", "b"):
        run(cfg, tmp_path / name)
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / name).rglob("*")) if p.is_file()})
    assert outs[0] == outs[1]
    other = tmp_path / "c"
    run(replace(cfg, seed=4), other)
    assert (other / "timeseries.csv").read_bytes() != outs[0]["timeseries.csv"]


def test_cli_list_and_errors(tmp_path, capsys):
    assert main(["list-scenarios"]) == 0
    assert "collapsing_circle" in capsys.readouterr().out
    bad = tmp_path / "bad.toml"
    bad.write_text('scenario = "collapsing_circle"\n[evolution]\ndtau = -1\n')
    assert main(["run", str(bad)]) == 2
    assert "dtau" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "nope.toml")]) == 2
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_cli_run_exit_codes_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "flat.toml"
    cfg.write_text('scenario = "flat_static_brane"\n[grid]\nn = 16\n[evolution]\ndtau = 0.01\nsteps = 20\n')
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out), "--seed", "9"]) == 0
    assert json.loads((out / "report.json").read_text())["seed"] == 9
    assert "[PASS] mass_shell" in capsys.readouterr().out
    circ = tmp_path / "circ.toml"
    circ.write_text('scenario = "collapsing_circle"\n[grid]\nn = 32\n[evolution]\ndtau = 0.01\ntau_end = 0.3\n')
    # an absurdly tight tolerance scale must turn into a failing exit code
    assert main(["run", str(circ), "--out", str(tmp_path / "o2"), "--tol-scale", "1e-12"]) == 1
    assert main(["run", str(circ), "--tol-scale", "-1"]) == 2


def test_cli_verify(tmp_path, capsys):
    cfg = tmp_path / "v.toml"
    cfg.write_text('scenario = "collapsing_circle"\n[grid]\nn = 32\n[evolution]\ndtau = 0.01\n'
                   'tau_end = 0.2\n[checks]\nacceptance = [7]\n')
    assert main(["verify", str(cfg), "--out", str(tmp_path / "o")]) == 0
    text = capsys.readouterr().out
    assert "criterion  7 [PASS]" in text and "ALL PASSED" in text
    report = json.loads((tmp_path / "o" / "verify_report.json").read_text())
    assert [c["number"] for c in report["acceptance"]] == [7]


def test_shipped_configs_parse():
    from pathlib import Path

    configs = sorted((Path(__file__).parent.parent / "configs").glob("*.toml"))
    assert len(configs) >= 7
    for path in configs:
        load_config(path)
    assert load_config(Path(__file__).parent.parent / "configs" / "acceptance.toml").acceptance == tuple(range(1, 13))
