import json
import os

import numpy as np
import pytest

from kerrlab import cli
from kerrlab.runner import (ConfigError, canonical, load_dir, make_rng, parse_config, resolve,
                            run, serialize_config, sweep)

SYMBOLS = {"kind": "symbols", "params": {"M": 1.0, "a": 0.1}, "seed": 7,
           "symbols": {"n_samples": 60, "n_sos": 20, "n_mt1": 20}}
GEODESIC = {"kind": "geodesic", "params": {"M": 1.0, "a": 0.0}, "seed": 0,
            "geodesic": {"lam_max": 100.0, "lyapunov_lam_max": 60.0}}
SOLVE = {"kind": "solve", "params": {"M": 1.0, "a": 0.0},
         "solve": {"T": 60.0, "dr": 0.2, "le_times": [30.0, 60.0]}}


def _gronwall(eps):
    return {"kind": "gronwall", "params": {"M": 1.0, "a": 0.0},
            "gronwall": {"epsilon": eps, "T": 40.0, "dr": 0.2}}


# ---- schema -----------------------------------------------------------------

@pytest.mark.parametrize("bad", [
    {"kind": "solve", "bogus": 1},
    {"kind": "solve", "solve": {"T": 10.0, "dt": 0.1}},
    {"kind": "nope"},
    {"kind": "solve", "params": {"M": 1.0, "a": 1.0}},
    {"kind": "solve", "gronwall": {}},
    {"params": {"M": 1.0}},
])
def test_schema_rejects(bad):
    with pytest.raises(ConfigError):
        parse_config(json.dumps(bad))


def test_invalid_json_rejected():
    with pytest.raises(ConfigError):
        parse_config("{kind: solve")


def test_schema_round_trip():
    text = '{"solve": {"dr": 0.2, "T": 60.0},\n "kind": "solve", "seed": 3}'
    assert serialize_config(parse_config(text)) == canonical(json.loads(text))
    again = serialize_config(parse_config(serialize_config(parse_config(text))))
    assert again == serialize_config(parse_config(text))


def test_resolve_fills_defaults():
    cfg = resolve({"kind": "gronwall", "gronwall": {"weights": {"tt": 1.0}}})
    assert cfg["gronwall"]["weights"] == {"tt": 1.0, "tr": -1.0, "rr": -1.0}
    assert cfg["gronwall"]["epsilon"] == 0.01 and cfg["params"] == {"M": 1.0, "a": 0.0}


def test_rng_is_philox_and_deterministic():
    a, b = make_rng(7), make_rng(7)
    assert isinstance(a.bit_generator, np.random.Philox)
    np.testing.assert_array_equal(a.standard_normal(5), b.standard_normal(5))


# ---- single runs ------------------------------------------------------------

def test_symbols_report_byte_identical(tmp_path):
    run(SYMBOLS, out_dir=tmp_path / "a")
    run(SYMBOLS, out_dir=tmp_path / "b")
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    rep = json.loads(a)
    assert rep["pass"] and rep["seed"] == 7
    assert {"config_echo", "checks", "versions", "worst"} <= rep.keys()
    assert all({"name", "value", "tolerance", "pass"} <= c.keys() for c in rep["checks"])


def test_seed_override_changes_samples(tmp_path):
    a = run(SYMBOLS, out_dir=tmp_path / "a")
    b = run(SYMBOLS, out_dir=tmp_path / "b", seed=8)
    assert b["seed"] == 8 and a["summary"] != b["summary"]


def test_geodesic_report(tmp_path):
    rep = run(GEODESIC, out_dir=tmp_path)
    assert rep["pass"]
    dev = {c["name"]: c for c in rep["checks"]}["max_abs_r_minus_r_a"]
    assert dev["value"] < 1e-6
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header.startswith("lambda,")


def test_solve_artifacts_parse(tmp_path):
    rep = run(SOLVE, out_dir=tmp_path)
    assert rep["pass"], rep["checks"]
    for name, cols in [("energy.csv", 3), ("point.csv", 2), ("norms.csv", 3)]:
        data = np.loadtxt(tmp_path / name, delimiter=",", skiprows=1, ndmin=2)
        assert data.shape[1] == cols and np.all(np.isfinite(data))
    assert sorted(rep["artifacts"]) == ["energy.csv", "norms.csv", "point.csv"]


def test_module_error_is_reported(tmp_path):
    cfg = {"kind": "geodesic", "params": {"M": 1.0, "a": 0.0},
           "geodesic": {"theta0": 0.05, "Phi_over_tau": 3.0, "lam_max": 1.0}}
    rep = run(cfg, out_dir=tmp_path)
    assert not rep["pass"]
    assert rep["checks"][-1]["name"] == "error" and "error" in rep["summary"]
    assert rep["config_echo"]["geodesic"]["theta0"] == 0.05


# ---- sweeps -----------------------------------------------------------------

def test_empty_sweep(tmp_path):
    rep = sweep([], out_dir=tmp_path)
    assert rep["pass"] and rep["rows"] == []


def test_sweep_requires_homogeneous_kind(tmp_path):
    with pytest.raises(ConfigError):
        sweep([SOLVE, GEODESIC], out_dir=tmp_path)


def test_duplicate_configs_identical_rows(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_THREADS", "2")
    rep = sweep([SYMBOLS, SYMBOLS], out_dir=tmp_path)
    a, b = ({k: v for k, v in row.items() if k != "name"} for row in rep["rows"])
    assert a == b


def test_gronwall_sweep_monotone(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_THREADS", "1")
    rep = sweep([_gronwall(e) for e in (0.01, 0.0, 0.005)], out_dir=tmp_path)
    assert rep["pass"]
    gam = sorted((r["summary"]["epsilon"], r["summary"]["growth_exponent"]) for r in rep["rows"])
    assert [g for _, g in gam] == sorted(g for _, g in gam)
    assert (tmp_path / "sweep_report.json").exists()


def test_sweep_order_independent(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_THREADS", "1")
    cfgs = [_gronwall(0.0), _gronwall(0.01)]
    a = sweep(cfgs, out_dir=tmp_path / "a", names=["x", "y"])
    b = sweep(cfgs[::-1], out_dir=tmp_path / "b", names=["y", "x"])
    assert a["rows"] == b["rows"]


def test_bad_thread_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_THREADS", "many")
    with pytest.raises(ConfigError):
        sweep([SYMBOLS], out_dir=tmp_path)


# ---- CLI --------------------------------------------------------------------

def _write(path, cfg):
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def test_cli_run_exit_codes(tmp_path, capsys):
    good = _write(tmp_path / "good.json", SYMBOLS)
    assert cli.main(["run", good, "--out", str(tmp_path / "o")]) == 0
    assert "overall: PASS" in capsys.readouterr().out
    bad = _write(tmp_path / "bad.json", {"kind": "solve", "oops": 1})
    assert cli.main(["run", bad]) == 2
    failing = {"kind": "multiplier", "params": {"M": 1.0, "a": 0.0},
               "multiplier": {"delta1": 10.0, "n_grid": 50}}
    path = _write(tmp_path / "fail.json", failing)
    assert cli.main(["run", path, "--out", str(tmp_path / "f")]) == 1
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2


def test_cli_sweep_and_tailfit(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LAB_THREADS", "1")
    d = tmp_path / "cfgs"
    d.mkdir()
    _write(d / "b.json", SYMBOLS)
    _write(d / "a.json", dict(SYMBOLS, seed=8))
    configs, names = load_dir(d)
    assert names == ["a", "b"] and configs[0]["seed"] == 8
    assert cli.main(["sweep", str(d), "--out", str(tmp_path / "s")]) == 0
    t = np.linspace(100, 700, 601)
    pts = tmp_path / "point.csv"
    pts.write_text("t,u_obs\n" + "".join(f"{a!r},{a ** -3.0!r}\n" for a in t.tolist()))
    capsys.readouterr()
    assert cli.main(["tailfit", str(pts), "--window", "200", "600"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["slope"] == pytest.approx(-3.0, abs=1e-9)
    assert cli.main(["tailfit", str(pts), "--window", "200", "600", "--expect", "-2"]) == 1
    assert cli.main(["tailfit", str(pts), "--window", "800", "900"]) == 2


def test_cli_entry_point_installed():
    import shutil
    assert shutil.which("lab") is not None or os.environ.get("CI_NO_SCRIPTS")
