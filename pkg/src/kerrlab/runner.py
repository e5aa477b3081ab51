"""Experiment configuration, orchestration and machine-readable reports.

A run is described by a JSON document::

    {"kind": "solve", "params": {"M": 1.0, "a": 0.0}, "seed": 0,
     "output_dir": "out", "solve": {"T": 600.0, "dr": 0.1}}

The top level and every sub-record are validated against a JSON schema
before any computation; unknown keys are rejected. Each kind has a
sub-record of the same name whose omitted fields take the defaults in
``DEFAULTS``. Random samples come from a Philox counter-based generator
keyed by ``seed``, so sample sets are reproducible across platforms that
implement Philox4x64-10.

The report is written as ``report.json`` with sorted keys and no
timestamps, so a fixed (config, seed) gives byte-identical output.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .geometry import KerrParams, global_perturbation, photon_sphere_perturbation, tortoise

KINDS = ("geodesic", "symbols", "multiplier", "solve", "tailfit", "gronwall")


class ConfigError(ValueError):
    """Configuration rejected by the schema."""


# ======================================================================
# Schema and defaults
# ======================================================================

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 0}
_NPOS = {"type": "integer", "minimum": 1}
_BOOL = {"type": "boolean"}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}


def _record(props: dict) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False}


_MULT_PROPS = {"delta": _POS, "delta1": _POS, "R1": _POS, "bigC": _NUM}

SUBSCHEMAS = {
    "geodesic": _record({
        "tau": _NUM, "Phi_over_tau": _NUM, "theta0": _NUM, "lam_max": _POS,
        "tol": _POS, "offset": _POS, "lyapunov_lam_max": _POS}),
    "symbols": _record({
        "n_samples": _NPOS, "half_width": _POS, "scheme": {"enum": ["analytic", "central_fd"]},
        "n_sos": _INT, "n_mt1": _INT}),
    "multiplier": _record(dict(_MULT_PROPS, r_min=_POS, r_max=_POS, n_grid=_NPOS)),
    "solve": _record({
        "l": _INT, "T": _POS, "dr": _POS, "cfl": _POS, "r_obs": _POS,
        "data_center": _NUM, "data_halfwidth": _POS, "ingoing": _BOOL,
        "record_every": _NPOS, "le_times": {"type": "array", "items": _POS},
        "morawetz": {"anyOf": [{"type": "null"}, _record({
            "T": _POS, "dr": _POS, "slab": _PAIR, "r_range": _PAIR})]}}),
    "tailfit": _record({
        "l": _INT, "T": _POS, "dr": _POS, "r_obs": _POS, "data_center": _NUM,
        "data_halfwidth": _POS, "ingoing": _BOOL, "window": _PAIR,
        "expected_slope": _NUM, "slope_tol": _POS}),
    "gronwall": _record({
        "epsilon": {"type": "number", "minimum": 0}, "power": _POS,
        "perturbation": {"enum": ["global", "photon_sphere"]},
        "weights": _record({"tt": _NUM, "tr": _NUM, "rr": _NUM}),
        "l": _INT, "T": _POS, "dr": _POS, "r_obs": _POS,
        "ratio_bound": _POS, "exponent_bound": _POS}),
}

SCHEMA = {
    "type": "object",
    "properties": dict(
        kind={"enum": list(KINDS)},
        params=_record({"M": _POS, "a": {"type": "number", "minimum": 0}}),
        seed=_INT,
        output_dir={"type": "string"},
        **SUBSCHEMAS),
    "required": ["kind"],
    "additionalProperties": False,
}

DEFAULTS = {
    "geodesic": {"tau": 1.0 / 6.0, "Phi_over_tau": 0.0, "theta0": math.pi / 2,
                 "lam_max": 100.0, "tol": 3e-15, "offset": 1e-6, "lyapunov_lam_max": 150.0},
    "symbols": {"n_samples": 1000, "half_width": 0.25, "scheme": "analytic",
                "n_sos": 200, "n_mt1": 200},
    "multiplier": {"delta": 0.05, "delta1": 0.01, "R1": 20.0, "bigC": 10.0,
                   "r_min": 2.2, "r_max": 100.0, "n_grid": 400},
    "solve": {"l": 0, "T": 600.0, "dr": 0.1, "cfl": 0.5, "r_obs": 10.0,
              "data_center": 10.0, "data_halfwidth": 5.0, "ingoing": True,
              "record_every": 4, "le_times": [150.0, 300.0, 450.0, 600.0],
              "morawetz": None},
    "tailfit": {"l": 0, "T": 600.0, "dr": 0.05, "r_obs": 10.0, "data_center": 10.0,
                "data_halfwidth": 5.0, "ingoing": True, "window": [200.0, 600.0],
                "expected_slope": -3.0, "slope_tol": 0.3},
    "gronwall": {"epsilon": 0.01, "power": 0.5, "perturbation": "global",
                 "weights": {"tt": -1.0, "tr": -1.0, "rr": -1.0},
                 "l": 0, "T": 600.0, "dr": 0.1, "r_obs": 10.0,
                 "ratio_bound": 1.5, "exponent_bound": 0.1},
}

MORAWETZ_DEFAULTS = {"T": 40.0, "dr": 0.1, "slab": [5.0, 35.0], "r_range": [2.3, 30.0]}


def validate(config: dict) -> None:
    """Validate a config against the schema.

    Raises
    ------
    ConfigError
        With the offending path and value echoed.
    """
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    kind = config["kind"]
    extra = [k for k in SUBSCHEMAS if k in config and k != kind]
    if extra:
        raise ConfigError(f"sub-record(s) {extra} do not match kind '{kind}'")
    params = config.get("params", {})
    if params.get("a", 0.0) >= params.get("M", 1.0):
        raise ConfigError("params: require a < M")


def parse_config(text: str) -> dict:
    """Parse and validate a JSON config; the document is returned as is."""
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    validate(config)
    return config


def canonical(obj) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def serialize_config(config: dict) -> str:
    return canonical(config)


def resolve(config: dict) -> dict:
    """Config with every default filled in."""
    validate(config)
    kind = config["kind"]
    out = {
        "kind": kind,
        "params": {"M": 1.0, "a": 0.0, **config.get("params", {})},
        "seed": int(config.get("seed", 0)),
        "output_dir": config.get("output_dir", "lab_out"),
    }
    sub = copy.deepcopy(DEFAULTS[kind])
    sub.update(copy.deepcopy(config.get(kind, {})))
    if kind == "solve" and sub.get("morawetz") is not None:
        sub["morawetz"] = {**MORAWETZ_DEFAULTS, **sub["morawetz"]}
    if kind == "gronwall":
        sub["weights"] = {**DEFAULTS["gronwall"]["weights"], **sub["weights"]}
    out[kind] = sub
    return out


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by the seed."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical(config).encode()).hexdigest()[:16]


# ======================================================================
# Report
# ======================================================================

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


class _Checks:
    """Accumulates named checks; ``upper`` checks pass when value <= tol."""

    def __init__(self):
        self.rows = []

    def upper(self, name, value, tol):
        self.rows.append({"name": name, "value": float(value), "tolerance": float(tol),
                          "sense": "<=", "pass": bool(value <= tol)})

    def lower(self, name, value, tol):
        self.rows.append({"name": name, "value": float(value), "tolerance": float(tol),
                          "sense": ">", "pass": bool(value > tol)})

    def band(self, name, value, target, tol):
        dev = abs(value - target)
        self.rows.append({"name": name, "value": float(value), "target": float(target),
                          "tolerance": float(tol), "sense": "|value-target|<=",
                          "pass": bool(dev <= tol)})


def versions() -> dict:
    return {"kerrlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _report(cfg, checks: _Checks, summary: dict, worst, artifacts) -> dict:
    return _jsonable({
        "config_echo": cfg,
        "config_hash": config_hash(cfg),
        "kind": cfg["kind"],
        "seed": cfg["seed"],
        "versions": versions(),
        "checks": checks.rows,
        "summary": summary,
        "worst": worst,
        "artifacts": sorted(artifacts),
        "pass": all(c["pass"] for c in checks.rows),
    })


# ======================================================================
# Workflows
# ======================================================================

def _params(cfg) -> KerrParams:
    return KerrParams(float(cfg["params"]["M"]), float(cfg["params"]["a"]))


def _run_geodesic(cfg, out: Path, rng):
    from .geodesic import integrate, lyapunov_fit, trapped_init, trapped_radius
    P = _params(cfg)
    g = cfg["geodesic"]
    tau, phi = g["tau"], g["Phi_over_tau"] * g["tau"]
    p0 = trapped_init(P, tau, phi, g["theta0"])
    ra, _ = trapped_radius(P, tau, phi)
    traj = integrate(P, p0, g["lam_max"], tol=g["tol"])
    traj.to_csv(out / "trajectory.csv", P)
    dev = float(np.max(np.abs(traj.r - ra)))
    chk = _Checks()
    chk.upper("max_abs_r_minus_r_a", dev, 1e-6)
    chk.upper("pK_drift_rel", traj.drift["pK_rel"], 1e-9)
    chk.upper("r_a_offset_minus_2a", abs(ra - 3 * P.M) - 2 * P.a, 1e-8)
    q = trapped_init(P, tau, phi, g["theta0"])
    q.r = ra * (1.0 + g["offset"])
    off = integrate(P, q, g["lyapunov_lam_max"], tol=1e-12)
    rate, err, n = lyapunov_fit(off, ra)
    chk.lower("lyapunov_rate", rate, 0.0)
    summary = {"r_a": ra, "drift": traj.drift, "lyapunov_rate": rate,
               "lyapunov_stderr": err, "lyapunov_samples": n, "n_steps": len(traj.lam)}
    k = int(np.argmax(np.abs(traj.r - ra)))
    worst = {"lambda": float(traj.lam[k]), "r": float(traj.r[k])}
    return chk, summary, worst, ["trajectory.csv"]


def _run_symbols(cfg, out: Path, rng):
    from .microlocal import (BracketConfig, bracket_positivity_audit, mt1_check,
                             sample_window_points, sos_certify, sos_summary)
    from .multiplier import build_multiplier, schwarzschild_sos_check
    from .solver import write_csv
    P = _params(cfg)
    s = cfg["symbols"]
    mult = build_multiplier(P.M)
    bcfg = BracketConfig(s["scheme"])
    pts = sample_window_points(P, s["n_samples"], rng, half_width=s["half_width"], on_shell=0)
    aud = bracket_positivity_audit(P, mult, pts, bcfg)
    chk = _Checks()
    chk.lower("bracket_min_margin", aud["min_margin"], 0.0)
    chk.upper("bracket_odd_part", aud["max_odd_part"], 1e-10)
    chk.upper("bracket_identity_residual", aud["max_identity_residual"], 1e-8)
    P0 = KerrParams(P.M, 0.0)
    spts = sample_window_points(P0, s["n_samples"], rng, half_width=s["half_width"], on_shell=0)
    sos_rows = []
    for p in spts:
        phi = float(2 * math.pi * rng.random())
        res = schwarzschild_sos_check(mult, p, phi=phi)
        sos_rows.append((p.r, res["bracket"], res["sos"], res["regroup"], res["lambda_split"]))
    sos_arr = np.array(sos_rows)
    chk.upper("schwarzschild_sos_residual", float(sos_arr[:, 1:4].max()), 1e-7)
    chk.upper("lambda_split_residual", float(sos_arr[:, 4].max()), 1e-12)
    summary = {"bracket": {k: aud[k] for k in ("min_margin", "max_odd_part",
                                               "max_identity_residual", "n")}}
    if s["n_sos"] > 0:
        grid = sample_window_points(P, s["n_sos"], rng, half_width=s["half_width"])
        reps = sos_certify(P, mult, grid, bcfg)
        ss = sos_summary(reps, P.a)
        chk.upper("sos_divisibility", ss["max_divisibility_residual"], 1e-6)
        chk.lower("sos_min_mu_margin", ss["min_mu_margin"], -1e-12)
        summary["sos"] = ss
        write_csv(out / "sos.csv", ["r", "theta", "xi_r", "Theta", "Phi", "div1", "div2",
                                    "eK1", "eK2", "q_S", "margin"],
                  [(rp.point.r, rp.point.theta, rp.point.xi_r, rp.point.Theta, rp.point.Phi,
                    *rp.divisibility_residuals, *rp.e_K_at_roots, rp.q_S, rp.margin)
                   for rp in reps])
    if s["n_mt1"] > 0:
        mpts = sample_window_points(P, s["n_mt1"], rng, half_width=s["half_width"])
        worst_mt1 = 0.0
        for p in mpts:
            q = type(p)(p.r, p.theta, 0.0, p.Theta, p.Phi)
            worst_mt1 = max(worst_mt1, max(mt1_check(P, q, mult)))
        chk.upper("mt1_residual", worst_mt1, 1e-6)
        summary["mt1_max_residual"] = worst_mt1
    write_csv(out / "bracket.csv", ["r", "bracket", "sos", "regroup", "lambda_split"], sos_rows)
    am = aud["argmin"]
    worst = {"bracket_argmin": list(am.args()) if hasattr(am, "args") else am}
    return chk, summary, worst, ["bracket.csv"] + (["sos.csv"] if s["n_sos"] > 0 else [])


def _run_multiplier(cfg, out: Path, rng):
    from .multiplier import default_multiplier, form_coefficients, positivity_audit
    from .solver import write_csv
    P = _params(cfg)
    m = cfg["multiplier"]
    spec = default_multiplier(P.M, m["delta"], m["delta1"], m["R1"], m["bigC"])
    grid = np.geomspace(m["r_min"] * P.M, m["r_max"] * P.M, m["n_grid"])
    rep = positivity_audit(spec, grid)
    boxq = spec.box_q(grid)
    zeroth = form_coefficients(spec, grid).zeroth
    near = np.abs(grid - 3 * P.M) <= 0.25 * P.M
    chk = _Checks()
    chk.lower("audit_min_margin", rep["min_margin"], 0.0)
    chk.upper("max_box_q", rep["max_box_q"], 0.0)
    if np.any(near):
        chk.lower("min_zeroth_near_3M", float(zeroth[near].min()), 0.0)
    chk.upper("abs_q_S_at_3M", abs(float(spec.q_S(3.0 * P.M))), 1e-12)
    write_csv(out / "audit.csv", ["r", "margin", "box_q", "zeroth"],
              zip(grid, rep["margins"], boxq, zeroth))
    summary = {k: rep[k] for k in ("min_margin", "argmin_r", "min_principal_margin",
                                   "max_box_q", "min_zeroth", "grid", "spec")}
    worst = {"r": rep["argmin_r"], "xi": rep["argmin_xi"]}
    return chk, summary, worst, ["audit.csv"]


def _mode_run(P, s, pert=None, cfl=0.5, record_every=4):
    from .solver import Grid1D, bump_data, evolve
    rs_obs = float(tortoise(P, s["r_obs"]))
    grid = Grid1D.for_run(s["T"], s["dr"], rs_obs, s["data_center"], s["data_halfwidth"],
                          cfl=cfl, M=P.M)
    s0 = bump_data(grid, s["l"], s["data_center"], s["data_halfwidth"], ingoing=s["ingoing"])
    hist = evolve(grid, s0, s["T"], pert=pert, r_obs=s["r_obs"], record_every=record_every,
                  params=P)
    return grid, hist


def _morawetz_study(P, mo, l):
    from .multiplier import default_multiplier
    from .solver import Grid1D, bump_data, evolve, morawetz_audit
    mult = default_multiplier(P.M)
    rows = []
    for dr in (mo["dr"], mo["dr"] / 2):
        grid = Grid1D.from_spacing(-60.0 * P.M, 60.0 * P.M + mo["T"], dr, M=P.M)
        s0 = bump_data(grid, l, 10.0 * P.M, 5.0 * P.M, ingoing=True)
        hist = evolve(grid, s0, mo["T"], check_boundaries=False, params=P,
                      dense=(mo["slab"][0], mo["slab"][1], 2.2 * P.M, 1.5 * mo["r_range"][1]),
                      record_every=40)
        rows.append(morawetz_audit(hist, mult, tuple(mo["slab"]), grid,
                                   r_range=tuple(mo["r_range"])))
    order = math.log2(rows[0]["residual"] / rows[1]["residual"])
    return rows, order


def _run_solve(cfg, out: Path, rng):
    from .solver import le_norms, write_csv
    P = _params(cfg)
    s = cfg["solve"]
    grid, hist = _mode_run(P, s, cfl=s["cfl"], record_every=s["record_every"])
    t, E = hist.arrays("energy_series")
    ts, Es = hist.arrays("state_energy_series")
    drift = float(np.max(np.abs(E / E[0] - 1.0)))
    write_csv(out / "energy.csv", ["t", "E", "E_state"], zip(t, E, Es))
    write_csv(out / "point.csv", ["t", "u_obs"], hist.point_series)
    E0 = float(E[0])
    norm_rows = []
    for T in s["le_times"]:
        if T > s["T"] + 1e-9:
            continue
        le_m, le_s = le_norms(hist, grid, 0.0, T)
        norm_rows.append((T, le_m, le_s))
    write_csv(out / "norms.csv", ["T", "LE_m", "LE_S"], norm_rows)
    chk = _Checks()
    chk.upper("energy_drift", drift, 1e-6)
    summary = {"E0": E0, "energy_drift": drift,
               "state_energy_drift": float(np.max(np.abs(Es / Es[0] - 1.0))),
               "norms": [{"T": T, "LE_m": a, "LE_S": b} for T, a, b in norm_rows],
               "n": grid.n, "dt": hist.meta["dt"]}
    have = {T: b for T, _, b in norm_rows}
    half = 0.5 * s["T"]
    if half in have and s["T"] in have and have[half] > 0:
        plateau = abs(have[s["T"]] ** 2 / have[half] ** 2 - 1.0)
        chk.upper("le_S_plateau", plateau, 0.05)
        summary["le_S_sq_over_E0"] = have[s["T"]] ** 2 / E0
    chk.upper("le_S_le_le_m", max((b - a for _, a, b in norm_rows), default=0.0), 1e-12)
    arts = ["energy.csv", "point.csv", "norms.csv"]
    if s.get("morawetz"):
        rows, order = _morawetz_study(P, s["morawetz"], s["l"])
        write_csv(out / "audit.csv", ["slab_t0", "slab_t1", "dr", "residual", "min_Q"],
                  [(r["slab"][0], r["slab"][1], dr, r["residual"], r["min_Q"])
                   for r, dr in zip(rows, (s["morawetz"]["dr"], s["morawetz"]["dr"] / 2))])
        chk.band("morawetz_order", order, 2.0, 0.2)
        chk.lower("morawetz_min_Q", min(r["min_Q"] for r in rows), -1e-12)
        summary["morawetz"] = {"order": order, "rows": rows}
        arts.append("audit.csv")
    k = int(np.argmax(np.abs(E / E[0] - 1.0)))
    return chk, summary, {"t_max_drift": float(t[k])}, arts


def _run_tailfit(cfg, out: Path, rng):
    from .solver import tail_fit, write_csv
    P = _params(cfg)
    s = cfg["tailfit"]
    grid, hist = _mode_run(P, s)
    write_csv(out / "point.csv", ["t", "u_obs"], hist.point_series)
    slope, err = tail_fit(hist.point_series, tuple(s["window"]))
    chk = _Checks()
    chk.band("tail_slope", slope, s["expected_slope"], s["slope_tol"])
    summary = {"slope": slope, "stderr": err, "window": s["window"]}
    return chk, summary, {"slope": slope}, ["point.csv"]


def _perturbation(g, M):
    if g["perturbation"] == "global":
        return global_perturbation(g["epsilon"], power=g["power"], M=M,
                                   weights=dict(g["weights"]))
    return photon_sphere_perturbation(g["epsilon"], g["power"], M=M, weights=dict(g["weights"]))


def _run_gronwall(cfg, out: Path, rng):
    from .solver import gronwall_audit, write_csv
    P = _params(cfg)
    g = cfg["gronwall"]
    pert = _perturbation(g, P.M)
    s = dict(g, data_center=10.0, data_halfwidth=5.0, ingoing=True)
    grid, hist = _mode_run(P, s, pert=pert)
    rep = gronwall_audit(hist, pert)
    t, E = hist.arrays("state_energy_series")
    write_csv(out / "energy.csv", ["t", "E", "ratio"], zip(t, E, E / E[0]))
    chk = _Checks()
    if g["power"] > 0.5:
        chk.upper("max_energy_ratio", rep["max_ratio"], g["ratio_bound"])
    else:
        chk.upper("growth_exponent", rep["growth_exponent"], g["exponent_bound"])
    chk.upper("sup_ratio_C10", rep["sup_ratio_C10"], 1.0 + g["ratio_bound"] / 100)
    summary = dict(rep, epsilon=g["epsilon"], power=g["power"])
    k = int(np.argmax(E))
    return chk, summary, {"t_max_energy": float(t[k])}, ["energy.csv"]


_WORKFLOWS = {"geodesic": _run_geodesic, "symbols": _run_symbols,
              "multiplier": _run_multiplier, "solve": _run_solve,
              "tailfit": _run_tailfit, "gronwall": _run_gronwall}


def run(config: dict, out_dir=None, seed: int | None = None) -> dict:
    """Validate, execute and report one experiment.

    ``out_dir`` and ``seed`` override the config fields. The report is
    also written to ``<out_dir>/report.json``.
    """
    cfg = resolve(config)
    if out_dir is not None:
        cfg["output_dir"] = str(out_dir)
    if seed is not None:
        cfg["seed"] = int(seed)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    rng = make_rng(cfg["seed"])
    echo = dict(cfg)
    echo.pop("output_dir")
    try:
        chk, summary, worst, arts = _WORKFLOWS[cfg["kind"]](cfg, out, rng)
    except Exception as exc:          # surfaced in the report with the input echoed
        chk = _Checks()
        chk.rows.append({"name": "error", "value": float("nan"), "tolerance": 0.0,
                         "sense": "error", "pass": False})
        summary, worst, arts = {"error": f"{type(exc).__name__}: {exc}"}, None, []
    report = _report(echo, chk, summary, worst, arts)
    (out / "report.json").write_text(canonical(report), encoding="utf-8")
    return report


# ======================================================================
# Sweeps
# ======================================================================

def _thread_cap() -> int:
    env = os.environ.get("LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"LAB_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _sweep_one(args):
    name, config, out_dir = args
    try:
        rep = run(config, out_dir=out_dir)
        return {"name": name, "config_hash": rep["config_hash"], "pass": rep["pass"],
                "checks": rep["checks"], "summary": rep["summary"]}
    except Exception as exc:
        return {"name": name, "config_hash": None, "pass": False, "checks": [],
                "summary": {"error": f"{type(exc).__name__}: {exc}"}}


def sweep(configs, out_dir="lab_sweep", names=None) -> dict:
    """Run a homogeneous list of configs in parallel and merge the reports.

    Rows are sorted by (config hash, name) so the merge does not depend
    on execution order. A failing config marks its row and the sweep
    continues. For gronwall sweeps the growth exponent must be
    nondecreasing in epsilon.
    """
    configs = list(configs)
    names = list(names) if names is not None else [f"config_{i:03d}" for i in range(len(configs))]
    if not configs:
        return {"kind": None, "rows": [], "checks": [], "pass": True, "versions": versions()}
    kinds = set()
    for c in configs:
        validate(c)
        kinds.add(c["kind"])
    if len(kinds) != 1:
        raise ConfigError(f"sweep requires a homogeneous kind, got {sorted(kinds)}")
    kind = kinds.pop()
    out = Path(out_dir)
    jobs = [(n, c, str(out / n)) for n, c in zip(names, configs)]
    workers = min(_thread_cap(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    rows.sort(key=lambda r: (r["config_hash"] or "", r["name"]))
    chk = _Checks()
    if kind == "gronwall":
        pts = sorted((r["summary"]["epsilon"], r["summary"]["growth_exponent"])
                     for r in rows if "growth_exponent" in r["summary"])
        worst = 0.0
        for (e0, g0), (e1, g1) in zip(pts, pts[1:]):
            if e1 > e0:
                worst = max(worst, g0 - g1)
        chk.upper("growth_exponent_monotone_violation", worst, 0.0)
    report = _jsonable({"kind": kind, "rows": rows, "checks": chk.rows,
                        "versions": versions(),
                        "pass": all(r["pass"] for r in rows) and all(c["pass"] for c in chk.rows)})
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep_report.json").write_text(canonical(report), encoding="utf-8")
    return report


def load_dir(path) -> tuple[list, list]:
    """Configs (``*.json``, sorted by file name) of a directory and their stems."""
    files = sorted(Path(path).glob("*.json"))
    return [parse_config(f.read_text(encoding="utf-8")) for f in files], [f.stem for f in files]
