"""End-to-end acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the
terminal summary. Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import math

import numpy as np
import pytest

from kerrlab.geodesic import (hamiltonian, integrate, lyapunov_fit, trapped_init,
                              trapped_radius)
from kerrlab.geometry import KerrParams, metric_bl
from kerrlab.microlocal import (bracket_positivity_audit, mt1_check, sample_window_points,
                                sos_certify, sos_summary)
from kerrlab.multiplier import (build_multiplier, default_multiplier, form_coefficients,
                                positivity_audit,
                                schwarzschild_sos_check)
from kerrlab.runner import DEFAULTS, _mode_run, _morawetz_study, make_rng, resolve, run
from kerrlab.solver import le_norms, tail_fit

SPINS = (0.0, 0.1, 0.3)
pytestmark = pytest.mark.slow


def _rng(key):
    return make_rng(key)


# ---- 1 ----------------------------------------------------------------------

def test_c01_metric_inverse_and_volume(criterion):
    rng = _rng(1)
    inv = vol = 0.0
    for a in SPINS:
        P = KerrParams(1.0, a)
        for _ in range(10_000):
            r = P.r_plus * (1 + 1e-3) + (50.0 - P.r_plus) * rng.random() ** 2
            th = 0.01 + (math.pi - 0.02) * rng.random()
            g = metric_bl(P, r, th)
            inv = max(inv, float(np.max(np.abs(g.cov @ g.con - np.eye(4)))))
            ref = float(P.rho2(r, th)) * math.sin(th)
            vol = max(vol, abs(math.sqrt(abs(np.linalg.det(g.cov))) - ref) / ref)
    ok = inv < 1e-12 and vol < 1e-10
    assert criterion(1, "metric", ok, f"max|g g^-1 - I|={inv:.2e}, sqrt|det| rel={vol:.2e}")


# ---- 2, 3 -------------------------------------------------------------------

ORBITS = [(0.0, math.pi / 4), (3.0, math.pi / 2), (-2.0, 1.0)]


def test_c02_trapped_orbits(criterion):
    tau = 1.0 / 6.0
    dev = drift = 0.0
    for a in SPINS:
        P = KerrParams(1.0, a)
        for w, th in ORBITS:
            ra, _ = trapped_radius(P, tau, w * tau)
            traj = integrate(P, trapped_init(P, tau, w * tau, th), 100.0, tol=3e-15)
            dev = max(dev, float(np.max(np.abs(traj.r - ra))))
            drift = max(drift, traj.drift["pK_rel"])
    ra0 = trapped_radius(KerrParams(), tau, 0.0)[0]
    region = 0.0
    for a in SPINS:
        for w in np.linspace(-5.0, 5.0, 41):
            ra = trapped_radius(KerrParams(1.0, a), 1.0, w)[0]
            region = max(region, abs(ra - 3.0) - 2 * a)
    ok = dev < 1e-6 and drift < 1e-9 and abs(ra0 - 3.0) < 1e-12 and region <= 1e-8
    assert criterion(2, "trapping", ok,
                     f"max|r-r_a|={dev:.2e}, p_K drift={drift:.2e}, "
                     f"|r_a(0)-3|={abs(ra0 - 3):.1e}, max(|r_a-3|-2a)={region:.1e}")


def _null_offset(P, p, rel):
    # shift r and rescale Theta so that the point stays null
    p.r *= 1.0 + rel
    H1 = hamiltonian(P, p)
    th = p.Theta
    p.Theta = 0.0
    H0 = hamiltonian(P, p)
    p.Theta = math.copysign(math.sqrt(th * th * (-H0) / (H1 - H0)), th)
    return p


def test_c03_photon_sphere_instability(criterion):
    rates = []
    for a in SPINS:
        P = KerrParams(1.0, a)
        p = trapped_init(P, 1.0 / 6.0, 0.0, math.pi / 3)
        ra = p.r
        traj = integrate(P, _null_offset(P, p, 1e-6), 150.0, tol=1e-12)
        rate, err, n = lyapunov_fit(traj, ra)
        rates.append((rate, err, n))
    # at a = 0 and tau = 1/6 the linearized rate is 1/(3 sqrt 3)
    ok = all(r > 0 and e < 0.1 * r and n >= 3 for r, e, n in rates)
    ok = ok and abs(rates[0][0] * 3 * math.sqrt(3) - 1) < 0.02
    assert criterion(3, "instability", ok,
                     "rates " + ", ".join(f"{r:.4f}" for r, _, _ in rates)
                     + f" (a=0 reference {1 / (3 * math.sqrt(3)):.4f})")


# ---- 4, 5 -------------------------------------------------------------------

def test_c04_bracket_positivity(criterion):
    rng = _rng(4)
    worst_margin, odd = np.inf, 0.0
    for a in SPINS:
        P = KerrParams(1.0, a)
        pts = sample_window_points(P, 1000, rng, half_width=0.25, on_shell=0)
        aud = bracket_positivity_audit(P, build_multiplier(), pts)
        worst_margin = min(worst_margin, aud["min_margin"])
        odd = max(odd, aud["max_odd_part"])
    ok = worst_margin > 0 and odd < 1e-10
    assert criterion(4, "bracket positivity", ok, f"margin={worst_margin:.4f}, odd={odd:.1e}")


def test_c05_schwarzschild_sos(criterion):
    rng = _rng(5)
    P = KerrParams()
    mult = build_multiplier()
    pts = sample_window_points(P, 1000, rng, half_width=0.25, on_shell=0)
    res, lam = 0.0, 0.0
    for p in pts:
        out = schwarzschild_sos_check(mult, p, phi=float(2 * math.pi * rng.random()))
        res = max(res, out["bracket"], out["sos"], out["regroup"])
        lam = max(lam, out["lambda_split"])
    ok = res <= 1e-7 and lam <= 1e-13
    assert criterion(5, "Schwarzschild SOS", ok, f"residual={res:.1e}, lambda split={lam:.1e}")


# ---- 6, 7 -------------------------------------------------------------------

_SOS_CACHE = {}


def _sos_run(n):
    if n not in _SOS_CACHE:
        P = KerrParams(1.0, 0.1)
        grid = sample_window_points(P, n, _rng(6 + n), half_width=0.25)
        _SOS_CACHE[n] = sos_summary(sos_certify(P, build_multiplier(), grid), P.a)
    return _SOS_CACHE[n]


def test_c06_kerr_sos_certificate(criterion):
    coarse, fine = _sos_run(250), _sos_run(1000)
    C0, C1 = coarse["eK_O_a_constant"], fine["eK_O_a_constant"]
    stable = 0.5 <= C1 / C0 <= 2.0
    ok = (fine["max_divisibility_residual"] <= 1e-6 and fine["min_mu_margin"] >= -1e-12
          and math.isfinite(C1) and stable)
    assert criterion(6, "Kerr SOS certificate", ok,
                     f"divisibility={fine['max_divisibility_residual']:.1e}, "
                     f"min mu^2={fine['min_mu_margin']:.1e}, C(250)={C0:.3f}, C(1000)={C1:.3f}")


def test_c07_vanishing_on_trapped_set(criterion):
    coarse, fine = _sos_run(250), _sos_run(1000)
    v0, v1 = coarse["vanishing_constant"], fine["vanishing_constant"]
    s0, s1 = coarse["s_tilde_constant"], fine["s_tilde_constant"]
    P = KerrParams(1.0, 0.1)
    mt1 = 0.0
    for p in sample_window_points(P, 200, _rng(7), half_width=0.25):
        q = type(p)(p.r, p.theta, 0.0, p.Theta, p.Phi)
        mt1 = max(mt1, *mt1_check(P, q, build_multiplier()))
    ok = (all(math.isfinite(x) for x in (v0, v1, s0, s1))
          and v1 / v0 < 2.0 and v0 / v1 < 2.0 and s1 / s0 < 2.0 and s0 / s1 < 2.0
          and mt1 <= 1e-6)
    assert criterion(7, "trapped-set vanishing", ok,
                     f"e_K ratio {v0:.3f}->{v1:.3f}, s_K ratio {s0:.3f}->{s1:.3f}, "
                     f"MT1={mt1:.1e}")


# ---- 8, 9 -------------------------------------------------------------------

def test_c08_multiplier_positivity(criterion):
    spec = default_multiplier()
    grid = np.geomspace(2.2, 100.0, 400)
    rep = positivity_audit(spec, grid)
    near = np.abs(grid - 3.0) < 0.25
    zeroth = float(form_coefficients(spec, grid[near]).zeroth.min())
    ok = rep["pass"] and rep["min_margin"] > 0 and zeroth > 0 and rep["max_box_q"] < 0
    assert criterion(8, "multiplier positivity", ok,
                     f"margin={rep['min_margin']:.2e}, min zeroth near 3M={zeroth:.2e}, "
                     f"max box q={rep['max_box_q']:.2e}")


def test_c09_discrete_morawetz(criterion):
    cfg = resolve({"kind": "solve", "solve": {"morawetz": {}}})
    rows, order = _morawetz_study(KerrParams(), cfg["solve"]["morawetz"], 0)
    minQ = min(r["min_Q"] for r in rows)
    ok = abs(order - 2.0) <= 0.2 and minQ >= -1e-12
    assert criterion(9, "discrete Morawetz", ok,
                     f"order={order:.3f}, residuals {rows[0]['residual']:.2e}"
                     f"->{rows[1]['residual']:.2e}, min Q={minQ:.1e}")


# ---- 10, 11 -----------------------------------------------------------------

@pytest.fixture(scope="module")
def long_run():
    s = dict(DEFAULTS["solve"], T=600.0, dr=0.05)
    return _mode_run(KerrParams(), s, cfl=0.5, record_every=4)


def test_c10_energy_and_local_energy(criterion, long_run):
    grid, hist = long_run
    _, E = hist.arrays("energy_series")
    drift = float(np.max(np.abs(E / E[0] - 1)))
    le300 = le_norms(hist, grid, 0.0, 300.0)[1] ** 2 / E[0]
    le600 = le_norms(hist, grid, 0.0, 600.0)[1] ** 2 / E[0]
    plateau = abs(le600 / le300 - 1)
    ok = drift < 1e-6 and plateau < 0.05
    assert criterion(10, "energy and LE", ok,
                     f"drift={drift:.1e}, LE_S^2/E0 {le300:.5f}->{le600:.5f} ({plateau:.2%})")


def test_c11_price_tail(criterion, long_run):
    _, hist = long_run
    slope, err = tail_fit(hist.point_series, (200.0, 600.0))
    ok = abs(slope + 3.0) <= 0.3
    assert criterion(11, "Price tail", ok, f"slope={slope:.4f} +- {err:.1e}")


# ---- 12 ---------------------------------------------------------------------

def test_c12_gronwall_classes(criterion, tmp_path):
    def go(eps, power):
        cfg = {"kind": "gronwall", "gronwall": {"epsilon": eps, "power": power}}
        return run(cfg, out_dir=tmp_path / f"{eps}_{power}")["summary"]
    bounded = go(0.01, 0.6)
    gam = {e: go(e, 0.5)["growth_exponent"] for e in (0.02, 0.01, 0.005)}
    ok = (bounded["max_ratio"] <= 1.5 and gam[0.01] <= 0.1
          and gam[0.02] > gam[0.01] > gam[0.005])
    assert criterion(12, "Gronwall classes", ok,
                     f"max E/E0 (power 0.6)={bounded['max_ratio']:.4f}, exponents "
                     + ", ".join(f"{e:g}:{g:.5f}" for e, g in gam.items()))
