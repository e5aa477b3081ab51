import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from kerrlab.geometry import KerrParams, metric_bl
from kerrlab.microlocal import SymbolPoint
from kerrlab.multiplier import (MultiplierSpec, _zero_profile, alpha_S2, audit_point,
                                beta_S2, build_multiplier, constant_b, default_multiplier,
                                far_field_f, form_coefficients, lambda_split, nu_profile,
                                nu_regrouping, positivity_audit, quadratic_form,
                                schwarzschild_sos_check, trapping_b)

DEFAULT = default_multiplier()
GRID = np.geomspace(2.2, 100.0, 400)
ONE = build_multiplier(b=constant_b(1.0))


# ---- profiles -------------------------------------------------------------

def test_default_b_positive_bounded():
    r = np.geomspace(2.0 + 1e-6, 1e4, 2000)
    b, _ = trapping_b(r)
    assert np.all(b > 0) and np.all(b < 1.5)
    assert trapping_b(1e8)[0] == pytest.approx(1.0, rel=1e-6)


def test_default_b_derivative_complex_step():
    r = np.array([2.3, 2.999, 3.0, 3.0005, 4.0, 20.0])
    _, db = trapping_b(r)
    cs = np.imag(trapping_b(r + 1e-20j)[0]) / 1e-20
    np.testing.assert_allclose(db, cs, rtol=1e-12)


def test_default_b_solves_its_defining_equation():
    r, M = sp.symbols("r M", positive=True)
    x = (r - 3 * M) / M
    b = (r - 2 * M) / r ** 2 * (r + M + 4 * M * sp.log(1 + x) / x)
    core = (1 - 2 * M / r) * sp.diff(r ** 2 * (r - 3 * M) * b / (r - 2 * M), r) / (2 * r ** 2)
    target = (r ** 2 - 3 * M * r + 4 * M ** 2) / r ** 3
    for val in (2.5, 3.7, 11.0):
        assert float((core - target).subs({M: 1, r: sp.nsimplify(val)}).evalf(40)) == pytest.approx(0, abs=1e-25)
    box = sp.simplify((1 - 2 * M / r) * sp.diff(target, r, 2)
                      + 2 * (1 - M / r) * sp.diff(target, r) / r)
    assert sp.simplify(box + 8 * M * (r - 3 * M) ** 2 / r ** 6) == 0


def test_profile_supports():
    spec = build_multiplier(c_amp=0.01, m_amp=0.01)
    r_out = np.linspace(2.5, 50, 200)
    assert np.all(spec.c(r_out)[0] == 0) and np.all(spec.m(r_out)[0] == 0)
    assert np.all(far_field_f(np.linspace(2.2, 20.0, 100), 20.0, 0.05)[0] == 0)
    assert far_field_f(1e6, 20.0, 0.05)[0] > 0


def test_far_field_derivatives_fd():
    r = np.array([25.0, 33.0, 39.0, 80.0])
    f, df, ddf = far_field_f(r, 20.0, 0.05)
    h = 1e-3
    fp, fm = far_field_f(r + h, 20.0, 0.05)[0], far_field_f(r - h, 20.0, 0.05)[0]
    np.testing.assert_allclose(df, (fp - fm) / (2 * h), rtol=1e-6)
    np.testing.assert_allclose(ddf, (fp - 2 * f + fm) / h ** 2, rtol=1e-4, atol=1e-10)


# ---- q and its pieces -----------------------------------------------------

def test_q_at_photon_sphere_matches_fd_of_bracket():
    M = 1.0

    def bracket(r):
        b, _ = trapping_b(r)
        return r * r * (r - 3 * M) / (r - 2 * M) * b
    h = 1e-5
    d = (-bracket(3 + 2 * h) + 8 * bracket(3 + h) - 8 * bracket(3 - h) + bracket(3 - 2 * h)) / (12 * h)
    q_fd = (1 - 2 / 3) * d / (2 * 9)
    # product rule at 3M: d/dr[...] = r^2 b / (r - 2M)
    assert q_fd == pytest.approx(trapping_b(3.0)[0] / 6.0, rel=1e-9)
    assert DEFAULT.q(3.0)[0] == pytest.approx(q_fd, rel=1e-9)


def test_closed_and_fd_q_agree():
    raw = MultiplierSpec(**{**DEFAULT.__dict__, "q_closed": None})
    r = np.linspace(2.3, 15.0, 40)
    for a, b in zip(DEFAULT.q(r), raw.q(r)):
        np.testing.assert_allclose(a, b, rtol=1e-7, atol=1e-9)


def test_q_S_vanishes_at_3M():
    for spec in (DEFAULT, ONE):
        assert abs(spec.q_S(3.0)) < 1e-14
        assert spec.q_tilde_S(3.0) == 0.0


@given(st.floats(2.5, 4.0))
def test_q_S_formula(r):
    for spec in (DEFAULT, ONE):
        assert spec.q_S(r) == pytest.approx(spec.q_S_formula(r), rel=1e-10, abs=1e-14)


def test_box_q_negative():
    r = np.geomspace(DEFAULT.M * 1.8 + 0.3, 200.0, 1000)
    assert np.max(DEFAULT.box_q(r)) < 0


# ---- nu and alpha, beta ---------------------------------------------------

def test_nu_examples():
    assert nu_profile(ONE, 3.0) == pytest.approx(1 - 0.01 / 243, rel=1e-15)
    small = build_multiplier(delta1=1e-12, b=constant_b(1.0))
    assert nu_profile(small, 3.0) == pytest.approx(1.0, abs=1e-11)
    assert 0 < nu_profile(DEFAULT, 3.0) < 1
    with pytest.raises(ValueError):
        nu_profile(build_multiplier(delta1=1e4, b=constant_b(1.0)), 3.0)


@given(st.floats(2.76, 3.24).filter(lambda r: abs(r - 3) > 1e-6))
def test_nu_defining_relation(r):
    lhs = (1 - nu_profile(ONE, r)) * alpha_S2(ONE, r)
    assert lhs == pytest.approx(ONE.delta1 * (r - 3) ** 2 / r ** 4, rel=1e-10)
    lhs = (1 - nu_regrouping(ONE, r)) * alpha_S2(ONE, r)
    assert lhs == pytest.approx(ONE.delta1 * (r - 3) ** 2 / (r * (r - 2)), rel=1e-10)


def test_alpha_beta_signs():
    r = np.linspace(2.75, 3.25, 501)
    a2 = alpha_S2(DEFAULT, r)
    assert np.all(a2 >= 0) and alpha_S2(DEFAULT, 3.0) == 0.0
    assert np.all(a2[np.abs(r - 3) > 1e-9] > 0)
    assert np.all(beta_S2(DEFAULT, np.linspace(2.1, 5.0, 500)) > 0)


# ---- Schwarzschild sum of squares ----------------------------------------

def test_sos_example_point():
    res = schwarzschild_sos_check(ONE, SymbolPoint(3.1, math.pi / 2, 0.2, 0.3, 1.0, 0.5))
    assert max(res.values()) <= 1e-7


def test_sos_at_photon_sphere():
    p = SymbolPoint(3.0, 1.0, 0.4, 0.5, 0.7, 0.3)
    assert alpha_S2(DEFAULT, 3.0) == 0.0
    assert max(schwarzschild_sos_check(DEFAULT, p).values()) <= 1e-12


@given(st.floats(2.76, 3.24), st.floats(0.2, math.pi - 0.2), st.floats(0, 2 * math.pi),
       st.tuples(*[st.floats(-2, 2)] * 4))
def test_sos_property(r, th, phi, m):
    p = SymbolPoint(r, th, *m)
    res = schwarzschild_sos_check(DEFAULT, p, phi=phi)
    assert res["bracket"] <= 1e-7
    assert res["sos"] <= 1e-10
    assert res["regroup"] <= 1e-10
    assert res["lambda_split"] <= 1e-13


def test_lambda_split_identity(rng):
    worst = 0.0
    for _ in range(1000):
        r, th, phi = rng.uniform(2, 10), rng.uniform(0.05, math.pi - 0.05), rng.uniform(0, 7)
        xi, T, F = rng.standard_normal(3)
        lam = lambda_split(r, th, phi, xi, T, F)
        exact = T * T + F * F / math.sin(th) ** 2
        worst = max(worst, abs(lam @ lam - exact) / exact)
    assert worst < 1e-13


# ---- quadratic form and audit --------------------------------------------

def _zero_spec(M=1.0):
    z = lambda r: (np.zeros_like(np.asarray(r, float)),) * 2  # noqa: E731
    return MultiplierSpec(M=M, b=z, c=_zero_profile, f=_zero_profile, m=_zero_profile,
                          delta1=0.0, bigC=0.0)


def test_zero_multiplier_gives_zero_form():
    Q = quadratic_form(_zero_spec(), None, 5.0, 1.0)
    assert np.all(Q.coeff == 0) and Q.zeroth == 0 and np.all(Q.cross == 0)


def test_quadratic_form_checks_metric():
    Q = quadratic_form(DEFAULT, metric_bl(KerrParams(), 5.0, 1.0), 5.0, 1.0)
    assert Q.coeff.shape == (4, 4)
    with pytest.raises(ValueError):
        quadratic_form(DEFAULT, metric_bl(KerrParams(1.0, 0.3), 5.0, 1.0), 5.0, 1.0)


def test_principal_part_is_deformation_bracket():
    # q^{ab} xi_a xi_b = 1/2 {p_S, X^r xi_r} + (q - div X / 2) p_S, by complex step
    r0, th = 4.3, 1.1
    tau, xi, T, F = 0.4, -0.3, 0.7, 0.2

    def p(r):
        h = 1 - 2 / r
        return -tau ** 2 / h + h * xi ** 2 + (T ** 2 + F ** 2 / math.sin(th) ** 2) / r ** 2
    Xr, dXr = DEFAULT.X_r(r0)
    hstep = 1e-20
    dp_dr = np.imag(p(r0 + 1j * hstep)) / hstep
    dp_dxi = 2 * (1 - 2 / r0) * xi
    bracket = dp_dxi * dXr * xi - dp_dr * Xr
    lam = DEFAULT.q(r0)[0] - DEFAULT.q_X(r0)
    expected = 0.5 * bracket + lam * p(r0)
    Q = quadratic_form(DEFAULT, None, r0, th)
    v = np.array([tau, xi, T, F])
    assert v @ Q.coeff @ v == pytest.approx(float(expected), rel=1e-12)


def test_radial_contraction_dominates_weights():
    # smallest c with Q(xi, xi) >= c W(xi) on the (tau, xi_r) plane
    d = DEFAULT.delta
    worst = np.inf
    for r in np.geomspace(3.5, 1e6, 300):
        Q = quadratic_form(DEFAULT, None, r).coeff[:2, :2]
        w = np.array([(1 - 3 / r) ** 2, 1.0]) * r ** (-1 - d)
        scaled = Q / np.sqrt(np.outer(w, w))
        worst = min(worst, np.linalg.eigvalsh(scaled)[0])
    assert worst >= 5e-4


def test_zeroth_positive_near_3M():
    r = np.linspace(2.75, 3.25, 101)
    assert np.min(form_coefficients(DEFAULT, r).zeroth) > 0
    assert quadratic_form(DEFAULT, None, 3.0).zeroth > 0


def test_default_audit_passes():
    rep = positivity_audit(DEFAULT, GRID)
    assert rep["pass"] and rep["min_margin"] > 0 and rep["max_box_q"] < 0
    assert DEFAULT.c_amp > 0 and DEFAULT.m_amp > 0


def test_minkowski_sanity():
    spec = MultiplierSpec(M=0.0, b=_zero_spec().b, c=_zero_profile,
                          f=lambda r: far_field_f(r, 1.0, 0.05), m=_zero_profile,
                          delta=0.05, delta1=0.0, R1=1.0, bigC=0.0)
    rep = positivity_audit(spec, np.geomspace(2.01, 100.0, 200))
    assert rep["min_margin"] > 0


def test_absurd_delta1_fails_near_photon_sphere():
    rep = positivity_audit(build_multiplier(delta1=10.0), GRID)
    assert not rep["pass"]
    window = np.abs(GRID - 3.0) < 0.25
    assert np.all(rep["margins"][window] < 0)


def test_audit_point_at_exactly_3M():
    row = audit_point(DEFAULT, 3.0)
    assert math.isfinite(row["margin"]) and row["r"] > 3.0
