"""
Schwarzschild Morawetz multiplier and its positivity audit.

The multiplier is the triple (X, q, m) with

    X = b(r) (1 - 3M/r) d_r + c(r) d_t + f(r) d_r,
    q = (1/(2 r^2)) (1 - 2M/r) d_r( r^2 (r - 3M) b / (r - 2M) )
        - delta1 (r - 3M)^2 / r^4 + f / r,

and m = m_r(r) dr. The bulk quadratic form of the divergence identity
is Q = q^{ab} du_a du_b + m^a u du_a + q0 u^2, with

    q^{ab} xi_a xi_b = 1/2 {p, X^a xi_a} + (q - div(X)/2) p,
    q0 = (div(m) - Box q) / 2.

Default radial profile
----------------------
With a constant b, Box q is positive just outside the photon sphere,
so q0 fails to be positive near 3M. The default b instead solves

    (1/(2 r^2)) (1 - 2M/r) d_r( r^2 (r - 3M) b / (r - 2M) )
        = (r^2 - 3 M r + 4 M^2) / r^3,

for which the Laplacian of that first part of q is
-8 M (r - 3M)^2 / r^6 (non-positive, with a double zero at 3M that the
delta1 term lifts). Explicitly

    b(r) = (r - 2M) / r^2 * (r + M + 4 M log(1 + x) / x),  x = (r - 3M)/M,

which is positive, bounded, tends to 1 at infinity and vanishes like
(r - 2M) log(r - 2M) at the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .geometry import (KerrParams, MetricComponents, Chart, metric_bl,
                       inverse_bl_components, T, R, TH, PH)


# ======================================================================
# Radial profiles
# ======================================================================

def _log1p_ratio(x):
    # log(1 + x) / x and its derivative; complex safe
    x = np.asarray(x)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 0.0, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.log1p(xs) / np.where(small, 1.0, xs)
        dL = (xs / (1.0 + xs) - np.log1p(xs)) / np.where(small, 1.0, xs * xs)
    Ls = 1.0 - x / 2 + x * x / 3 - x ** 3 / 4 + x ** 4 / 5 - x ** 5 / 6
    dLs = -0.5 + 2 * x / 3 - 3 * x * x / 4 + 4 * x ** 3 / 5 - 5 * x ** 4 / 6
    return np.where(small, Ls, L), np.where(small, dLs, dL)


def trapping_b(r, M: float = 1.0):
    """Default b(r) and b'(r); defined for r > 2M. Complex safe."""
    r = np.asarray(r)
    x = (r - 3.0 * M) / M
    L, dL = _log1p_ratio(x)
    u = (r - 2.0 * M) / r ** 2
    du = (4.0 * M - r) / r ** 3
    v = r + M + 4.0 * M * L
    dv = 1.0 + 4.0 * dL
    return u * v, du * v + u * dv


def _smoothstep5(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)


def _smoothstep5_d(x):
    inside = (x > 0.0) & (x < 1.0)
    xc = np.clip(x, 0.0, 1.0)
    return np.where(inside, 30.0 * xc * xc * (1.0 - xc) ** 2, 0.0)


def _smoothstep5_dd(x):
    inside = (x > 0.0) & (x < 1.0)
    xc = np.clip(x, 0.0, 1.0)
    return np.where(inside, 60.0 * xc * (1.0 - xc) * (1.0 - 2.0 * xc), 0.0)


def far_field_f(r, R1: float, delta: float, amp: float = 1.0):
    """f = amp (1 - (R1/r)^delta) S((r - R1)/R1) with S a quintic smoothstep.

    Returns ``(f, f', f'')``; all vanish for ``r <= R1``.
    """
    r = np.asarray(r, dtype=float)
    rr = np.maximum(r, R1)
    g = 1.0 - (R1 / rr) ** delta
    dg = delta * R1 ** delta * rr ** (-delta - 1.0)
    ddg = -delta * (delta + 1.0) * R1 ** delta * rr ** (-delta - 2.0)
    x = (r - R1) / R1
    S, dS, ddS = _smoothstep5(x), _smoothstep5_d(x) / R1, _smoothstep5_dd(x) / R1 ** 2
    on = r > R1
    f = np.where(on, g * S, 0.0)
    df = np.where(on, dg * S + g * dS, 0.0)
    ddf = np.where(on, ddg * S + 2.0 * dg * dS + g * ddS, 0.0)
    return amp * f, amp * df, amp * ddf


def _exp_bump(r, lo, hi):
    # smooth bump supported on (lo, hi) with unit maximum, and derivatives
    r = np.asarray(r, dtype=float)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x = (r - mid) / half
    inside = np.abs(x) < 1.0
    xs = np.where(inside, x, 0.0)
    den = 1.0 - xs * xs
    val = np.where(inside, np.exp(1.0 - 1.0 / den), 0.0)
    d1 = -2.0 * xs / den ** 2
    d2 = (-2.0 * den ** 2 - 8.0 * xs * xs * den) / den ** 4
    dval = np.where(inside, val * d1 / half, 0.0)
    ddval = np.where(inside, val * (d1 * d1 + d2) / half ** 2, 0.0)
    return val, dval, ddval


# ======================================================================
# Multiplier specification
# ======================================================================

@dataclass
class MultiplierSpec:
    """Radial data of the multiplier (X, q, m) on Schwarzschild.

    Every profile callable returns a tuple of the value and its first
    (and for q, f, m also second) radial derivatives.
    """

    M: float
    b: Callable
    c: Callable
    f: Callable
    m: Callable
    delta: float = 0.05
    delta1: float = 0.01
    R1: float = 20.0
    bigC: float = 10.0
    q_closed: Callable | None = None
    c_amp: float = 0.0
    m_amp: float = 0.0
    f_amp: float = 0.25
    b_name: str = "custom"
    meta: dict = field(default_factory=dict)

    # -- q and its derivatives -------------------------------------
    def q_core(self, r):
        """First term of q, built from b by the product rule."""
        M = self.M
        r = np.asarray(r)
        b, db = self.b(r)
        G = r * r * (r - 3 * M) / (r - 2 * M)
        dG = (3 * r * r - 6 * M * r) / (r - 2 * M) - r * r * (r - 3 * M) / (r - 2 * M) ** 2
        return (1.0 - 2.0 * M / r) * (dG * b + G * db) / (2.0 * r * r)

    def q(self, r):
        """q(r), q'(r), q''(r)."""
        M, d1 = self.M, self.delta1
        r = np.asarray(r, dtype=float)
        f, df, ddf = self.f(r)
        w = (r - 3 * M) ** 2 / r ** 4
        dw = 2 * (r - 3 * M) / r ** 4 - 4 * (r - 3 * M) ** 2 / r ** 5
        ddw = (2 / r ** 4 - 16 * (r - 3 * M) / r ** 5
               + 20 * (r - 3 * M) ** 2 / r ** 6)
        fr = f / r
        dfr = df / r - f / r ** 2
        ddfr = ddf / r - 2 * df / r ** 2 + 2 * f / r ** 3
        if self.q_closed is not None:
            c0, c1, c2 = self.q_closed(r)
        else:
            c0 = self.q_core(r)
            c1, c2 = _fd_derivs(self.q_core, r)
        return (c0 - d1 * w + fr, c1 - d1 * dw + dfr, c2 - d1 * ddw + ddfr)

    def box_q(self, r):
        """Schwarzschild Laplacian of the radial function q.

        ``Box q = h q'' + (2/r) (1 - M/r) q'`` with h = 1 - 2M/r.
        """
        M = self.M
        r = np.asarray(r, dtype=float)
        _, dq, ddq = self.q(r)
        h = 1.0 - 2.0 * M / r
        return h * ddq + 2.0 * (1.0 - M / r) * dq / r

    def X_r(self, r):
        """Radial component of X and its derivative (b-part plus f)."""
        M = self.M
        b, db = self.b(r)
        f, df, _ = self.f(r)
        F = b * (1.0 - 3.0 * M / r)
        dF = db * (1.0 - 3.0 * M / r) + b * 3.0 * M / r ** 2
        return F + f, dF + df

    def q_X(self, r):
        """Half the divergence of X (the c d_t part is divergence free)."""
        Xr, dXr = self.X_r(r)
        return 0.5 * (dXr + 2.0 * Xr / r)

    def q_S(self, r):
        """q - q_X."""
        return self.q(r)[0] - self.q_X(r)

    def q_S_formula(self, r):
        """Closed form -delta1 (r-3M)^2/r^4 - M (r-3M) b / (r^2 (r-2M)).

        Valid where f vanishes.
        """
        M = self.M
        b, _ = self.b(r)
        return (-self.delta1 * (r - 3 * M) ** 2 / r ** 4
                - M * (r - 3 * M) * b / (r * r * (r - 2 * M)))

    def q_tilde_S(self, r):
        """q_S + b (r - 3M) / r^2."""
        M = self.M
        b, _ = self.b(r)
        return (-self.delta1 * (r - 3 * M) ** 2 / r ** 4
                + (r - 3 * M) ** 2 * b / (r * r * (r - 2 * M)))

    def to_dict(self) -> dict:
        return {"M": self.M, "b": self.b_name, "delta": self.delta,
                "delta1": self.delta1, "R1": self.R1, "bigC": self.bigC,
                "c_amp": self.c_amp, "m_amp": self.m_amp, "f_amp": self.f_amp}


def _fd_derivs(fun, r, rel=1e-3):
    # first and second derivatives by Richardson-extrapolated differences
    r = np.asarray(r, dtype=float)
    h = rel * np.maximum(np.abs(r), 1.0)

    def d1(hh):
        return (fun(r + hh) - fun(r - hh)) / (2 * hh)

    def d2(hh):
        return (fun(r + hh) - 2 * fun(r) + fun(r - hh)) / (hh * hh)

    D1 = [d1(h), d1(h / 2), d1(h / 4)]
    D2 = [d2(h), d2(h / 2), d2(h / 4)]

    def rich(D):
        a = (4 * D[1] - D[0]) / 3
        b = (4 * D[2] - D[1]) / 3
        return (16 * b - a) / 15

    return rich(D1), rich(D2)


def _zero_profile(r):
    z = np.zeros_like(np.asarray(r, dtype=float))
    return z, z, z


def _default_q_closed(M):
    def qc(r):
        r = np.asarray(r, dtype=float)
        q = (r * r - 3 * M * r + 4 * M * M) / r ** 3
        dq = -1.0 / r ** 2 + 6 * M / r ** 3 - 12 * M * M / r ** 4
        ddq = 2.0 / r ** 3 - 18 * M / r ** 4 + 48 * M * M / r ** 5
        return q, dq, ddq
    return qc


def build_multiplier(M: float = 1.0, delta: float = 0.05, delta1: float = 0.01,
                     R1: float = 20.0, bigC: float = 10.0, b: Callable | None = None,
                     c_amp: float = 0.0, m_amp: float = 0.0, f_amp: float = 0.25,
                     r_e: float | None = None, b_name: str | None = None) -> MultiplierSpec:
    """Assemble a multiplier from its constants and a b profile.

    Parameters
    ----------
    b : callable, optional
        ``r -> (b, b')``. Defaults to :func:`trapping_b`.
    c_amp, m_amp : float
        Amplitudes of the near-horizon bumps; c lives on [r_e, 2.4M]
        and m_r on [r_e, 2.5M].
    f_amp : float
        Amplitude of the far-field term. At full strength the cutoff
        region of f makes Box q positive near 1.4 R1.
    """
    if r_e is None:
        r_e = 1.8 * M
    closed = None
    if b is None:
        b = lambda r: trapping_b(r, M)  # noqa: E731
        closed = _default_q_closed(M)
        b_name = b_name or "trapping"
    c_lo, c_hi = r_e, 2.4 * M
    m_lo, m_hi = r_e, 2.5 * M

    def c(r):
        v, dv, ddv = _exp_bump(r, c_lo, c_hi)
        return c_amp * v, c_amp * dv, c_amp * ddv

    def m(r):
        v, dv, ddv = _exp_bump(r, m_lo, m_hi)
        return m_amp * v, m_amp * dv, m_amp * ddv

    def f(r):
        return far_field_f(r, R1, delta, f_amp)

    return MultiplierSpec(M=M, b=b, c=c, f=f, m=m, delta=delta, delta1=delta1,
                          R1=R1, bigC=bigC, q_closed=closed, c_amp=c_amp,
                          m_amp=m_amp, f_amp=f_amp, b_name=b_name or "custom")


def constant_b(value: float = 1.0):
    """Profile b = value."""
    def b(r):
        r = np.asarray(r)
        return value + 0.0 * r, 0.0 * r
    return b


# ======================================================================
# Sum-of-squares data
# ======================================================================

def alpha_S2(spec: MultiplierSpec, r):
    """r b (r - 3M)^2 / (r - 2M)^2."""
    M = spec.M
    b, _ = spec.b(r)
    return r * b * (r - 3 * M) ** 2 / (r - 2 * M) ** 2


def beta_S2(spec: MultiplierSpec, r):
    """3M b (r^2 - 2Mr)/r^2 + (1 - 3M/r)(b' (r^2 - 2Mr) - b (r - M))."""
    M = spec.M
    b, db = spec.b(r)
    return (3 * M * b * (r * r - 2 * M * r) / r ** 2
            + (1 - 3 * M / r) * (db * (r * r - 2 * M * r) - b * (r - M)))


def nu_profile(spec: MultiplierSpec, r):
    """nu from (1 - nu) alpha_S^2 = delta1 (r - 3M)^2 / r^4.

    After cancelling (r - 3M)^2 this is
    ``1 - delta1 (r - 2M)^2 / (r^5 b)``.

    Raises
    ------
    ValueError
        If nu leaves (0, 1).
    """
    M = spec.M
    r = np.asarray(r, dtype=float)
    b, _ = spec.b(r)
    nu = 1.0 - spec.delta1 * (r - 2 * M) ** 2 / (r ** 5 * b)
    if np.any((nu <= 0) | (nu >= 1)):
        raise ValueError("nu out of (0, 1): delta1 too large for this b")
    return nu if nu.ndim else float(nu)


def nu_regrouping(spec: MultiplierSpec, r):
    """nu for which the two Schwarzschild decompositions agree.

    Matching the tau^2 coefficients of ``alpha_S^2 tau^2 + beta_S^2 xi_r^2
    + q~_S r^2 p_S`` and of the nu-weighted sum of squares requires
    ``(1 - nu) alpha_S^2 = delta1 (r - 3M)^2 / (r (r - 2M))``, i.e.
    ``nu = 1 - delta1 (r - 2M) / (r^2 b)``.
    """
    M = spec.M
    r = np.asarray(r)
    b, _ = spec.b(r)
    nu = 1.0 - spec.delta1 * (r - 2 * M) / (r * r * b)
    return nu


def lambda_split(r, theta, phi, xi_r, Theta, Phi):
    """Angular momentum components x_i xi_j - x_j xi_i.

    The Cartesian covector is the pullback of (xi_r, Theta, Phi) under
    the spherical-coordinate map. Returns an array of three components
    whose squares sum to ``Theta^2 + Phi^2 / sin^2(theta)``.
    """
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    x = r * np.array([st * cp, st * sp, ct])
    # gradients of r, theta, phi as Cartesian covectors
    dr = np.array([st * cp, st * sp, ct])
    dth = np.array([ct * cp, ct * sp, -st]) / r
    dph = np.array([-sp, cp, 0.0]) / (r * st)
    xi = xi_r * dr + Theta * dth + Phi * dph
    return np.array([x[1] * xi[2] - x[2] * xi[1],
                     x[2] * xi[0] - x[0] * xi[2],
                     x[0] * xi[1] - x[1] * xi[0]])


def schwarzschild_symbols(spec: MultiplierSpec):
    """Callables (r^2 p_S, b (1 - 3M/r) xi_r) in the bracket signature."""
    M = spec.M

    def r2p(r, theta, xi_r, Theta, Phi, tau):
        h = 1.0 - 2.0 * M / r
        lam2 = Theta ** 2 + Phi ** 2 / np.sin(theta) ** 2
        return r * r * (-tau * tau / h + h * xi_r ** 2) + lam2

    def sX(r, theta, xi_r, Theta, Phi, tau):
        b, _ = spec.b(r)
        return b * (1.0 - 3.0 * M / r) * xi_r

    return r2p, sX


def schwarzschild_sos_check(spec: MultiplierSpec, point, phi: float = 0.3,
                            cfg=None) -> dict:
    """Residuals of the Schwarzschild bracket and sum-of-squares identities.

    Parameters
    ----------
    point : SymbolPoint
        Must carry tau.

    Returns
    -------
    dict
        ``bracket``: relative residual of
        ``1/2 {r^2 p_S, b(1-3M/r) xi_r} = alpha_S^2 tau^2 + beta_S^2 xi_r^2``;
        ``sos``: relative residual of the lambda-split sum of squares
        against ``r^2 q^S`` (nu from :func:`nu_regrouping`);
        ``regroup``: sum-of-squares form against the alpha-beta form;
        ``lambda_split``: error of the rotation identity.
    """
    from .microlocal import poisson_bracket, BracketConfig
    cfg = cfg or BracketConfig()
    M = spec.M
    r, th = point.r, point.theta
    xi, Th, Ph, tau = point.xi_r, point.Theta, point.Phi, point.tau
    r2p, sX = schwarzschild_symbols(spec)
    lhs = 0.5 * poisson_bracket(r2p, sX, point, cfg)
    aS2, bS2 = alpha_S2(spec, r), beta_S2(spec, r)
    rhs = aS2 * tau * tau + bS2 * xi * xi
    scale = abs(aS2) * tau * tau + abs(bS2) * xi * xi + abs(lhs)
    scale = scale if scale > 0 else 1.0
    r2pS = r2p(r, th, xi, Th, Ph, tau)
    full = lhs + spec.q_tilde_S(r) * r2pS
    lam = lambda_split(r, th, phi, xi, Th, Ph)
    nu = nu_regrouping(spec, r)
    sos = ((1 - nu) * aS2 * tau * tau + bS2 * xi * xi
           + (r - 2 * M) / r ** 3 * nu * aS2 * (float(lam @ lam) + (r * r - 2 * r * M) * xi * xi))
    ab_form = rhs + spec.q_tilde_S(r) * r2pS
    lam2 = Th ** 2 + Ph ** 2 / math.sin(th) ** 2
    fscale = scale + abs(spec.q_tilde_S(r) * r2pS) + abs(sos)
    # the cross products cancel the radial part, so its size sets the roundoff
    lscale = lam2 + (r * xi) ** 2
    return {
        "bracket": abs(lhs - rhs) / scale,
        "sos": abs(full - sos) / fscale,
        "regroup": abs(ab_form - sos) / fscale,
        "lambda_split": abs(float(lam @ lam) - lam2) / (lscale if lscale > 0 else 1.0),
    }


# ======================================================================
# Bulk quadratic form
# ======================================================================

@dataclass
class QuadraticFormValue:
    """Coefficients of Q = coeff^{ab} du_a du_b + cross^a u du_a + zeroth u^2."""

    coeff: np.ndarray
    zeroth: float
    cross: np.ndarray
    point: tuple


def _schwarzschild_inverse_and_derivative(M, r, theta):
    h = 1.0 - 2.0 * M / r
    dh = 2.0 * M / r ** 2
    s2 = math.sin(theta) ** 2
    g = np.zeros((4, 4))
    dg = np.zeros((4, 4))
    g[T, T], dg[T, T] = -1.0 / h, dh / h ** 2
    g[R, R], dg[R, R] = h, dh
    g[TH, TH], dg[TH, TH] = 1.0 / r ** 2, -2.0 / r ** 3
    g[PH, PH], dg[PH, PH] = 1.0 / (r * r * s2), -2.0 / (r ** 3 * s2)
    return g, dg


@dataclass
class RadialForm:
    """Mode-level coefficients of Q on Schwarzschild, as arrays over r.

    For ``u = u_l(t, r) Y_lm`` integrated over the sphere,
    ``Q = tt u_t^2 + 2 tr u_t u_r + rr u_r^2 + ang l(l+1) u^2
    + cross u u_r + zeroth u^2``.
    """

    r: np.ndarray
    tt: np.ndarray
    tr: np.ndarray
    rr: np.ndarray
    ang: np.ndarray
    cross: np.ndarray
    zeroth: np.ndarray


def form_coefficients(spec: MultiplierSpec, r) -> RadialForm:
    """Coefficients of Q[g_S, C d_t + X, q, m] in Boyer-Lindquist form.

    The principal part is ``1/2 Pi + (q - div(X)/2) g^{-1}`` with
    ``Pi^{ab} = g^{ra} X'^b + g^{rb} X'^a - X^r d_r g^{ab}`` (the symbol
    {p, X^a xi_a}). ``C d_t`` is Killing and drops out.
    """
    M = spec.M
    r = np.asarray(r, dtype=float)
    h = 1.0 - 2.0 * M / r
    dh = 2.0 * M / r ** 2
    Xr, dXr = spec.X_r(r)
    _, dc, _ = spec.c(r)
    q, _, _ = spec.q(r)
    lam = q - 0.5 * (dXr + 2.0 * Xr / r)
    tt = -0.5 * Xr * dh / h ** 2 - lam / h
    tr = 0.5 * h * dc
    rr = h * dXr - 0.5 * Xr * dh + lam * h
    ang = Xr / r ** 3 + lam / r ** 2
    m_r, dm_r, _ = spec.m(r)
    cross = h * m_r
    div_m = ((2.0 * r * h + 2.0 * M) * m_r + r * r * h * dm_r) / (r * r)
    zeroth = 0.5 * (div_m - spec.box_q(r))
    return RadialForm(r, tt, tr, rr, ang, cross, zeroth)


def quadratic_form(spec: MultiplierSpec, metric: MetricComponents | None,
                   r: float, theta: float = math.pi / 2,
                   include_C: bool = True) -> QuadraticFormValue:
    """Bulk form Q[g_S, C d_t + X, q, m] at one point as a 4x4 matrix.

    Parameters
    ----------
    metric : MetricComponents or None
        If given, must be the Boyer-Lindquist Schwarzschild metric at
        (r, theta); it is checked against the closed form.
    """
    M = spec.M
    g, _ = _schwarzschild_inverse_and_derivative(M, r, theta)
    if metric is not None:
        if metric.chart is not Chart.BoyerLindquist:
            raise ValueError("quadratic_form expects a Boyer-Lindquist metric")
        if np.max(np.abs(metric.con - g)) > 1e-10 * np.max(np.abs(g)):
            raise ValueError("metric does not match Schwarzschild at this point")
    fc = form_coefficients(spec, r)
    coeff = np.zeros((4, 4))
    coeff[T, T] = float(fc.tt)
    coeff[T, R] = coeff[R, T] = float(fc.tr)
    coeff[R, R] = float(fc.rr)
    coeff[TH, TH] = float(fc.ang)
    coeff[PH, PH] = float(fc.ang) / math.sin(theta) ** 2
    cross = np.zeros(4)
    cross[R] = float(fc.cross)
    return QuadraticFormValue(coeff, float(fc.zeroth), cross, (r, theta))


def _weights(spec, r):
    M, d = spec.M, spec.delta
    deg = (1.0 - 3.0 * M / r) ** 2 * r ** (-1.0 - d)
    return np.array([deg, r ** (-1.0 - d), deg / r ** 2, deg / r ** 2, r ** (-3.0 - d)])


def audit_point(spec: MultiplierSpec, r: float) -> dict:
    """Weighted Rayleigh minimum of Q at one radius (equatorial frame).

    The form in the variables (du_t, du_r, du_theta, du_phi, u) is
    compared with ``r^{-1-d} du_r^2 + (1-3M/r)^2 r^{-1-d}(du_t^2 +
    |angular du|^2) + r^{-3-d} u^2`` by a generalized eigenvalue
    problem. At exactly r = 3M the degenerate weights vanish; the
    point is nudged by 1e-9 M.
    """
    M = spec.M
    if abs(r - 3.0 * M) < 1e-9 * M:
        r = 3.0 * M + 1e-9 * M
    Qv = quadratic_form(spec, None, r, math.pi / 2)
    A = np.zeros((5, 5))
    A[:4, :4] = Qv.coeff
    A[:4, 4] = A[4, :4] = 0.5 * Qv.cross
    A[4, 4] = Qv.zeroth
    w = _weights(spec, r)
    s = 1.0 / np.sqrt(w)
    B = A * np.outer(s, s)
    ev, vec = np.linalg.eigh(0.5 * (B + B.T))
    k = int(np.argmin(ev))
    xi = vec[:, k] * s
    xi = xi / np.linalg.norm(xi)
    pev = np.linalg.eigvalsh(B[:4, :4])
    return {"r": float(r), "margin": float(ev[k]), "principal_margin": float(pev[0]),
            "zeroth": float(Qv.zeroth), "argmin_xi": xi.tolist()}


def positivity_audit(spec: MultiplierSpec, r_grid, tol: float = 0.0) -> dict:
    """Minimum weighted margin of Q over a radial grid.

    Returns a report with the minimum margin, its radius and direction,
    the minimum of -Box q, and ``pass = min margin > tol``.
    """
    rows = [audit_point(spec, float(r)) for r in r_grid]
    margins = np.array([row["margin"] for row in rows])
    k = int(np.argmin(margins))
    rg = np.asarray(r_grid, dtype=float)
    boxq = spec.box_q(rg)
    return {
        "spec": spec.to_dict(),
        "grid": {"r_min": float(rg.min()), "r_max": float(rg.max()), "n": int(len(rg))},
        "min_margin": float(margins[k]),
        "argmin_r": rows[k]["r"],
        "argmin_xi": rows[k]["argmin_xi"],
        "min_principal_margin": float(min(row["principal_margin"] for row in rows)),
        "max_box_q": float(np.max(boxq)),
        "min_zeroth": float(min(row["zeroth"] for row in rows)),
        "pass": bool(margins[k] > tol and np.max(boxq) < 0.0),
        "margins": margins,
    }


def default_multiplier(M: float = 1.0, delta: float = 0.05, delta1: float = 0.01,
                       R1: float = 20.0, bigC: float = 10.0,
                       r_e: float | None = None, tune: bool = True) -> MultiplierSpec:
    """Default audited multiplier.

    The near-horizon amplitudes of c and m are tuned by the audit: the
    largest candidate from a decreasing list that keeps the margin
    positive on the default grid is kept.

    Raises
    ------
    ValueError
        If even the untuned spec fails the audit; the message names the
        violating radius.
    """
    grid = np.geomspace(2.2 * M, 100.0 * M, 400)
    base = build_multiplier(M, delta, delta1, R1, bigC, r_e=r_e)
    rep = positivity_audit(base, grid)
    if not rep["pass"]:
        raise ValueError(f"default multiplier audit fails at r={rep['argmin_r']}")
    if not tune:
        return base
    for amp in (0.03, 0.01, 0.003, 0.001):
        cand = build_multiplier(M, delta, delta1, R1, bigC, c_amp=amp, m_amp=amp, r_e=r_e)
        if positivity_audit(cand, grid)["pass"]:
            return cand
    return base
