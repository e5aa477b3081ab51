"""
Symbol algebra on Kerr: factorization of p_K in tau, the trapped-set
symbols rho~_i, the explicit multiplier symbol s~_K, Poisson brackets
and the sum-of-squares certificate of the Kerr bracket.

Symbols are plain callables ``f(r, theta, xi_r, Theta, Phi, tau)``.
The built-in ones accept complex arguments so that the "analytic"
bracket scheme can use complex-step differentiation, which has no
subtractive cancellation.

Bracket convention: ``{f, g} = sum_x (d_xi f d_x g - d_x f d_xi g)``
over the pairs (r, xi_r) and (theta, Theta), so that ``{xi_r, r} = 1``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import KerrParams, ChartError, inverse_bl_components
from .geodesic import TrappingError, trapped_radius, _trapping_coeffs


class NonHyperbolicPoint(ValueError):
    """p_K has no two distinct real roots in tau at this point."""


class BracketError(RuntimeError):
    """Derivative evaluation failed (non-finite values near a singularity)."""


# ======================================================================
# Types
# ======================================================================

@dataclass(frozen=True)
class SymbolPoint:
    r: float
    theta: float
    xi_r: float
    Theta: float
    Phi: float
    tau: float | None = None

    def with_tau(self, tau: float) -> "SymbolPoint":
        return SymbolPoint(self.r, self.theta, self.xi_r, self.Theta, self.Phi, tau)

    def scaled(self, lam: float) -> "SymbolPoint":
        tau = None if self.tau is None else lam * self.tau
        return SymbolPoint(self.r, self.theta, lam * self.xi_r, lam * self.Theta,
                           lam * self.Phi, tau)

    def args(self):
        return (self.r, self.theta, self.xi_r, self.Theta, self.Phi,
                0.0 if self.tau is None else self.tau)


class Scheme(enum.Enum):
    analytic = "analytic"
    central_fd = "central_fd"


@dataclass(frozen=True)
class BracketConfig:
    """Derivative scheme for Poisson brackets.

    ``analytic`` is complex-step differentiation (requires complex-safe
    symbols); ``central_fd`` uses central differences with step
    ``fd_step_rel * max(1, |x|)``, optionally Richardson-extrapolated to
    sixth order.
    """

    scheme: Scheme = Scheme.analytic
    fd_step_rel: float = 1e-5
    richardson: bool = True

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (1e-9 < self.fd_step_rel < 1e-2):
            raise ValueError("fd_step_rel must lie in (1e-9, 1e-2)")


@dataclass
class SosReport:
    point: SymbolPoint
    lhs: float
    mu_squares: np.ndarray
    divisibility_residuals: tuple
    e_K_recovered: float
    margin: float
    e_K_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(2))
    e_K_at_roots: tuple = (0.0, 0.0)
    tau_roots: tuple = (0.0, 0.0)
    varrho: tuple = (0.0, 0.0)
    q_S: float = 0.0
    vanishing_ratio: float = 0.0
    s_tilde_ratio: float = 0.0
    probe_residual: float = 0.0


# ======================================================================
# Complex-safe building blocks
# ======================================================================

def _re(x):
    return float(np.real(x))


def _sin(theta):
    return np.sin(theta)


def _tau_roots_raw(params, r, theta, xi_r, Theta, Phi):
    gtt, gtp, grr, gthth, gpp = inverse_bl_components(params, r, theta)
    B = gtp * Phi
    Cc = gpp * Phi * Phi + grr * xi_r * xi_r + gthth * Theta * Theta
    disc = B * B - gtt * Cc
    if _re(disc) <= 0.0:
        raise NonHyperbolicPoint(f"discriminant {_re(disc)} <= 0 at r={_re(r)}")
    sq = np.sqrt(disc)
    # stable quadratic formula; branch by the real part
    sgn = 1.0 if _re(B) >= 0.0 else -1.0
    qq = -(B + sgn * sq)
    t_a = qq / gtt
    t_b = Cc / qq if _re(qq) != 0.0 else -t_a
    if _re(t_a) >= _re(t_b):
        return t_a, t_b, gtt
    return t_b, t_a, gtt


@functools.lru_cache(maxsize=4096)
def _real_trapped_root(params, w):
    return trapped_radius(params, 1.0, w)[0]


def _trapped_radius_any(params, w):
    """r_a(w) for real or complex w (complex Newton polish of the real root)."""
    if params.a == 0.0:
        return 3.0 * params.M + 0.0 * w
    if not np.iscomplexobj(w):
        return _real_trapped_root(params, float(w))
    r0 = _real_trapped_root(params, float(np.real(w)))
    coeffs = _trapping_coeffs(params, w)
    dcoeffs = np.polyder(coeffs)
    x = complex(r0)
    for _ in range(4):
        x = x - np.polyval(coeffs, x) / np.polyval(dcoeffs, x)
    return x


def _deflated_at(params, w, ra, r):
    # R_a / (tau^2 (r - r_a)) at r, evaluated by synthetic division
    if params.a == 0.0:
        coeffs = np.array([1.0, -3.0 * params.M, 0.0, 0.0, 0.0, 0.0])
    else:
        coeffs = _trapping_coeffs(params, w)
    q, _ = np.polydiv(coeffs, np.array([1.0, -ra]))
    return np.polyval(q, r)


def _b_and_db(b_profile, r):
    """Evaluate a b profile: callable returning b or (b, b'); MultiplierSpec ok."""
    fun = getattr(b_profile, "b", b_profile)
    out = fun(r)
    if isinstance(out, tuple):
        return out[0], out[1]
    h = 1e-20
    if np.iscomplexobj(r):
        # derivative of a scalar-only profile along a complex direction
        db = (np.asarray(fun(np.real(r) + 1j * h))).imag / h
        return out, db
    db = np.asarray(fun(r + 1j * h)).imag / h
    return out, db


def _b_only(b_profile, r):
    fun = getattr(b_profile, "b", b_profile)
    out = fun(r)
    return out[0] if isinstance(out, tuple) else out


# ======================================================================
# Symbols
# ======================================================================

def pK_symbol(params: KerrParams) -> Callable:
    """p_K as a symbol callable."""
    def f(r, theta, xi_r, Theta, Phi, tau):
        gtt, gtp, grr, gthth, gpp = inverse_bl_components(params, r, theta)
        return (gtt * tau * tau + 2.0 * gtp * tau * Phi + gpp * Phi * Phi
                + grr * xi_r * xi_r + gthth * Theta * Theta)
    return f


def rho2_pK_symbol(params: KerrParams) -> Callable:
    """rho^2 p_K = -A^2/Delta + (a tau sin + Phi/sin)^2 + Delta xi_r^2 + Theta^2."""
    M, a = params.M, params.a

    def f(r, theta, xi_r, Theta, Phi, tau):
        dl = r * r - 2.0 * M * r + a * a
        A = (r * r + a * a) * tau + a * Phi
        s = _sin(theta)
        ang = a * tau * s + Phi / s
        return -A * A / dl + ang * ang + dl * xi_r * xi_r + Theta * Theta
    return f


def cone_symbol(params: KerrParams, b_profile, w: float) -> Callable:
    """s = r^{-1} b(r) (r - r_a(w)) xi_r for a frozen ratio w = Phi/tau."""
    ra = _trapped_radius_any(params, w)

    def f(r, theta, xi_r, Theta, Phi, tau):
        return _b_only(b_profile, r) * (r - ra) * xi_r / r
    return f


def s_tilde_K_symbol(params: KerrParams, b_profile) -> Callable:
    """s~_K as a symbol callable (complex safe)."""
    def f(r, theta, xi_r, Theta, Phi, tau):
        t1, t2, _ = _tau_roots_raw(params, r, theta, xi_r, Theta, Phi)
        v1 = r - _trapped_radius_any(params, Phi / t1)
        v2 = r - _trapped_radius_any(params, Phi / t2)
        b = _b_only(b_profile, r)
        return b * xi_r * (v1 * (tau - t2) - v2 * (tau - t1)) / (r * (t1 - t2))
    return f


# ======================================================================
# Operations
# ======================================================================

def tau_roots(params: KerrParams, p: SymbolPoint) -> tuple[float, float]:
    """Roots tau~_1 > tau~_2 of p_K as a quadratic in tau.

    Raises
    ------
    NonHyperbolicPoint
        If the discriminant is not positive.
    ChartError
        Outside the exterior or on the axis.
    """
    if params.delta(p.r) <= 0.0:
        raise ChartError(f"r={p.r} is not outside r_+")
    if p.xi_r == 0.0 and p.Theta == 0.0 and p.Phi == 0.0:
        raise NonHyperbolicPoint("spatial momenta all zero")
    t1, t2, _ = _tau_roots_raw(params, p.r, p.theta, p.xi_r, p.Theta, p.Phi)
    return float(t1), float(t2)


def gtt_factor(params: KerrParams, p: SymbolPoint) -> float:
    return float(inverse_bl_components(params, p.r, p.theta)[0])


def varrho(params: KerrParams, p: SymbolPoint, i: int) -> float:
    """rho~_i = r - r_a(Phi / tau~_i), i in {1, 2}."""
    if i not in (1, 2):
        raise ValueError("index must be 1 or 2")
    t = tau_roots(params, p)[i - 1]
    if t == 0.0:
        raise TrappingError("tau root vanishes")
    return float(p.r - _trapped_radius_any(params, p.Phi / t))


def s_tilde_K(params: KerrParams, b_profile, p: SymbolPoint) -> float:
    """Value of s~_K (its i-free real form) at a point carrying tau."""
    if p.tau is None:
        raise ValueError("s_tilde_K needs tau")
    tau_roots(params, p)  # validity checks
    return float(np.real(s_tilde_K_symbol(params, b_profile)(*p.args())))


_VARS = (0, 1, 2, 3)  # r, theta, xi_r, Theta positions in the argument tuple


def _partial(f, args, k, cfg: BracketConfig):
    x = args[k]
    if cfg.scheme is Scheme.analytic:
        h = 1e-20 * max(1.0, abs(x))
        a = list(args)
        a[k] = x + 1j * h
        val = np.imag(f(*a)) / h
        if not np.isfinite(val):
            raise BracketError(f"non-finite complex-step derivative in slot {k}")
        return float(val)
    h0 = cfg.fd_step_rel * max(1.0, abs(x))

    def cd(h):
        ap, am = list(args), list(args)
        ap[k] = x + h
        am[k] = x - h
        return (np.real(f(*ap)) - np.real(f(*am))) / (2.0 * h)

    if not cfg.richardson:
        val = cd(h0)
    else:
        d1, d2, d3 = cd(h0), cd(h0 / 2), cd(h0 / 4)
        e1 = (4 * d2 - d1) / 3
        e2 = (4 * d3 - d2) / 3
        val = (16 * e2 - e1) / 15
    if not np.isfinite(val):
        raise BracketError(f"non-finite difference quotient in slot {k}")
    return float(val)


def poisson_bracket(f: Callable, g: Callable, p: SymbolPoint,
                    cfg: BracketConfig | None = None) -> float:
    """{f, g} over the (r, xi_r) and (theta, Theta) pairs."""
    cfg = cfg or BracketConfig()
    args = p.args()
    total = 0.0
    for x_slot, xi_slot in ((0, 2), (1, 3)):
        dfx = _partial(f, args, x_slot, cfg)
        dfxi = _partial(f, args, xi_slot, cfg)
        dgx = _partial(g, args, x_slot, cfg)
        dgxi = _partial(g, args, xi_slot, cfg)
        total += dfxi * dgx - dfx * dgxi
    return total


def pbs_coefficients(params: KerrParams, b_profile, r, w):
    """alpha^2 and beta^2 of 1/2 {rho^2 p_K, r^{-1} b (r - r_a(w)) xi_r}.

    The identity is exact for all (tau, xi_r) with ``w = Phi/tau``:
    ``alpha^2 (r - r_a)^2 tau^2 + beta^2 xi_r^2``, where

        alpha^2 = b Rhat_a(r) / (r Delta^2),
        beta^2  = Delta ((b/r)' (r - r_a) + b/r) - (r - M)(b/r)(r - r_a),

    and Rhat_a is the trapping polynomial R_a/tau^2 deflated at r_a.
    """
    M = params.M
    ra = _trapped_radius_any(params, w)
    b, db = _b_and_db(b_profile, r)
    dl = params.delta(r)
    alpha2 = b * _deflated_at(params, w, ra, r) / (r * dl * dl)
    G = b / r
    dG = db / r - b / (r * r)
    beta2 = dl * (dG * (r - ra) + G) - (r - M) * G * (r - ra)
    return alpha2, beta2, ra


def bracket_positivity_audit(params: KerrParams, b_profile,
                             samples: Sequence[SymbolPoint],
                             cfg: BracketConfig | None = None) -> dict:
    """Normalized positivity of 1/2 {rho^2 p_K, s} over samples.

    Each sample must carry an on-shell tau. The margin at a sample is
    ``bracket / ((r - r_a)^2 tau^2 + xi_r^2)``; samples where that
    denominator vanishes (exactly trapped null directions) are counted
    as degenerate and excluded from the minimum.
    """
    cfg = cfg or BracketConfig()
    r2p = rho2_pK_symbol(params)
    margins, odd, ident, viol = [], [], [], []
    degenerate = 0
    worst = None
    for p in samples:
        if p.tau is None:
            raise ValueError("positivity samples need tau")
        w = p.Phi / p.tau
        s = cone_symbol(params, b_profile, w)
        alpha2, beta2, ra = pbs_coefficients(params, b_profile, p.r, w)
        br = 0.5 * poisson_bracket(r2p, s, p, cfg)
        pm = SymbolPoint(p.r, p.theta, -p.xi_r, p.Theta, p.Phi, p.tau)
        br_m = 0.5 * poisson_bracket(r2p, s, pm, cfg)
        rhs = float(alpha2) * (p.r - ra) ** 2 * p.tau ** 2 + float(beta2) * p.xi_r ** 2
        scale = abs(br) + abs(rhs)
        den = (p.r - ra) ** 2 * p.tau ** 2 + p.xi_r ** 2
        odd.append(abs(br - br_m) / scale if scale > 0 else 0.0)
        ident.append(abs(br - rhs) / scale if scale > 0 else abs(br))
        if den <= 1e-28 * (p.tau ** 2 + 1.0):
            degenerate += 1
            continue
        m = br / den
        margins.append(m)
        if worst is None or m < worst[0]:
            worst = (m, p)
        if m <= 0.0:
            viol.append(p)
    min_margin = float(min(margins)) if margins else 0.0
    return {
        "min_margin": min_margin,
        "argmin": worst[1] if worst else None,
        "max_odd_part": float(max(odd)) if odd else 0.0,
        "max_identity_residual": float(max(ident)) if ident else 0.0,
        "n": len(samples),
        "degenerate": degenerate,
        "violations": viol,
        "pass": bool(margins) and min_margin > 0.0 and not viol,
    }


def _tau_derivative_r(params, p: SymbolPoint, i: int) -> float:
    # d tau~_i / dr by implicit differentiation of p_K(tau~_i) = 0
    t = tau_roots(params, p)[i - 1]
    f = pK_symbol(params)
    h = 1e-20
    dp_dr = np.imag(f(p.r + 1j * h, p.theta, p.xi_r, p.Theta, p.Phi, t)) / h
    dp_dt = np.imag(f(p.r, p.theta, p.xi_r, p.Theta, p.Phi, t + 1j * h)) / h
    return float(-dp_dr / dp_dt)


def _tau_derivative_r_fd(params, p: SymbolPoint, i: int, rel: float = 1e-4) -> float:
    h0 = rel * p.r

    def root(r):
        return tau_roots(params, SymbolPoint(r, p.theta, p.xi_r, p.Theta, p.Phi))[i - 1]

    def cd(h):
        return (root(p.r + h) - root(p.r - h)) / (2 * h)

    d = [cd(h0), cd(h0 / 2), cd(h0 / 4)]
    e1, e2 = (4 * d[1] - d[0]) / 3, (4 * d[2] - d[1]) / 3
    return (16 * e2 - e1) / 15


def mt1_check(params: KerrParams, p: SymbolPoint, b_profile=None) -> tuple[float, float]:
    """Residuals of the trapped-set identity for d tau~_i / dr at xi_r = 0.

    Checks ``g^{tt} d_r tau~_i rho^2 b/(2r) = 1/4 rho~_i gamma~_i^2
    (tau~_i - tau~_j)`` for i = 1, 2 with gamma~_i = 2 |tau~_i| /
    (tau~_1 - tau~_2) alpha(r, tau~_i, Phi); b cancels between the two
    sides. The root derivative is computed by implicit differentiation
    and cross-checked against Richardson differences of the root.

    Returns
    -------
    (res1, res2) : relative residuals (absolute where both sides vanish).

    Raises
    ------
    BracketError
        If the two derivative schemes disagree by more than 1e-6
        relative.
    """
    if p.xi_r != 0.0:
        raise ValueError("mt1_check needs xi_r = 0")
    if b_profile is None:
        b_profile = lambda r: 1.0 + 0.0 * r  # noqa: E731
    t1, t2 = tau_roots(params, p)
    roots = (t1, t2)
    gtt = gtt_factor(params, p)
    rho2 = float(params.rho2(p.r, p.theta))
    b = float(np.real(_b_only(b_profile, p.r)))
    out = []
    for i in (1, 2):
        ti, tj = roots[i - 1], roots[2 - i]
        d_imp = _tau_derivative_r(params, p, i)
        d_fd = _tau_derivative_r_fd(params, p, i)
        if abs(d_imp - d_fd) > 1e-6 * max(abs(d_imp), abs(ti) / p.r, 1e-300):
            raise BracketError(f"root-derivative mismatch {d_imp} vs {d_fd}")
        w = p.Phi / ti
        alpha2, _, ra = pbs_coefficients(params, b_profile, p.r, w)
        gamma2 = (2.0 * abs(ti) / (t1 - t2)) ** 2 * float(alpha2)
        lhs = gtt * d_imp * rho2 * b / (2.0 * p.r)
        rhs = 0.25 * (p.r - float(np.real(ra))) * gamma2 * (ti - tj)
        scale = max(abs(lhs), abs(rhs))
        out.append(abs(lhs - rhs) / scale if scale > 1e-14 * ti * ti else abs(lhs - rhs))
    return out[0], out[1]


# ======================================================================
# Sum of squares
# ======================================================================

def _sos_pieces(params, mult, p: SymbolPoint):
    from .multiplier import nu_regrouping, lambda_split
    M, a = params.M, params.a
    r, th, xi = p.r, p.theta, p.xi_r
    t1, t2 = tau_roots(params, p)
    if not (t1 > 0.0 > t2):
        raise NonHyperbolicPoint(f"root signs ({t1}, {t2}) outside the window structure")
    per = []
    for t in (t1, t2):
        w = p.Phi / t
        alpha2, beta2, ra = pbs_coefficients(params, mult, r, w)
        per.append((float(alpha2), float(beta2), float(ra)))
    (a1sq, b1sq, ra1), (a2sq, b2sq, ra2) = per
    v1, v2 = r - ra1, r - ra2
    al1 = 2.0 * abs(t1) / (t1 - t2) * math.sqrt(a1sq) * v1
    al2 = 2.0 * abs(t2) / (t1 - t2) * math.sqrt(a2sq) * v2
    lam = lambda_split(r, th, 0.0, xi, p.Theta, p.Phi)
    nu = float(nu_regrouping(mult, r))
    return {"t1": t1, "t2": t2, "al1": al1, "al2": al2, "b1sq": b1sq,
            "b2sq": b2sq, "v1": v1, "v2": v2, "lam": lam, "nu": nu,
            "horiz": r * r - 2.0 * r * M}


def _mu_squares(pc, xi, tau, Ca):
    t1, t2 = pc["t1"], pc["t2"]
    al1, al2, nu = pc["al1"], pc["al2"], pc["nu"]
    Ep = al1 * (tau - t2) + al2 * (tau - t1)
    Em = al1 * (tau - t2) - al2 * (tau - t1)
    lam2 = pc["lam"] ** 2
    hx = pc["horiz"] * xi * xi
    D = float(lam2.sum()) + hx
    b1, b2 = pc["b1sq"], pc["b2sq"]
    dt2 = (t1 - t2) ** 2
    mu = np.empty(8)
    mu[0] = 0.25 * (1.0 - nu) * Ep * Ep
    mu[1] = 0.5 * (b1 + b2 - Ca) * xi * xi
    mu[2:5] = lam2 / D * 0.25 * nu * Em * Em
    mu[5] = hx / D * 0.25 * nu * Em * Em
    mu[6] = (Ca - b2 + b1) * (tau - t2) ** 2 * xi * xi / (2.0 * dt2)
    mu[7] = (Ca - b1 + b2) * (tau - t1) ** 2 * xi * xi / (2.0 * dt2)
    return mu


def beta_split_constant(params: KerrParams, mult, grid: Sequence[SymbolPoint]) -> float:
    """C a = 2 sup |beta_1^2 - beta_2^2| over the grid (C a, not C)."""
    sup = 0.0
    for p in grid:
        pc = _sos_pieces(params, mult, p)
        sup = max(sup, abs(pc["b1sq"] - pc["b2sq"]))
    return 2.0 * sup


def sos_certify(params: KerrParams, mult, grid: Sequence[SymbolPoint],
                cfg: BracketConfig | None = None, tol: float = 1e-9,
                Ca: float | None = None) -> list[SosReport]:
    """Sum-of-squares certificate of the Kerr bracket at each grid point.

    For each spatial point, ``N(tau) = sum_j mu_j^2(tau) - rho^2/2
    {p_K, s~_K}(tau)`` is sampled at four Chebyshev nodes in
    ``[2 tau~_2, 2 tau~_1]`` and interpolated (it is cubic in tau).
    Divisibility by ``(tau - tau~_1)(tau - tau~_2)`` is tested by the
    direct values ``N(tau~_i)``, and ``e~_K = N / (rho^2 p_K)`` is
    recovered as a linear polynomial in tau.

    Parameters
    ----------
    mult : MultiplierSpec
        Supplies b and nu.
    Ca : float, optional
        Product C a of the beta-splitting constant; by default
        ``2 sup |beta_1^2 - beta_2^2|`` over the grid.
    """
    cfg = cfg or BracketConfig()
    if Ca is None:
        Ca = beta_split_constant(params, mult, grid)
    pK = pK_symbol(params)
    sK = s_tilde_K_symbol(params, mult)
    reports = []
    for p in grid:
        pc = _sos_pieces(params, mult, p)
        t1, t2 = pc["t1"], pc["t2"]
        rho2 = float(params.rho2(p.r, p.theta))
        gtt = gtt_factor(params, p)

        def N(tau):
            q = p.with_tau(tau)
            br = poisson_bracket(pK, sK, q, cfg)
            mu = _mu_squares(pc, p.xi_r, tau, Ca)
            return float(mu.sum()) - 0.5 * rho2 * br, mu, br

        k = np.arange(4)
        nodes = 0.5 * (2 * t1 + 2 * t2) + 0.5 * (2 * t1 - 2 * t2) * np.cos((2 * k + 1) * np.pi / 8)
        vals = np.array([N(t)[0] for t in nodes])
        cubic = np.polyfit(nodes, vals, 3)
        quad = gtt * rho2 * np.array([1.0, -(t1 + t2), t1 * t2])
        e_lin, rem = np.polydiv(cubic, quad)
        n1, mu1, br1 = N(t1)
        n2, mu2, br2 = N(t2)
        sc1 = float(np.abs(mu1).sum()) + abs(0.5 * rho2 * br1) + 1e-300
        sc2 = float(np.abs(mu2).sum()) + abs(0.5 * rho2 * br2) + 1e-300
        # an extra probe checks the interpolant against a direct evaluation
        tp = t2 + 0.61803 * (t1 - t2)
        npv, mup, brp = N(tp)
        scp = float(np.abs(mup).sum()) + abs(0.5 * rho2 * brp) + 1e-300
        probe = abs(np.polyval(cubic, tp) - npv) / scp
        eK1, eK2 = float(np.polyval(e_lin, t1)), float(np.polyval(e_lin, t2))
        vsum = abs(pc["v1"]) + abs(pc["v2"]) + abs(p.xi_r)
        sval = float(np.real(sK(*p.with_tau(tp).args())))
        sden = (abs(pc["v1"] * (tp - t2)) + abs(pc["v2"] * (tp - t1)) + abs(p.xi_r)
                * abs(t1 - t2))
        scale_mu = max(sc1, sc2)
        reports.append(SosReport(
            point=p, lhs=0.5 * rho2 * br1, mu_squares=mu1,
            divisibility_residuals=(abs(n1) / sc1, abs(n2) / sc2),
            e_K_recovered=eK1, margin=float(min(mu1.min(), mu2.min()) / scale_mu),
            e_K_coeffs=np.atleast_1d(e_lin), e_K_at_roots=(eK1, eK2),
            tau_roots=(t1, t2), varrho=(pc["v1"], pc["v2"]),
            q_S=float(mult.q_S(p.r)),
            vanishing_ratio=max(abs(eK1), abs(eK2)) / vsum if vsum > 0 else 0.0,
            s_tilde_ratio=abs(sval) / sden if sden > 0 else 0.0,
            probe_residual=float(probe)))
    return reports


def sos_summary(reports: Sequence[SosReport], a: float) -> dict:
    """Worst-case numbers of a certification run."""
    div = max(max(rp.divisibility_residuals) for rp in reports)
    eK_dev = max(max(abs(e - rp.q_S) for e in rp.e_K_at_roots) for rp in reports)
    return {
        "n": len(reports),
        "max_divisibility_residual": float(div),
        "max_probe_residual": float(max(rp.probe_residual for rp in reports)),
        "min_mu_margin": float(min(rp.margin for rp in reports)),
        "max_eK_minus_qS": float(eK_dev),
        "eK_O_a_constant": float(eK_dev / a) if a > 0 else float(eK_dev),
        "vanishing_constant": float(max(rp.vanishing_ratio for rp in reports)),
        "s_tilde_constant": float(max(rp.s_tilde_ratio for rp in reports)),
    }


# ======================================================================
# Sampling
# ======================================================================

def sample_window_points(params: KerrParams, n: int, rng: np.random.Generator,
                         half_width: float = 0.25, theta_margin: float = 0.3,
                         on_shell: int | None = None) -> list[SymbolPoint]:
    """Random points in the photon-sphere window.

    Momenta are normalised so that ``xi_r^2 + (Theta^2 + Phi^2 /
    sin^2 theta) / r^2 = 1``. With ``on_shell`` in {1, 2} the point
    carries tau = tau~_i; with ``on_shell=0`` the root is chosen at
    random.
    """
    M = params.M
    pts = []
    while len(pts) < n:
        r = 3.0 * M + half_width * M * (2.0 * rng.random() - 1.0)
        th = theta_margin + (math.pi - 2 * theta_margin) * rng.random()
        v = rng.standard_normal(3)
        v /= np.linalg.norm(v)
        xi, Th, Ph = v[0], r * v[1], r * math.sin(th) * v[2]
        p = SymbolPoint(float(r), float(th), float(xi), float(Th), float(Ph))
        if on_shell is not None:
            t1, t2 = tau_roots(params, p)
            i = on_shell if on_shell in (1, 2) else int(rng.integers(1, 3))
            p = p.with_tau(t1 if i == 1 else t2)
        pts.append(p)
    return pts
