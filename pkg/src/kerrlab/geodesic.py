"""
Null geodesic flow of the Kerr principal symbol.

The Hamiltonian is p_K = g^{ab} xi_a xi_b in Boyer-Lindquist
coordinates. The flow uses the sign convention

    dx/dlambda = -dp/dxi,    dxi/dlambda = +dp/dx,

so that for instance dr/dlambda = -2 Delta xi_r / rho^2. With this
convention tau > 0 is future directed (dt/dlambda > 0 outside the
ergoregion).

Two identities are used throughout. With A = (r^2 + a^2) tau + a Phi,

    rho^2 p_K = -A^2/Delta + (a tau sin(theta) + Phi/sin(theta))^2
                + Delta xi_r^2 + Theta^2,

and the radial derivative of the first group is -2 R_a / Delta^2 with
R_a = A (2 r tau Delta - A (r - M)), the trapping polynomial.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, astuple

import numpy as np
from scipy.integrate import RK45

from .geometry import KerrParams, ChartError, inverse_bl_components

STATE_NAMES = ("t", "r", "theta", "phi", "tau", "xi_r", "Theta", "Phi")


class TrappingError(ValueError):
    """No trapped radius (or no trapped ray) for the requested input."""


class HorizonApproach(RuntimeError):
    """Integration came within the guard distance of the outer horizon."""


class StepUnderflow(RuntimeError):
    """Adaptive step size fell below the representable limit."""


@dataclass
class PhasePoint:
    """Position (t, r, theta, phi) and covector (tau, xi_r, Theta, Phi)."""

    t: float = 0.0
    r: float = 0.0
    theta: float = math.pi / 2
    phi: float = 0.0
    tau: float = 0.0
    xi_r: float = 0.0
    Theta: float = 0.0
    Phi: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, y) -> "PhasePoint":
        return cls(*[float(v) for v in y])


# ======================================================================
# Hamiltonian and its partials
# ======================================================================

def hamiltonian(params: KerrParams, p: PhasePoint) -> float:
    """p_K at a phase point, by direct contraction of g^{ab}."""
    if params.delta(p.r) <= 0.0:
        raise ChartError(f"r={p.r} is not outside r_+={params.r_plus}")
    if math.sin(p.theta) == 0.0:
        raise ChartError("theta on the axis")
    gtt, gtp, grr, gthth, gpp = inverse_bl_components(params, p.r, p.theta)
    return float(gtt * p.tau ** 2 + 2.0 * gtp * p.tau * p.Phi + gpp * p.Phi ** 2
                 + grr * p.xi_r ** 2 + gthth * p.Theta ** 2)


def trapping_polynomial(params, r, tau, Phi):
    """R_a(r, tau, Phi) in its expanded form."""
    M, a = params.M, params.a
    r = np.asarray(r, dtype=float)
    return ((r * r + a * a) * (r ** 3 - 3 * M * r * r + a * a * r + a * a * M) * tau * tau
            - 2 * a * M * (r * r - a * a) * tau * Phi
            - a * a * (r - M) * Phi * Phi)


def _rho2_p_pieces(params, r, theta, tau, xi_r, Theta, Phi):
    M, a = params.M, params.a
    s, c = math.sin(theta), math.cos(theta)
    dl = float(params.delta(r))
    A = (r * r + a * a) * tau + a * Phi
    ang = a * tau * s + Phi / s
    K = -A * A / dl + ang * ang + dl * xi_r * xi_r + Theta * Theta
    Ra = A * (2.0 * r * tau * dl - A * (r - M))
    dK_dr = -2.0 * Ra / dl ** 2 + 2.0 * (r - M) * xi_r * xi_r
    dK_dth = 2.0 * ang * (a * tau * c - Phi * c / (s * s))
    return K, dK_dr, dK_dth, dl


def hamiltonian_partials(params: KerrParams, p: PhasePoint) -> dict:
    """Closed-form partials of p_K.

    Returns a dict with keys ``r, theta, tau, xi_r, Theta, Phi``; the
    t- and phi-partials vanish identically.
    """
    r, th = p.r, p.theta
    if params.delta(r) <= 0.0:
        raise ChartError(f"r={r} is not outside r_+={params.r_plus}")
    a = params.a
    rho2 = float(params.rho2(r, th))
    K, dK_dr, dK_dth, dl = _rho2_p_pieces(params, r, th, p.tau, p.xi_r, p.Theta, p.Phi)
    drho2_dth = -2.0 * a * a * math.cos(th) * math.sin(th)
    gtt, gtp, grr, gthth, gpp = inverse_bl_components(params, r, th)
    return {
        "r": dK_dr / rho2 - 2.0 * r * K / rho2 ** 2,
        "theta": dK_dth / rho2 - K * drho2_dth / rho2 ** 2,
        "tau": float(2.0 * (gtt * p.tau + gtp * p.Phi)),
        "Phi": float(2.0 * (gtp * p.tau + gpp * p.Phi)),
        "xi_r": float(2.0 * grr * p.xi_r),
        "Theta": float(2.0 * gthth * p.Theta),
    }


def flow_rhs(params: KerrParams, p: PhasePoint) -> np.ndarray:
    """Hamilton vector field, ordered like ``STATE_NAMES``."""
    d = hamiltonian_partials(params, p)
    return np.array([-d["tau"], -d["xi_r"], -d["Theta"], -d["Phi"],
                     0.0, d["r"], d["theta"], 0.0])


def xidot_trapping_form(params: KerrParams, p: PhasePoint) -> float:
    """rho^2 dxi_r/dlambda written through R_a.

    ``-2 R_a / Delta^2 - 2 r p_K + 2 (r - M) xi_r^2``; equal to
    ``rho^2 * flow_rhs(...)[5]``.
    """
    dl = float(params.delta(p.r))
    Ra = float(trapping_polynomial(params, p.r, p.tau, p.Phi))
    return (-2.0 * Ra / dl ** 2 - 2.0 * p.r * hamiltonian(params, p)
            + 2.0 * (p.r - params.M) * p.xi_r ** 2)


# ======================================================================
# Trapped set
# ======================================================================

def _trapping_coeffs(params, w):
    # R_a / tau^2 as a polynomial in r (highest power first), w = Phi/tau
    M, a = params.M, params.a
    a2 = a * a
    quint = np.polymul([1.0, 0.0, a2], [1.0, -3.0 * M, a2, a2 * M])
    cross = np.array([-2.0 * a * M * w, 0.0, 2.0 * a * M * a2 * w])
    lin = np.array([-a2 * w * w, a2 * M * w * w])
    return np.polyadd(np.polyadd(quint, cross), lin)


def _newton_bisect(f, df, lo, hi, tol=1e-15, maxit=200):
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    # sign tests by comparison: products of tiny values underflow to zero
    if (flo < 0.0) == (fhi < 0.0):
        raise TrappingError(f"no sign change of R_a on [{lo}, {hi}]")
    x = 0.5 * (lo + hi)
    for _ in range(maxit):
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx < 0.0) != (flo < 0.0):
            hi = x
        else:
            lo, flo = x, fx
        d = df(x)
        step_ok = False
        if d != 0.0:
            xn = x - fx / d
            if lo <= xn <= hi:
                step_ok = True
        if not step_ok:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def trapped_radius(params: KerrParams, tau: float, Phi: float) -> tuple[float, float]:
    """Root r_a of R_a(., tau, Phi) near 3M and the deflated value.

    Parameters
    ----------
    tau, Phi : float
        Only ``w = Phi / tau`` matters. ``tau`` must be nonzero.

    Returns
    -------
    r_a : float
        Simple root of R_a in ``[2.5M, 3.5M]``.
    Rhat : float
        ``R_a / (tau^2 (r - r_a))`` at ``r = r_a``, which is positive.

    Raises
    ------
    TrappingError
        If tau = 0 or R_a has no sign change on the bracket.
    """
    if tau == 0.0 or not math.isfinite(tau):
        raise TrappingError("trapped radius needs tau != 0")
    M = params.M
    w = Phi / tau
    if params.a == 0.0:
        return 3.0 * M, 81.0 * M ** 4
    coeffs = _trapping_coeffs(params, w)
    dcoeffs = np.polyder(coeffs)
    ra = _newton_bisect(lambda x: np.polyval(coeffs, x),
                        lambda x: np.polyval(dcoeffs, x),
                        2.5 * M, 3.5 * M)
    rhat = float(np.polyval(dcoeffs, ra))
    if rhat <= 0.0:
        raise TrappingError(f"root at r={ra} is not simple-increasing")
    return float(ra), rhat


def deflated_trapping(params: KerrParams, tau: float, Phi: float, r):
    """R_a / (tau^2 (r - r_a)) as a function of r (synthetic division)."""
    ra, _ = trapped_radius(params, tau, Phi)
    w = Phi / tau
    if params.a == 0.0:
        coeffs = np.array([1.0, -3.0 * params.M, 0.0, 0.0, 0.0, 0.0])
    else:
        coeffs = _trapping_coeffs(params, w)
    q, _rem = np.polydiv(coeffs, np.array([1.0, -ra]))
    return np.polyval(q, np.asarray(r, dtype=float))


def trapped_radius_slope(params: KerrParams, w: float) -> float:
    """d r_a / d w with ``w = Phi / tau``, by implicit differentiation."""
    if params.a == 0.0:
        return 0.0
    M, a = params.M, params.a
    ra, _ = trapped_radius(params, 1.0, w)
    coeffs = _trapping_coeffs(params, w)
    dPdr = np.polyval(np.polyder(coeffs), ra)
    dPdw = -2.0 * a * M * (ra * ra - a * a) - 2.0 * a * a * (ra - M) * w
    return float(-dPdw / dPdr)


def trapped_init(params: KerrParams, tau: float, Phi: float, theta0: float) -> PhasePoint:
    """Null phase point on the trapped set through latitude ``theta0``.

    Raises
    ------
    TrappingError
        If no trapped null ray with this (tau, Phi) reaches ``theta0``.
    """
    ra, _ = trapped_radius(params, tau, Phi)
    a = params.a
    s = math.sin(theta0)
    if s == 0.0:
        raise ChartError("theta0 on the axis")
    dl = float(params.delta(ra))
    A = (ra * ra + a * a) * tau + a * Phi
    ang = a * tau * s + Phi / s
    Theta2 = A * A / dl - ang * ang
    scale = A * A / dl + ang * ang
    if Theta2 < -1e-13 * scale:
        raise TrappingError(
            f"Theta^2={Theta2} < 0: no trapped ray through theta0={theta0}")
    return PhasePoint(0.0, ra, theta0, 0.0, tau, 0.0,
                      math.sqrt(max(Theta2, 0.0)), Phi)


def momentum_scale(params, p: PhasePoint) -> float:
    """Magnitude used to normalise p_K residuals.

    Largest absolute term of the quadratic form at the point.
    """
    gtt, gtp, grr, gthth, gpp = inverse_bl_components(params, p.r, p.theta)
    terms = [gtt * p.tau ** 2, 2 * gtp * p.tau * p.Phi, gpp * p.Phi ** 2,
             grr * p.xi_r ** 2, gthth * p.Theta ** 2]
    return float(max(abs(float(x)) for x in terms))


# ======================================================================
# Integration
# ======================================================================

@dataclass
class Trajectory:
    """Accepted steps of a geodesic integration."""

    lam: np.ndarray
    states: np.ndarray
    drift: dict = field(default_factory=dict)

    @property
    def r(self):
        return self.states[:, 1]

    def point(self, i) -> PhasePoint:
        return PhasePoint.from_array(self.states[i])

    def to_csv(self, path, params: KerrParams):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("lambda",) + STATE_NAMES + ("pK",))
            for lam, y in zip(self.lam, self.states):
                pk = hamiltonian(params, PhasePoint.from_array(y))
                w.writerow([f"{v:.17g}" for v in (lam, *y, pk)])


def integrate(params: KerrParams, p0: PhasePoint, lam_max: float, tol: float = 1e-12,
              horizon_guard: float = 1e-3, max_steps: int = 10_000_000) -> Trajectory:
    """Integrate the Hamilton flow with an embedded 5(4) Runge-Kutta pair.

    Parameters
    ----------
    lam_max : float
        Affine parameter span.
    tol : float
        Relative tolerance; the absolute tolerance is ``tol`` times the
        size of the initial state.
    horizon_guard : float
        Stop with ``HorizonApproach`` once ``r <= r_+ + guard * M``.

    Returns
    -------
    Trajectory
        With drift keys ``pK`` (max |p_K|), ``pK_rel`` (normalised by
        the momentum scale), ``tau`` and ``Phi`` (max absolute change).
    """
    y0 = p0.as_array()
    r_stop = params.r_plus + horizon_guard * params.M

    def rhs(_lam, y):
        return flow_rhs(params, PhasePoint.from_array(y))

    atol = tol * max(1.0, float(np.max(np.abs(y0))))
    # scipy floors rtol at 100 eps; atol carries tighter requests
    solver = RK45(rhs, 0.0, y0, lam_max, rtol=max(tol, 2.3e-14), atol=atol)
    lams = [0.0]
    ys = [y0.copy()]
    scale = momentum_scale(params, p0)
    pk0 = hamiltonian(params, p0)
    max_pk = abs(pk0)
    steps = 0
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise StepUnderflow(f"integration failed at lambda={solver.t}: {msg}")
        y = solver.y.copy()
        if y[1] <= r_stop:
            raise HorizonApproach(
                f"r={y[1]:.6g} reached the horizon guard at lambda={solver.t:.6g}")
        lams.append(solver.t)
        ys.append(y)
        max_pk = max(max_pk, abs(hamiltonian(params, PhasePoint.from_array(y))))
        steps += 1
        if steps >= max_steps:
            raise StepUnderflow("maximum number of steps exceeded")
    states = np.array(ys)
    drift = {
        "pK": max_pk,
        "pK_rel": max_pk / scale if scale > 0 else max_pk,
        "tau": float(np.max(np.abs(states[:, 4] - y0[4]))),
        "Phi": float(np.max(np.abs(states[:, 7] - y0[7]))),
        "steps": steps,
    }
    return Trajectory(np.array(lams), states, drift)


def lyapunov_fit(traj: Trajectory, r_a: float, lo: float = 1e-5, hi: float = 1e-2):
    """Exponential growth rate of |r - r_a| in the affine parameter.

    Linear least squares of ``log|r - r_a|`` on lambda over samples with
    ``lo < |r - r_a| < hi``. Returns ``(rate, stderr, n_samples)``.
    """
    dev = np.abs(traj.r - r_a)
    m = (dev > lo) & (dev < hi)
    if np.count_nonzero(m) < 3:
        raise ValueError("too few samples inside the fit window")
    x = traj.lam[m]
    y = np.log(dev[m])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    n = len(x)
    resid = y - A @ coef
    s2 = float(resid @ resid) / max(n - 2, 1)
    cov = s2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(math.sqrt(cov[0, 0])), n
