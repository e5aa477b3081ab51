"""
Mode-decomposed wave evolution on Schwarzschild in the tortoise radius.

Unperturbed runs solve the Regge-Wheeler form

    psi_tt = psi_{r* r*} - V_l(r) psi,      u = psi / r,

with second-order leapfrog. Perturbed runs (radial perturbations of
the (t, r) block of the inverse metric) solve the mode reduction of
d_a(sqrt|g| g^{ab} d_b u) = 0 in flux form with method-of-lines RK4.

Energy and norms are expressed through u:

    E = int (pi^2 + psi_{r*}^2 + V_l psi^2) dr*
      = int (u_t^2 / h + h u_r^2 + l(l+1) u^2 / r^2) r^2 dr,

the Killing energy of the mode (h = 1 - 2M/r; the second line follows
by one integration by parts).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .geometry import KerrParams, HyperbolicityError, tortoise


class CFLError(ValueError):
    pass


class BoundaryContamination(ValueError):
    pass


class NaNDetected(RuntimeError):
    pass


# ======================================================================
# Grid and state
# ======================================================================

def r_of_rstar(rstar, M: float = 1.0):
    """Invert r* = r + 2M log(r - 2M) via the Lambert W function.

    Returns ``(r, h)`` with ``h = 1 - 2M/r`` computed without
    cancellation near the horizon.
    """
    rstar = np.asarray(rstar, dtype=float)
    # x = r/2M - 1 solves x e^x = exp(r*/2M - 1 - log 2M)
    log_arg = rstar / (2.0 * M) - 1.0 - math.log(2.0 * M)
    x = np.empty_like(rstar)
    big = log_arg > 500.0
    # asymptotic branch avoids overflow of exp for very large r*
    la = log_arg[big]
    lnla = np.log(la)
    x[big] = la - lnla + lnla / la
    for _ in range(3):
        xb = x[big]
        x[big] = xb - (xb + np.log(xb) - la) / (1.0 + 1.0 / xb)
    small = ~big
    x[small] = special.lambertw(np.exp(log_arg[small])).real
    r = 2.0 * M * (1.0 + x)
    h = x / (1.0 + x)
    return r, h


@dataclass
class Grid1D:
    rstar_min: float
    rstar_max: float
    n: int
    cfl: float = 0.5
    M: float = 1.0
    rstar: np.ndarray = field(init=False, repr=False)
    r: np.ndarray = field(init=False, repr=False)
    h: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 5 or self.rstar_max <= self.rstar_min:
            raise ValueError("grid needs n >= 5 and rstar_max > rstar_min")
        if not (0.0 < self.cfl <= 1.0):
            raise CFLError(f"cfl={self.cfl} outside (0, 1]")
        self.rstar = np.linspace(self.rstar_min, self.rstar_max, self.n)
        self.r, self.h = r_of_rstar(self.rstar, self.M)

    @property
    def dr(self) -> float:
        return (self.rstar_max - self.rstar_min) / (self.n - 1)

    @property
    def dt(self) -> float:
        return self.cfl * self.dr

    def r_of_rstar(self, rs):
        return r_of_rstar(rs, self.M)[0]

    def index_of(self, rstar: float) -> int:
        return int(round((rstar - self.rstar_min) / self.dr))

    @classmethod
    def from_spacing(cls, rstar_min, rstar_max, dr, cfl=0.5, M=1.0) -> "Grid1D":
        n = int(round((rstar_max - rstar_min) / dr)) + 1
        return cls(rstar_min, rstar_min + (n - 1) * dr, n, cfl, M)

    @classmethod
    def for_run(cls, T, dr, rstar_obs, data_center, data_halfwidth, cfl=0.5, M=1.0,
                margin=20.0) -> "Grid1D":
        """Grid whose ends are causally disconnected from data and observer."""
        lo = min(rstar_obs, data_center - data_halfwidth) - T - margin
        hi = max(rstar_obs, data_center + data_halfwidth) + T + margin
        return cls.from_spacing(lo, hi, dr, cfl, M)


@dataclass
class FieldState:
    l: int
    psi: np.ndarray
    pi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.l < 0:
            raise ValueError("mode index must be >= 0")
        self.psi = np.asarray(self.psi, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        if self.psi.shape != self.pi.shape:
            raise ValueError("psi and pi shapes differ")
        if not (np.all(np.isfinite(self.psi)) and np.all(np.isfinite(self.pi))):
            raise NaNDetected("non-finite initial state")


@dataclass
class DenseSlab:
    """Every time level of psi on a radial index window."""

    t: np.ndarray
    i0: int
    i1: int
    psi: np.ndarray


@dataclass
class FieldHistory:
    energy_series: list = field(default_factory=list)
    le_series: list = field(default_factory=list)
    point_series: list = field(default_factory=list)
    morawetz_residuals: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    state_energy_series: list = field(default_factory=list)
    le_density: dict = field(default_factory=dict)
    dense: DenseSlab | None = None
    final: FieldState | None = None

    def arrays(self, name: str):
        data = np.asarray(getattr(self, name), dtype=float)
        if data.size == 0:
            return np.zeros(0), np.zeros(0)
        return data[:, 0], data[:, 1]


# ======================================================================
# Potential, data, energy
# ======================================================================

def rw_reduction(params: KerrParams, l: int):
    """Regge-Wheeler potential of the scalar l-mode on Schwarzschild.

    Separating ``Box u = 0`` with ``u = psi(t, r) Y_lm / r`` gives
    ``-psi_tt + psi_{r*r*} - V_l psi = 0`` with
    ``V_l = (1 - 2M/r)(l(l+1)/r^2 + 2M/r^3)``.
    """
    if params.a != 0.0:
        raise ValueError("mode reduction is only decoupled for a = 0")
    M = params.M
    L = l * (l + 1)

    def V(r):
        r = np.asarray(r, dtype=float)
        return (1.0 - 2.0 * M / r) * (L / r ** 2 + 2.0 * M / r ** 3)
    return V


def _potential(grid, l):
    M = grid.M
    return grid.h * (l * (l + 1) / grid.r ** 2 + 2.0 * M / grid.r ** 3)


def bump_data(grid: Grid1D, l: int, center: float, halfwidth: float,
              amplitude: float = 1.0, ingoing: bool = False, power: int = 12) -> FieldState:
    """Compactly supported data psi = A (1 - x^2)^power, x = (r* - c)/w.

    ``ingoing`` sets ``pi = psi_{r*}`` (an ingoing pulse); otherwise the
    data are time symmetric.
    """
    x = (grid.rstar - center) / halfwidth
    inside = np.abs(x) < 1.0
    psi = np.where(inside, amplitude * (1.0 - x * x) ** power, 0.0)
    dpsi = np.where(inside, amplitude * power * (1.0 - x * x) ** (power - 1)
                    * (-2.0 * x / halfwidth), 0.0)
    pi = dpsi if ingoing else np.zeros_like(psi)
    return FieldState(l, psi, pi, 0.0)


def energy(state: FieldState, grid: Grid1D) -> float:
    """Killing energy of the mode, trapezoidal in r*, centered gradient."""
    V = _potential(grid, state.l)
    dpsi = np.gradient(state.psi, grid.dr)
    dens = state.pi ** 2 + dpsi ** 2 + V * state.psi ** 2
    return float(np.trapezoid(dens, dx=grid.dr))


def _leapfrog_energy(psi_new, psi_old, V, dr, dt):
    # conserved quantity of the leapfrog scheme with Dirichlet ends
    kin = ((psi_new - psi_old) / dt) ** 2
    grad = np.diff(psi_new) * np.diff(psi_old) / (dr * dr)
    pot = V * psi_new * psi_old
    return float((kin.sum() + grad.sum() + pot.sum()) * dr)


# ======================================================================
# Local-energy densities
# ======================================================================

def _dyadic_masks(r):
    # A_0 = {<r> <= 2}, A_j = {2^j <= <r> <= 2^{j+1}}
    jr = np.sqrt(1.0 + r * r)
    j = np.where(jr <= 2.0, 0, np.floor(np.log2(jr)).astype(int))
    return np.maximum(j, 0)


def _le_densities(psi, pi, grid, l, jidx, nj):
    """Radial integrals over each dyadic region of the two LE integrands."""
    r, h = grid.r, grid.h
    M = grid.M
    u = psi / r
    ut = pi / r
    ursr = np.gradient(psi, grid.dr) / r - h * psi / r ** 2   # d_{r*} u
    ang = l * (l + 1) * u * u / r ** 2
    jr2 = 1.0 + r * r
    low = u * u / jr2
    deg = (1.0 - 3.0 * M / r) ** 2
    w = r * r * h / np.sqrt(jr2) * grid.dr      # <r>^{-1} r^2 dr
    dm = (ut * ut + ursr * ursr + ang + low) * w
    ds = (deg * (ut * ut + ang) + ursr * ursr + low) * w
    return (np.bincount(jidx, weights=dm, minlength=nj),
            np.bincount(jidx, weights=ds, minlength=nj))


# ======================================================================
# Evolution
# ======================================================================

def _config_hash(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


def evolve(grid: Grid1D, state0: FieldState, T: float, pert=None, *,
           r_obs: float = 10.0, record_every: int = 4,
           dense: tuple | None = None, check_boundaries: bool = True,
           params: KerrParams | None = None) -> FieldHistory:
    """Evolve a mode from ``state0`` to time ``T``.

    Parameters
    ----------
    pert : PerturbationSpec, optional
        Selects the RK4 path with time-dependent coefficients.
    r_obs : float
        Areal radius of the point series.
    record_every : int
        Diagnostics cadence in steps.
    dense : (t0, t1, r_lo, r_hi), optional
        Store every time level of psi on the radial window for the
        Morawetz identity, from ``t0 - dt`` to ``t1 + dt``.

    Raises
    ------
    CFLError, NaNDetected, BoundaryContamination, HyperbolicityError
    """
    params = params or KerrParams(grid.M, 0.0)
    if params.a != 0.0:
        raise ValueError("mode evolution is Schwarzschild only")
    if len(state0.psi) != grid.n:
        raise ValueError("state length does not match grid")
    if grid.cfl > 1.0:
        raise CFLError("cfl > 1")
    rs_obs = float(tortoise(params, r_obs))
    if check_boundaries:
        if grid.rstar_max - rs_obs <= T or rs_obs - grid.rstar_min <= T:
            raise BoundaryContamination(
                f"boundaries closer than T={T} to r*_obs={rs_obs:.3f}")
    dt = grid.dt
    nsteps = int(math.ceil(T / dt - 1e-9))
    dt = T / nsteps if nsteps > 0 else dt
    if dt > grid.dr * 1.0000001:
        raise CFLError("time step exceeds the CFL limit")
    i_obs = grid.index_of(rs_obs)
    jidx = _dyadic_masks(grid.r)
    nj = int(jidx.max()) + 1
    hist = FieldHistory(meta={
        "hash": _config_hash({"grid": [grid.rstar_min, grid.rstar_max, grid.n, grid.cfl],
                              "l": state0.l, "T": T, "r_obs": r_obs,
                              "pert": None if pert is None else pert.epsilon}),
        "dt": dt, "nsteps": nsteps, "r_obs": r_obs, "rstar_obs": rs_obs,
        "scheme": "leapfrog" if pert is None else "rk4"})
    hist.le_density = {"t": [], "m": [], "S": [], "nj": nj}
    if dense is not None:
        t0d, t1d, rlo, rhi = dense
        i0 = int(np.searchsorted(grid.r, rlo))
        i1 = int(np.searchsorted(grid.r, rhi))
        k0 = max(0, int(math.floor(t0d / dt)) - 1)
        k1 = min(nsteps, int(math.ceil(t1d / dt)) + 1)
        dense_buf = {"k0": k0, "k1": k1, "i0": i0, "i1": i1, "levels": [], "t": []}
    else:
        dense_buf = None
    if pert is None:
        _evolve_leapfrog(grid, state0, nsteps, dt, hist, i_obs, record_every, jidx, nj, dense_buf)
    else:
        _evolve_rk4(grid, state0, nsteps, dt, pert, hist, i_obs, record_every, jidx, nj, dense_buf)
    if dense_buf is not None and dense_buf["levels"]:
        hist.dense = DenseSlab(np.array(dense_buf["t"]), dense_buf["i0"], dense_buf["i1"],
                               np.array(dense_buf["levels"]))
    return hist


def _record(hist, grid, state, i_obs, jidx, nj, E_scheme=None):
    t = state.t
    if E_scheme is not None:
        hist.energy_series.append((t, E_scheme))
    E_state = energy(state, grid)
    hist.state_energy_series.append((t, E_state))
    if E_scheme is None:
        hist.energy_series.append((t, E_state))
    hist.point_series.append((t, float(state.psi[i_obs] / grid.r[i_obs])))
    dm, ds = _le_densities(state.psi, state.pi, grid, state.l, jidx, nj)
    hist.le_density["t"].append(t)
    hist.le_density["m"].append(dm)
    hist.le_density["S"].append(ds)


def _dense_push(buf, k, t, psi):
    if buf is not None and buf["k0"] <= k <= buf["k1"]:
        buf["levels"].append(psi[buf["i0"]:buf["i1"]].copy())
        buf["t"].append(t)


def _evolve_leapfrog(grid, state0, nsteps, dt, hist, i_obs, every, jidx, nj, dense_buf):
    dr = grid.dr
    V = _potential(grid, state0.l)
    lam = (dt / dr) ** 2
    psi0 = state0.psi.copy()
    psi0[0] = psi0[-1] = 0.0

    def lap(p):
        out = np.zeros_like(p)
        out[1:-1] = p[2:] - 2.0 * p[1:-1] + p[:-2]
        return out

    prev = psi0
    cur = psi0 + dt * state0.pi + 0.5 * (lam * lap(psi0) - dt * dt * V * psi0)
    cur[0] = cur[-1] = 0.0
    t0 = state0.t
    # time level 0 diagnostics use the first half-step energy
    E_half = _leapfrog_energy(cur, prev, V, dr, dt)
    _record(hist, grid, FieldState(state0.l, prev, state0.pi.copy(), t0), i_obs, jidx, nj, E_half)
    _dense_push(dense_buf, 0, t0, prev)
    _dense_push(dense_buf, 1, t0 + dt, cur)
    for k in range(1, nsteps + 1):
        nxt = 2.0 * cur - prev + lam * lap(cur) - dt * dt * V * cur
        nxt[0] = nxt[-1] = 0.0
        if k % every == 0 or k == nsteps:
            t = t0 + k * dt
            if not np.all(np.isfinite(nxt)):
                raise NaNDetected(f"non-finite field at t={t}")
            pi = (nxt - prev) / (2.0 * dt)
            E = _leapfrog_energy(nxt, cur, V, dr, dt)
            _record(hist, grid, FieldState(state0.l, cur, pi, t), i_obs, jidx, nj, E)
        _dense_push(dense_buf, k + 1, t0 + (k + 1) * dt, nxt)
        prev, cur = cur, nxt
    pi = (cur - prev) / dt
    hist.final = FieldState(state0.l, prev, pi, t0 + nsteps * dt)


class _PerturbedCoefficients:
    """Flux-form coefficients of the perturbed mode equation in (t, r*).

    With the (t, r) block B of the inverse metric and ``w = h /
    sqrt(-det B)`` the equation reads
    ``d_t(-A u_t + Bc u_*) + d_*(Bc u_t + Cc u_*) - D u = 0`` with
    ``A = -r^2 w B^tt``, ``Bc = r^2 w B^tr / h``, ``Cc = r^2 w B^rr / h^2``
    and ``D = w l(l+1)``. The perturbation factorizes as
    ``kappa1(t) * profile(r) * weight``, so radial profiles are
    tabulated once.
    """

    def __init__(self, grid, pert, l):
        self.grid, self.pert, self.l = grid, pert, l
        r = grid.r
        self.rm = 0.5 * (r[1:] + r[:-1])
        self.hm = 1.0 - 2.0 * grid.M / self.rm
        prof = np.asarray(pert.radial_profile(r), dtype=float)
        prof_mid = np.asarray(pert.radial_profile(self.rm), dtype=float)
        on = np.nonzero(prof != 0)[0]
        on_mid = np.nonzero(prof_mid != 0)[0]
        self.sl = slice(on.min(), on.max() + 1) if on.size else slice(0, 0)
        self.sl_mid = slice(on_mid.min(), on_mid.max() + 1) if on_mid.size else slice(0, 0)
        self.prof = prof[self.sl]
        self.prof_mid = prof_mid[self.sl_mid]
        self.r_on, self.h_on = r[self.sl], grid.h[self.sl]
        self.rm_on, self.hm_on = self.rm[self.sl_mid], self.hm[self.sl_mid]
        w = pert.weights
        self.wtt = w.get("tt", 0.0) if "tt" in pert.components else 0.0
        self.wtr = w.get("tr", 0.0) if "tr" in pert.components else 0.0
        self.wrr = w.get("rr", 0.0) if "rr" in pert.components else 0.0
        self.A0 = r * r
        self.Bc0 = np.zeros_like(r)
        self.Cm0 = self.rm ** 2
        self.Bm0 = np.zeros_like(self.rm)
        self.D0 = grid.h * l * (l + 1)

    def _block(self, k1, prof, r, h, t):
        amp = k1 * prof
        btt = -1.0 / h + self.wtt * amp
        btr = self.wtr * amp
        brr = h + self.wrr * amp
        det = btt * brr - btr * btr
        if np.any(det >= 0.0) or np.any(btt >= 0.0):
            raise HyperbolicityError(f"perturbed (t, r) block not Lorentzian at t={t}")
        w = h / np.sqrt(-det)
        return btt, btr, brr, w

    def at(self, t):
        A = self.A0.copy()
        Bn = self.Bc0.copy()
        D = self.D0.copy()
        Cm = self.Cm0.copy()
        Bm = self.Bm0.copy()
        k1 = self.pert.kappa1(t)
        sl, sm = self.sl, self.sl_mid
        if sl.stop > sl.start:
            r, h = self.r_on, self.h_on
            btt, btr, brr, w = self._block(k1, self.prof, r, h, t)
            A[sl] = -r * r * w * btt
            Bn[sl] = r * r * w * btr / h
            D[sl] = w * self.l * (self.l + 1)
        if sm.stop > sm.start:
            r, h = self.rm_on, self.hm_on
            btt, btr, brr, w = self._block(k1, self.prof_mid, r, h, t)
            Cm[sm] = r * r * w * brr / (h * h)
            Bm[sm] = r * r * w * btr / h
        return A, Bn, D, Cm, Bm


def _evolve_rk4(grid, state0, nsteps, dt, pert, hist, i_obs, every, jidx, nj, dense_buf):
    dr = grid.dr
    r = grid.r
    coef = _PerturbedCoefficients(grid, pert, state0.l)
    u = state0.psi / r
    ut0 = state0.pi / r
    A, Bn, D, Cm, Bm = coef.at(state0.t)
    P = A * ut0 - Bn * np.gradient(u, dr)

    def rhs(t, u, P):
        A, Bn, D, Cm, Bm = coef.at(t)
        du = np.gradient(u, dr)
        ut = (P + Bn * du) / A
        ut[0] = ut[-1] = 0.0
        # staggered flux Bc u_t + Cc u_* at half points
        F = Cm * np.diff(u) / dr + Bm * 0.5 * (ut[1:] + ut[:-1])
        Pt = np.zeros_like(u)
        Pt[1:-1] = (F[1:] - F[:-1]) / dr - D[1:-1] * u[1:-1]
        return ut, Pt

    def state_at(t, u, P):
        A, Bn, D, _, _ = coef.at(t)
        ut = (P + Bn * np.gradient(u, dr)) / A
        return FieldState(state0.l, u * r, ut * r, t)

    t = state0.t
    _record(hist, grid, state_at(t, u, P), i_obs, jidx, nj)
    _dense_push(dense_buf, 0, t, u * r)
    for k in range(1, nsteps + 1):
        k1u, k1p = rhs(t, u, P)
        k2u, k2p = rhs(t + 0.5 * dt, u + 0.5 * dt * k1u, P + 0.5 * dt * k1p)
        k3u, k3p = rhs(t + 0.5 * dt, u + 0.5 * dt * k2u, P + 0.5 * dt * k2p)
        k4u, k4p = rhs(t + dt, u + dt * k3u, P + dt * k3p)
        u = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        P = P + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        u[0] = u[-1] = 0.0
        t = state0.t + k * dt
        if k % every == 0 or k == nsteps:
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(P))):
                raise NaNDetected(f"non-finite field at t={t}")
            _record(hist, grid, state_at(t, u, P), i_obs, jidx, nj)
        _dense_push(dense_buf, k, t, u * r)
    hist.final = state_at(t, u, P)


# ======================================================================
# Diagnostics
# ======================================================================

def le_norms(hist: FieldHistory, grid: Grid1D, t0: float, t1: float) -> tuple[float, float]:
    """Local-energy norms over [t0, t1].

    Returns ``(LE_m, LE_S)``: square roots of the sup over dyadic regions
    A_j of ``int int_{A_j} <r>^{-1} (|du|^2 + u^2/<r>^2) r^2 dr dt``.
    Derivatives are taken in the (t, r*) frame; ``LE_S`` weights the
    time and angular derivatives by ``(1 - 3M/r)^2``.

    Raises
    ------
    ValueError
        If the interval is not covered by the recorded history.
    """
    ld = hist.le_density
    t = np.asarray(ld.get("t", []), dtype=float)
    if t.size == 0:
        return 0.0, 0.0
    if t0 < t[0] - 1e-9 or t1 > t[-1] + 1e-9 or t1 < t0:
        raise ValueError(f"interval [{t0}, {t1}] outside recorded [{t[0]}, {t[-1]}]")
    sel = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
    if sel.sum() < 2:
        return 0.0, 0.0
    ts = t[sel]
    m = np.asarray(ld["m"])[sel]
    s = np.asarray(ld["S"])[sel]
    Im = np.trapezoid(m, ts, axis=0)
    Is = np.trapezoid(s, ts, axis=0)
    return float(math.sqrt(max(Im.max(), 0.0))), float(math.sqrt(max(Is.max(), 0.0)))


def tail_fit(series, window: tuple) -> tuple[float, float]:
    """Least-squares slope of log|u| against log t on a window.

    Raises
    ------
    ValueError
        If u changes sign (or vanishes) inside the window.
    """
    data = np.asarray(series, dtype=float)
    t0, t1 = window
    sel = (data[:, 0] >= t0) & (data[:, 0] <= t1)
    if sel.sum() < 3:
        raise ValueError("fewer than three samples in the fit window")
    t, u = data[sel, 0], data[sel, 1]
    if np.any(u == 0.0) or (np.any(u > 0) and np.any(u < 0)):
        raise ValueError("series changes sign inside the window; window too early")
    fit = stats.linregress(np.log(t), np.log(np.abs(u)))
    return float(fit.slope), float(fit.stderr)


def _kappa_integral(pert, t):
    # cumulative int_0^t kappa^2 on the given times (fine trapezoid)
    tf = np.linspace(0.0, float(t[-1]), max(2001, 4 * len(t)))
    k2 = np.array([pert.kappa0(s) + pert.kappa1(s) ** 2 for s in tf])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (k2[1:] + k2[:-1]) * np.diff(tf))])
    return np.interp(t, tf, cum)


def gronwall_audit(hist: FieldHistory, pert, constants=(1.0, 2.0, 5.0, 10.0),
                   t_min: float = 10.0) -> dict:
    """Energy growth against the exponential Gronwall bound.

    Reports ``sup_t E(t) / (E(0) exp(C int_0^t kappa^2))`` for each C,
    the least C for which that sup is at most 1, ``max E/E(0)``, and the
    growth exponent ``gamma = max(0, sup_{t >= t_min} log(E/E(0)) /
    log<t>)``, the least power with ``E(t) <= E(0) <t>^gamma`` there.
    The least-squares slope of log E against log t beyond t_min is
    reported as well.
    """
    t, E = hist.arrays("state_energy_series")
    E0 = E[0]
    if E0 <= 0.0:
        raise ValueError("initial energy must be positive")
    ratio = E / E0
    out = {"max_ratio": float(ratio.max()), "final_ratio": float(ratio[-1])}
    if pert is None or pert.epsilon == 0.0:
        K = np.zeros_like(t)
    else:
        K = _kappa_integral(pert, t)
    for C in constants:
        out[f"sup_ratio_C{C:g}"] = float(np.max(ratio / np.exp(C * K)))
    lr = np.log(ratio)
    pos = (K > 0) & (lr > 0)
    out["least_C"] = float(np.max(lr[pos] / K[pos])) if np.any(pos) else 0.0
    late = t >= t_min
    jt = np.log(np.sqrt(1.0 + t[late] ** 2))
    out["growth_exponent"] = float(max(0.0, np.max(lr[late] / jt))) if np.any(late) else 0.0
    if late.sum() >= 3:
        fit = stats.linregress(np.log(t[late]), lr[late])
        out["loglog_slope"] = float(fit.slope)
    else:
        out["loglog_slope"] = 0.0
    out["kappa_integral"] = float(K[-1])
    return out


# ======================================================================
# Discrete Morawetz identity
# ======================================================================

def morawetz_audit(hist: FieldHistory, mult, slab: tuple, grid: Grid1D,
                   l: int | None = None, C: float | None = None,
                   r_range: tuple | None = None) -> dict:
    """Integrated divergence identity for the multiplier on a slab.

    With V = C d_t + X and the current
    ``J = T(., V) + q u grad u - u^2 grad q / 2 + m u^2 / 2`` one has
    ``div J = Box u (V u + q u) + Q``. Integrating over
    ``[t0, t1] x [r_in, r_out] x S^2`` gives

        flux(t1) - flux(t0) + flux(r_out) - flux(r_in)
            = int Q + int Box u (V u + q u),

    each term computed independently from the stored solution with
    second-order differences and trapezoidal quadrature in (t, r*).

    Returns
    -------
    dict
        ``residual`` (identity defect over |bulk|), ``bulk``, the four
        boundary fluxes, ``source`` and ``min_Q``, the pointwise minimum
        of the bulk density over the slab (scaled by its maximum).
    """
    if hist.dense is None:
        raise ValueError("history has no dense storage for the slab")
    from .multiplier import form_coefficients
    d = hist.dense
    l = hist.final.l if l is None else l
    C = mult.bigC if C is None else C
    M = grid.M
    t0, t1 = slab
    dt = float(d.t[1] - d.t[0])
    k0 = int(round((t0 - d.t[0]) / dt))
    k1 = int(round((t1 - d.t[0]) / dt))
    if k0 < 1 or k1 > len(d.t) - 2:
        raise ValueError("slab not covered by dense storage")
    psi = d.psi
    r = grid.r[d.i0:d.i1]
    h = grid.h[d.i0:d.i1]
    dr = grid.dr
    if r_range is not None:
        a = int(np.searchsorted(r, r_range[0]))
        b = int(np.searchsorted(r, r_range[1]))
    else:
        a, b = 1, len(r) - 1
    a = max(a, 1)
    b = min(b, len(r) - 1)
    # time-centered derivatives on levels k0..k1
    P = psi[k0:k1 + 1]
    Pt = (psi[k0 + 1:k1 + 2] - psi[k0 - 1:k1]) / (2.0 * dt)
    Ptt = (psi[k0 + 1:k1 + 2] - 2.0 * P + psi[k0 - 1:k1]) / (dt * dt)
    ridx = slice(a - 1, b + 1)
    Pw, Ptw, Pttw = P[:, ridx], Pt[:, ridx], Ptt[:, ridx]
    rw, hw = r[ridx], h[ridx]
    Ps = np.gradient(Pw, dr, axis=1)
    Pss = np.zeros_like(Pw)
    Pss[:, 1:-1] = (Pw[:, 2:] - 2.0 * Pw[:, 1:-1] + Pw[:, :-2]) / (dr * dr)
    inner = slice(1, -1)
    Pw, Ptw, Pttw, Ps, Pss = Pw[:, inner], Ptw[:, inner], Pttw[:, inner], Ps[:, inner], Pss[:, inner]
    rr, hh = rw[inner], hw[inner]
    u = Pw / rr
    ut = Ptw / rr
    ur = (Ps / rr - hh * Pw / rr ** 2) / hh
    L = l * (l + 1)
    Vl = hh * (L / rr ** 2 + 2.0 * M / rr ** 3)
    box = (-Pttw + Pss - Vl * Pw) / (rr * hh)
    fc = form_coefficients(mult, rr)
    Xr, _ = mult.X_r(rr)
    c, _, _ = mult.c(rr)
    q, dq, _ = mult.q(rr)
    m_r, _, _ = mult.m(rr)
    Vt = C + c
    grad2 = -ut * ut / hh + hh * ur * ur + L * u * u / rr ** 2
    Vu = Vt * ut + Xr * ur
    Q = (fc.tt * ut * ut + 2.0 * fc.tr * ut * ur + fc.rr * ur * ur
         + fc.ang * L * u * u + fc.cross * u * ur + fc.zeroth * u * u)
    Jt = (-ut / hh) * Vu - 0.5 * Vt * grad2 + q * u * (-ut / hh)
    Jr = (hh * ur) * Vu - 0.5 * Xr * grad2 + q * u * hh * ur - 0.5 * u * u * hh * dq \
        + 0.5 * hh * m_r * u * u
    tt = d.t[k0:k1 + 1]
    meas = rr * rr * hh          # r^2 dr = r^2 h dr*
    bulk = np.trapezoid(np.trapezoid(meas * Q, dx=dr, axis=1), tt)
    source = np.trapezoid(np.trapezoid(meas * box * (Vu + q * u), dx=dr, axis=1), tt)
    flux_t1 = np.trapezoid(meas * Jt[-1], dx=dr)
    flux_t0 = np.trapezoid(meas * Jt[0], dx=dr)
    flux_out = np.trapezoid(rr[-1] ** 2 * Jr[:, -1], tt)
    flux_in = np.trapezoid(rr[0] ** 2 * Jr[:, 0], tt)
    bdr = flux_t1 - flux_t0 + flux_out - flux_in
    defect = bdr - bulk - source
    scale = abs(bulk)
    qmax = float(np.max(np.abs(Q))) if Q.size else 0.0
    out = {"residual": float(abs(defect) / scale) if scale > 0 else float(abs(defect)),
           "bulk": float(bulk), "source": float(source),
           "flux_t0": float(flux_t0), "flux_t1": float(flux_t1),
           "flux_in": float(flux_in), "flux_out": float(flux_out),
           "min_Q": float(Q.min() / qmax) if qmax > 0 else 0.0,
           "slab": [t0, t1], "r_in": float(rr[0]), "r_out": float(rr[-1])}
    hist.morawetz_residuals.append(out)
    return out


# ======================================================================
# CSV output
# ======================================================================

def _fmt(x) -> str:
    return repr(float(x)) if not math.isfinite(x) else f"{float(x):.17g}"


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_point_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :2]
