"""
Kerr and Schwarzschild background geometry.

Metric components in Boyer-Lindquist and in a horizon-regular chart
(t~, r, theta, phi_+) with t~ = v_+ - mu(r), the tortoise coordinate,
a concrete choice of the chart function mu, and slowly decaying
perturbations of the inverse metric.

Coordinates are always ordered (t, r, theta, phi). Geometric units
G = c = 1 are used throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

T, R, TH, PH = 0, 1, 2, 3

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _as_real_or_complex(x):
    # complex inputs are kept so complex-step derivatives pass through
    x = np.asarray(x)
    return x if np.iscomplexobj(x) else x.astype(float)


class ChartError(ValueError):
    """Raised when a point lies where the requested chart is singular."""


class HyperbolicityError(ValueError):
    """Raised when a perturbed metric is no longer Lorentzian."""


@dataclass(frozen=True)
class KerrParams:
    """Mass and spin of a Kerr black hole.

    Parameters
    ----------
    M : float
        Mass, ``M > 0``.
    a : float
        Spin, ``0 <= a < M``.
    r_e : float, optional
        Inner boundary radius of the computational region. Must lie
        strictly between the two horizons. Defaults to
        ``r_plus - 0.1 (r_plus - r_minus)``.
    """

    M: float = 1.0
    a: float = 0.0
    r_e: float | None = None

    def __post_init__(self):
        if not (self.M > 0 and math.isfinite(self.M)):
            raise ValueError(f"mass must be positive, got M={self.M}")
        if not (0.0 <= self.a < self.M):
            raise ValueError(
                f"spin must satisfy 0 <= a < M, got a={self.a}, M={self.M}")
        if self.r_e is None:
            rm, rp = horizons(self)
            object.__setattr__(self, "r_e", rp - 0.1 * (rp - rm))
        else:
            rm, rp = horizons(self)
            if not (rm < self.r_e < rp):
                raise ValueError(
                    f"r_e={self.r_e} must lie in ({rm}, {rp})")

    @property
    def r_minus(self) -> float:
        return horizons(self)[0]

    @property
    def r_plus(self) -> float:
        return horizons(self)[1]

    def delta(self, r):
        """Delta(r) = r^2 - 2 M r + a^2."""
        r = _as_real_or_complex(r)
        return r * r - 2.0 * self.M * r + self.a * self.a

    def rho2(self, r, theta):
        """rho^2 = r^2 + a^2 cos^2(theta)."""
        r = _as_real_or_complex(r)
        return r * r + (self.a * np.cos(theta)) ** 2


def horizons(params) -> tuple[float, float]:
    """Inner and outer horizon radii ``(r_minus, r_plus)``.

    For ``a = 0`` the inner horizon is returned as exactly 0.
    """
    M, a = float(params.M), float(params.a)
    if not M > 0:
        raise ValueError(f"mass must be positive, got M={M}")
    if not (0.0 <= a < M):
        raise ValueError(f"spin must satisfy 0 <= a < M, got a={a}")
    s = math.sqrt((M - a) * (M + a))
    rp = M + s
    # r_minus = a^2 / r_plus avoids cancellation for small a
    rm = a * a / rp
    return rm, rp


class Chart(enum.Enum):
    BoyerLindquist = "BoyerLindquist"
    TildeT = "TildeT"


@dataclass
class MetricComponents:
    """Covariant and contravariant metric at one point."""

    chart: Chart
    cov: np.ndarray
    con: np.ndarray
    sqrt_det: float

    def signature(self, tol: float = 1e-10) -> tuple[int, int]:
        """Number of (negative, positive) eigenvalues of ``cov``.

        Eigenvalues with ``|lambda| <= tol * max|lambda|`` count as
        neither.
        """
        ev = np.linalg.eigvalsh(self.cov)
        scale = np.max(np.abs(ev))
        return int(np.sum(ev < -tol * scale)), int(np.sum(ev > tol * scale))

    def is_lorentzian(self, tol: float = 1e-10) -> bool:
        return self.signature(tol) == (1, 3)


# ======================================================================
# Boyer-Lindquist chart
# ======================================================================

def _check_exterior_point(params, r, theta):
    s = math.sin(theta)
    if not (0.0 < theta < math.pi) or s == 0.0:
        raise ChartError(f"theta={theta} is on the axis, chart is singular")
    if params.delta(r) <= 0.0:
        raise ChartError(
            f"r={r} is not outside the outer horizon r_+={params.r_plus}")


def inverse_bl_components(params, r, theta):
    """Nonzero contravariant BL components as arrays.

    Returns ``(g_tt, g_tphi, g_rr, g_thth, g_phph)`` of the inverse
    metric. Accepts broadcastable arrays.
    """
    M, a = params.M, params.a
    r = _as_real_or_complex(r)
    s2 = np.sin(theta) ** 2
    rho2 = params.rho2(r, theta)
    dl = params.delta(r)
    big = (r * r + a * a) ** 2 - a * a * dl * s2
    gtt = -big / (rho2 * dl)
    gtp = -2.0 * a * M * r / (rho2 * dl)
    grr = dl / rho2
    gthth = 1.0 / rho2
    gpp = (dl - a * a * s2) / (rho2 * dl * s2)
    return gtt, gtp, grr, gthth, gpp


def metric_bl(params: KerrParams, r: float, theta: float) -> MetricComponents:
    """Kerr metric in Boyer-Lindquist coordinates at ``(r, theta)``.

    Raises
    ------
    ChartError
        On the axis or at/inside the outer horizon.
    """
    r = float(r)
    theta = float(theta)
    _check_exterior_point(params, r, theta)
    M, a = params.M, params.a
    s = math.sin(theta)
    s2 = s * s
    rho2 = float(params.rho2(r, theta))
    dl = float(params.delta(r))
    big = (r * r + a * a) ** 2 - a * a * dl * s2

    cov = np.zeros((4, 4))
    cov[T, T] = -(dl - a * a * s2) / rho2
    cov[T, PH] = cov[PH, T] = -2.0 * a * M * r * s2 / rho2
    cov[R, R] = rho2 / dl
    cov[TH, TH] = rho2
    cov[PH, PH] = big * s2 / rho2

    gtt, gtp, grr, gthth, gpp = inverse_bl_components(params, r, theta)
    con = np.zeros((4, 4))
    con[T, T] = gtt
    con[T, PH] = con[PH, T] = gtp
    con[R, R] = grr
    con[TH, TH] = gthth
    con[PH, PH] = gpp
    return MetricComponents(Chart.BoyerLindquist, cov, con, rho2 * s)


def tortoise(params: KerrParams, r):
    """Tortoise radius r*(r) with dr*/dr = (r^2 + a^2) / Delta.

    Partial fractions give

        r* = r + A_+ log(r - r_+) + A_- log(r - r_-),
        A_pm = +-2 M r_pm / (r_+ - r_-),

    which for ``a = 0`` is exactly ``r + 2M log(r - 2M)``.
    """
    r = np.asarray(r, dtype=float)
    rm, rp = horizons(params)
    if np.any(r <= rp):
        raise ChartError(f"tortoise coordinate needs r > r_+ = {rp}")
    M = params.M
    out = r + 2.0 * M * rp / (rp - rm) * np.log(r - rp)
    if rm > 0.0:
        out = out - 2.0 * M * rm / (rp - rm) * np.log(r - rm)
    return out if out.ndim else float(out)


def tortoise_derivative(params, r):
    """dr*/dr = (r^2 + a^2) / Delta."""
    r = np.asarray(r, dtype=float)
    return (r * r + params.a ** 2) / params.delta(r)


# ======================================================================
# Horizon-regular chart
# ======================================================================

def _smoothstep5(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)


def _mu_blend_interval(params):
    rp = params.r_plus
    r_hi = 2.5 * params.M
    r_lo = rp + 0.5 * (r_hi - rp)
    return r_lo, r_hi


def _mu_slope(params, r):
    # mu' = 1 + S (dr*/dr - 1); S switches on across [r_lo, 5M/2]
    r = np.asarray(r, dtype=float)
    r_lo, r_hi = _mu_blend_interval(params)
    S = _smoothstep5((r - r_lo) / (r_hi - r_lo))
    out = np.ones_like(r)
    inside = S > 0
    out[inside] = 1.0 + S[inside] * (tortoise_derivative(params, r[inside]) - 1.0)
    return out


def _mu_slope_integral(params, r0, r1):
    # int_{r0}^{r1} mu' dr for r_lo <= r0 <= r1 <= 5M/2 by Gauss-Legendre
    half = 0.5 * (r1 - r0)
    mid = 0.5 * (r1 + r0)
    nodes = mid[..., None] + half[..., None] * _GL_NODES
    vals = _mu_slope(params, nodes.ravel()).reshape(nodes.shape)
    return half * (vals @ _GL_WEIGHTS)


def mu_profile(params: KerrParams, r):
    """Chart function mu(r) and its derivative.

    ``mu = r*`` for ``r >= 5M/2``. Below that, the slope is blended by a
    quintic smoothstep into the constant 1, so mu is smooth across the
    horizon. The blending keeps ``mu >= r*`` for ``r > r_+`` because
    ``dr*/dr >= 1``.

    Returns
    -------
    mu, dmu : float or ndarray
    """
    r_in = np.asarray(r, dtype=float)
    r = np.atleast_1d(r_in)
    if np.any(r <= params.r_e - 1e-14):
        raise ChartError(f"mu_profile needs r > r_e = {params.r_e}")
    r_lo, r_hi = _mu_blend_interval(params)
    rs_hi = tortoise(params, r_hi)
    mu = np.empty_like(r)
    far = r >= r_hi
    if np.any(far):
        mu[far] = tortoise(params, r[far])
    mid = (r >= r_lo) & ~far
    if np.any(mid):
        rr = r[mid]
        mu[mid] = rs_hi - _mu_slope_integral(params, rr, np.full_like(rr, r_hi))
    near = r < r_lo
    if np.any(near):
        full = _mu_slope_integral(params, np.array([r_lo]), np.array([r_hi]))[0]
        mu[near] = rs_hi - full - (r_lo - r[near])
    dmu = _mu_slope(params, r)
    if r_in.ndim == 0:
        return float(mu[0]), float(dmu[0])
    return mu, dmu


def spacelike_margins(params, r, theta):
    """Both quantities of the slice-spacelike condition.

    Returns ``(mu', 2 - (1 - 2 M r / rho^2) mu')``; both must be > 0.
    """
    _, dmu = mu_profile(params, r)
    rho2 = params.rho2(r, theta)
    return dmu, 2.0 - (1.0 - 2.0 * params.M * np.asarray(r) / rho2) * dmu


def _ingoing_inverse(params, r, theta):
    # inverse metric in ingoing coordinates (v_+, r, theta, phi_+)
    a = params.a
    s2 = math.sin(theta) ** 2
    rho2 = float(params.rho2(r, theta))
    dl = float(params.delta(r))
    con = np.zeros((4, 4))
    con[T, T] = a * a * s2 / rho2
    con[T, R] = con[R, T] = (r * r + a * a) / rho2
    con[T, PH] = con[PH, T] = a / rho2
    con[R, R] = dl / rho2
    con[R, PH] = con[PH, R] = a / rho2
    con[TH, TH] = 1.0 / rho2
    con[PH, PH] = 1.0 / (rho2 * s2)
    return con


def _ingoing_metric(params, r, theta):
    M, a = params.M, params.a
    s2 = math.sin(theta) ** 2
    rho2 = float(params.rho2(r, theta))
    dl = float(params.delta(r))
    cov = np.zeros((4, 4))
    cov[T, T] = -(1.0 - 2.0 * M * r / rho2)
    cov[T, R] = cov[R, T] = 1.0
    cov[T, PH] = cov[PH, T] = -2.0 * a * M * r * s2 / rho2
    cov[R, PH] = cov[PH, R] = -a * s2
    cov[TH, TH] = rho2
    cov[PH, PH] = ((r * r + a * a) ** 2 - dl * a * a * s2) * s2 / rho2
    return cov


def metric_tildet(params: KerrParams, r: float, theta: float) -> MetricComponents:
    """Kerr metric in the (t~, r, theta, phi_+) chart.

    Regular across the horizon; valid for ``r > r_e``.
    """
    r = float(r)
    theta = float(theta)
    if not (0.0 < theta < math.pi) or math.sin(theta) == 0.0:
        raise ChartError(f"theta={theta} is on the axis, chart is singular")
    if r <= params.r_e:
        raise ChartError(f"r={r} is inside r_e={params.r_e}")
    _, dmu = mu_profile(params, r)
    # t~ = v_+ - mu(r): dv_+ = dt~ + mu' dr
    J = np.eye(4)
    J[T, R] = dmu
    cov_v = _ingoing_metric(params, r, theta)
    cov = J.T @ cov_v @ J
    Jinv = np.eye(4)
    Jinv[T, R] = -dmu
    con = Jinv @ _ingoing_inverse(params, r, theta) @ Jinv.T
    sqrt_det = float(params.rho2(r, theta)) * math.sin(theta)
    return MetricComponents(Chart.TildeT, cov, con, sqrt_det)


# ======================================================================
# Perturbations of the inverse metric
# ======================================================================

_COMPONENT_INDEX = {"tt": (T, T), "tr": (T, R), "rr": (R, R)}


def _bump(x):
    # C-infinity bump exp(-1/(1-x^2)) on |x| < 1, zero outside
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - x[m] ** 2))
    return out


def _dbump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1.0
    xm = x[m]
    out[m] = np.exp(-1.0 / (1.0 - xm ** 2)) * (-2.0 * xm / (1.0 - xm ** 2) ** 2)
    return out


@dataclass
class PerturbationSpec:
    """Perturbation h^{ab}(t, r) = kappa1(t) * radial_profile(r) * w_ab.

    Attributes
    ----------
    kappa0, kappa1 : callable
        Decay envelopes in t. ``|h| + |d_r h| + |d_t h| <= kappa1`` and
        ``|d_t h| <= kappa0`` hold by construction of the factories.
    epsilon : float
        Amplitude folded into ``kappa1``.
    radial_profile, radial_derivative : callable
        Radial shape and its derivative.
    components : tuple of str
        Perturbed contravariant entries, a subset of {"tt", "tr", "rr"}.
    delta : float
        Tail exponent of the global class, or the time-decay excess of
        the photon-sphere class.
    weights : dict
        Relative factor per component, each of modulus at most 1.
    """

    kappa0: Callable[[float], float]
    kappa1: Callable[[float], float]
    epsilon: float
    radial_profile: Callable
    radial_derivative: Callable
    components: tuple = ("tt", "tr", "rr")
    delta: float = 0.0
    weights: dict = field(default_factory=dict)
    kappa1_dot: Callable | None = None
    rmin: float = 0.0

    def __post_init__(self):
        for c in self.components:
            if c not in _COMPONENT_INDEX:
                raise ValueError(f"unknown perturbation component {c!r}")
        for c in self.components:
            w = self.weights.setdefault(c, 1.0)
            if abs(w) > 1.0:
                raise ValueError("component weights must have modulus <= 1")

    def kappa(self, t):
        """kappa(t) = sqrt(kappa0 + kappa1^2)."""
        return math.sqrt(self.kappa0(t) + self.kappa1(t) ** 2)

    def h(self, t, r):
        """Dictionary component -> h value at (t, r); arrays broadcast."""
        amp = self.kappa1(t) * self.radial_profile(r)
        return {c: self.weights[c] * amp for c in self.components}

    def dh_dt(self, t, r):
        if self.kappa1_dot is None:
            eps = 1e-6 * max(1.0, abs(t))
            k1 = (self.kappa1(t + eps) - self.kappa1(t - eps)) / (2 * eps)
        else:
            k1 = self.kappa1_dot(t)
        amp = k1 * self.radial_profile(r)
        return {c: self.weights[c] * amp for c in self.components}

    def dh_dr(self, t, r):
        amp = self.kappa1(t) * self.radial_derivative(r)
        return {c: self.weights[c] * amp for c in self.components}


def _envelopes(epsilon, power):
    def kappa1(t):
        return epsilon * (1.0 + t * t) ** (-0.5 * power)

    def kappa1_dot(t):
        return -power * epsilon * t * (1.0 + t * t) ** (-0.5 * power - 1.0)

    def kappa0(t):
        # |d/dt kappa1| <= power * kappa1 / <t>
        return power * epsilon * (1.0 + t * t) ** (-0.5 * power - 0.5)

    return kappa0, kappa1, kappa1_dot


def photon_sphere_perturbation(epsilon: float, power: float = 0.5, M: float = 1.0,
                               components: Sequence[str] = ("tt", "tr", "rr"),
                               weights: dict | None = None) -> PerturbationSpec:
    """Perturbation supported in ``|r - 3M| < M/4``.

    ``kappa1(t) = epsilon <t>^{-power}``. The radial bump is normalised
    so that ``(1 + power) sup|chi| + sup|chi'| <= 1``, which gives
    ``|h| + |d_r h| + |d_t h| <= kappa1`` pointwise.
    """
    width = 0.25 * M
    xs = np.linspace(-1.0, 1.0, 20001)
    raw = (1.0 + power) * np.max(_bump(xs)) + np.max(np.abs(_dbump(xs))) / width
    amp = 0.99 / raw

    def chi(r):
        return amp * _bump((np.asarray(r, dtype=float) - 3.0 * M) / width)

    def dchi(r):
        return amp * _dbump((np.asarray(r, dtype=float) - 3.0 * M) / width) / width

    k0, k1, k1d = _envelopes(epsilon, power)
    return PerturbationSpec(k0, k1, epsilon, chi, dchi, tuple(components),
                            delta=power - 0.5, weights=dict(weights or {}),
                            kappa1_dot=k1d, rmin=2.75 * M)


def global_perturbation(epsilon: float, delta: float = 0.1, power: float = 0.5,
                        M: float = 1.0,
                        components: Sequence[str] = ("tt", "tr", "rr"),
                        weights: dict | None = None) -> PerturbationSpec:
    """Perturbation decaying like ``(M/r)^delta``, switched on at 2.5M.

    The profile vanishes for ``r <= 2.5M`` so that the horizon-regular
    chart and Boyer-Lindquist agree wherever ``h`` is nonzero.
    """
    r0, r1 = 2.5 * M, 3.5 * M

    def _shape(r):
        r = np.asarray(r, dtype=float)
        x = (r - r0) / (r1 - r0)
        S = _smoothstep5(x)
        return S * (M / np.maximum(r, r0)) ** delta

    def _dshape(r):
        r = np.asarray(r, dtype=float)
        x = np.clip((r - r0) / (r1 - r0), 0.0, 1.0)
        S = _smoothstep5(x)
        dS = 30.0 * x * x * (1.0 - x) ** 2 / (r1 - r0)
        rr = np.maximum(r, r0)
        return dS * (M / rr) ** delta - S * delta * (M / rr) ** delta / rr

    rs = np.linspace(r0, 200 * M, 40001)
    raw = (1.0 + power) * np.max(_shape(rs)) + np.max(np.abs(_dshape(rs)))
    amp = 0.99 / raw
    k0, k1, k1d = _envelopes(epsilon, power)
    return PerturbationSpec(k0, k1, epsilon,
                            lambda r: amp * _shape(r), lambda r: amp * _dshape(r),
                            tuple(components), delta=delta,
                            weights=dict(weights or {}), kappa1_dot=k1d,
                            rmin=r0)


def perturbed_inverse(spec: PerturbationSpec, params: KerrParams, t: float,
                      r: float, theta: float, tol: float = 1e-10) -> MetricComponents:
    """Background TildeT metric with ``h`` added to the inverse.

    Raises
    ------
    HyperbolicityError
        If the perturbed metric fails the Lorentzian signature test.
    """
    bg = metric_tildet(params, r, theta)
    con = bg.con.copy()
    if spec.epsilon != 0.0:
        for c, val in spec.h(t, r).items():
            i, j = _COMPONENT_INDEX[c]
            con[i, j] += float(val)
            if i != j:
                con[j, i] += float(val)
    else:
        return bg
    cov = np.linalg.inv(con)
    cov = 0.5 * (cov + cov.T)
    det = np.linalg.det(cov)
    out = MetricComponents(Chart.TildeT, cov, con, math.sqrt(abs(det)))
    if det >= 0 or not out.is_lorentzian(tol):
        raise HyperbolicityError(
            f"perturbed metric lost Lorentzian signature at t={t}, r={r}; "
            f"epsilon={spec.epsilon} is too large")
    return out


def sample_perturbation_class(spec: PerturbationSpec, M: float = 1.0,
                              t_max: float = 1000.0, n_t: int = 200,
                              n_r: int = 400) -> dict:
    """Sampled ratios ``sup (|h| + |dh|) / kappa1`` and ``sup |d_t h| / kappa0``.

    The sample covers ``|r - 3M| < M/4`` and ``t in [0, t_max]``.
    """
    ts = np.linspace(0.0, t_max, n_t)
    rs = np.linspace(2.75 * M, 3.25 * M, n_r)
    worst1 = 0.0
    worst0 = 0.0
    for t in ts:
        k1 = spec.kappa1(t)
        k0 = spec.kappa0(t)
        h = spec.h(t, rs)
        hr = spec.dh_dr(t, rs)
        ht = spec.dh_dt(t, rs)
        for c in spec.components:
            tot = np.abs(h[c]) + np.abs(hr[c]) + np.abs(ht[c])
            if k1 > 0:
                worst1 = max(worst1, float(np.max(tot)) / k1)
            if k0 > 0:
                worst0 = max(worst0, float(np.max(np.abs(ht[c]))) / k0)
    return {"h_over_kappa1": worst1, "dth_over_kappa0": worst0}
