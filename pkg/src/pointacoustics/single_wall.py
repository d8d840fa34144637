"""Exact solution for one spring-loaded wall at x = 0 driven by an acoustic field.

The free d'Alembert fields are corrected by an outgoing wave ``Y(t - |x|/a)``
emitted by the wall. ``Y`` solves  Y'' + gamma Y' + omega0^2 Y = F  with
``F(t) = -v_f''(0,t) - omega0^2 v_f(0,t)``, and its memory integrals are
evaluated by exact exponential integration against a piecewise-linear ``F``.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.signal import lfilter

from pointacoustics._quad import exp_moments
from pointacoustics.core import Medium

DEGENERATE_RTOL = 1e-8
MAX_SAMPLES = 2_000_000


class CompatibilityWarning(UserWarning):
    pass


class CompatibilityError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """A real profile with optional analytic first and second derivatives.

    Missing derivatives fall back to 4th-order central differences with step
    ``1e-4 * width``.
    """

    func: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    width: float = 1.0
    support: tuple = (-np.inf, np.inf)
    label: str = "custom"

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def deriv(self, x, order: int):
        x = np.asarray(x, dtype=float)
        if order == 0:
            return self.func(x)
        analytic = self.d1 if order == 1 else self.d2 if order == 2 else None
        if analytic is not None:
            return analytic(x)
        hd = 1e-4 * self.width
        f = self.func
        if order == 1:
            return (f(x - 2 * hd) - 8 * f(x - hd) + 8 * f(x + hd) - f(x + 2 * hd)) / (12 * hd)
        if order == 2:
            return (-f(x - 2 * hd) + 16 * f(x - hd) - 30 * f(x) + 16 * f(x + hd) - f(x + 2 * hd)) / (
                12 * hd**2
            )
        raise ValueError("only derivatives up to order 2 are available")


def zero() -> Profile:
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return Profile(z, z, z, 1.0, (0.0, 0.0), "zero")


def gaussian(center: float, width: float, amplitude: float = 1.0) -> Profile:
    """amplitude * exp(-(x - center)^2 / (2 width^2))."""

    def f(x):
        u = (x - center) / width
        return amplitude * np.exp(-0.5 * u * u)

    def d1(x):
        u = (x - center) / width
        return -amplitude * u * np.exp(-0.5 * u * u) / width

    def d2(x):
        u = (x - center) / width
        return amplitude * (u * u - 1.0) * np.exp(-0.5 * u * u) / width**2

    return Profile(f, d1, d2, width, (center - 12 * width, center + 12 * width), "gaussian")


def bump(center: float, width: float, amplitude: float = 1.0) -> Profile:
    """C^2 polynomial bump amplitude*(1 - u^2)^3 on |u| < 1, u = 2 (x - center) / width."""
    half = 0.5 * width

    def f(x):
        u = (x - center) / half
        w = np.clip(1.0 - u * u, 0.0, None)
        return amplitude * w**3

    def d1(x):
        u = (x - center) / half
        w = np.clip(1.0 - u * u, 0.0, None)
        return -6.0 * amplitude * u * w**2 / half

    def d2(x):
        u = (x - center) / half
        w = np.clip(1.0 - u * u, 0.0, None)
        inside = np.abs(u) < 1.0
        return np.where(inside, -6.0 * amplitude * w * (1.0 - 5.0 * u * u) / half**2, 0.0)

    return Profile(f, d1, d2, width, (center - half, center + half), "bump")


_PROFILE_RE = re.compile(r"^\s*(gaussian|bump|zero)\s*(?:\((.*)\))?\s*$")


def parse_profile(text: str) -> Profile:
    """Parse ``gaussian(center, width, amplitude)``, ``bump(...)`` or ``zero``."""
    m = _PROFILE_RE.match(text)
    if not m:
        raise ValueError(f"unknown profile specification {text!r}")
    kind, args = m.group(1), m.group(2)
    if kind == "zero":
        if args and args.strip():
            raise ValueError("zero takes no arguments")
        return zero()
    vals = [float(a) for a in args.split(",")] if args else []
    if len(vals) not in (2, 3):
        raise ValueError(f"{kind} expects (center, width[, amplitude])")
    if vals[1] <= 0:
        raise ValueError(f"{kind} width must be positive")
    return (gaussian if kind == "gaussian" else bump)(*vals)


@dataclass(frozen=True)
class SingleWallParams:
    medium: Medium
    M: float
    K: float

    def __post_init__(self):
        if self.M <= 0 or self.K < 0:
            raise ValueError("need M > 0 and K >= 0")

    @property
    def omega0(self) -> float:
        return float(np.sqrt(self.K / self.M))

    @property
    def gamma(self) -> float:
        m = self.medium
        return 2 * m.a * m.rho0 * m.S / self.M


class BetaRoots(NamedTuple):
    plus: complex
    minus: complex
    degenerate: bool


def beta_roots(params: SingleWallParams) -> BetaRoots:
    """Roots of beta^2 + gamma beta + omega0^2 = 0, beta_+ being the slower-decaying one."""
    g = params.gamma
    w2 = params.omega0**2
    disc = g * g - 4 * w2
    if disc >= 0:
        minus = (-g - np.sqrt(disc)) / 2
        plus = w2 / minus  # Vieta, avoids cancellation
        bp, bm = complex(plus), complex(minus)
    else:
        sq = 1j * np.sqrt(-disc)
        bp, bm = (-g + sq) / 2, (-g - sq) / 2
    return BetaRoots(bp, bm, bool(abs(bp - bm) < DEGENERATE_RTOL * g))


@dataclass
class InitialData:
    """Initial pressure ``f``, velocity ``g`` and wall state.

    ``y0``/``z0`` default to the values implied by the compatibility
    conditions y0 = f'(0) / (omega0^2 rho0), z0 = g(0).
    """

    f: Profile = field(default_factory=zero)
    g: Profile = field(default_factory=zero)
    y0: Optional[float] = None
    z0: Optional[float] = None

    def compatible_values(self, params: SingleWallParams) -> tuple[float, float]:
        y0 = float(self.f.deriv(0.0, 1)) / (params.omega0**2 * params.medium.rho0)
        z0 = float(self.g(0.0))
        return y0, z0

    def check_compat(self, params: SingleWallParams, strict: bool = False, rtol: float = 1e-9):
        """Warn (or raise when ``strict``) if y0, z0 violate the compatibility conditions."""
        ey, ez = self.compatible_values(params)
        bad = []
        for name, given, expect in (("y0", self.y0, ey), ("z0", self.z0, ez)):
            if given is None:
                continue
            if abs(given - expect) > rtol * max(abs(given), abs(expect), 1e-300):
                bad.append(f"{name}={given} but compatibility requires {expect}")
        if bad:
            msg = "; ".join(bad)
            if strict:
                raise CompatibilityError(msg)
            warnings.warn(msg, CompatibilityWarning, stacklevel=2)
        return ey, ez


def dalembert_free(d: InitialData, m: Medium, x, t):
    """Free-space fields (p_f, v_f) evolved from (f, g)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    xm, xp = x - m.a * t, x + m.a * t
    z = m.impedance
    fm, fp, gm, gp = d.f(xm), d.f(xp), d.g(xm), d.g(xp)
    p_f = 0.5 * (fm + fp) + 0.5 * z * (gm - gp)
    v_f = 0.5 * (gm + gp) + (fm - fp) / (2 * z)
    return p_f, v_f


def free_velocity_at_wall(d: InitialData, m: Medium, t, order: int = 0):
    """Time derivative of order 0, 1 or 2 of v_f(0, t)."""
    t = np.asarray(t, dtype=float)
    a, z = m.a, m.impedance
    at = a * t
    if order == 0:
        return 0.5 * (d.g(-at) + d.g(at)) + (d.f(-at) - d.f(at)) / (2 * z)
    if order == 1:
        return 0.5 * a * (d.g.deriv(at, 1) - d.g.deriv(-at, 1)) - a * (
            d.f.deriv(-at, 1) + d.f.deriv(at, 1)
        ) / (2 * z)
    if order == 2:
        return 0.5 * a**2 * (d.g.deriv(-at, 2) + d.g.deriv(at, 2)) + a**2 * (
            d.f.deriv(-at, 2) - d.f.deriv(at, 2)
        ) / (2 * z)
    raise ValueError("order must be 0, 1 or 2")


def forcing_F(d: InitialData, p: SingleWallParams, t):
    """F(t) = -v_f''(0,t) - omega0^2 v_f(0,t)."""
    m = p.medium
    return -free_velocity_at_wall(d, m, t, 2) - p.omega0**2 * free_velocity_at_wall(d, m, t, 0)


class _ExpMemory:
    """Running integrals I(t) = int_0^t F e^{beta (t-t')} and J(t) = int_0^t F (t-t') e^{beta (t-t')}."""

    def __init__(self, beta: complex, F_samples: np.ndarray, dt: float, with_J: bool):
        self.beta = beta
        self.dt = dt
        self.F = np.asarray(F_samples, dtype=complex)
        E = np.exp(beta * dt)
        m0, m1, m2 = (complex(v) for v in exp_moments(beta * dt, 2))
        F0, F1 = self.F[:-1], self.F[1:]
        loc_I = dt * (F0 * m1 + F1 * (m0 - m1))
        self.I = np.zeros(len(self.F), dtype=complex)
        self.I[1:] = lfilter([1.0], [1.0, -E], loc_I)
        self.J = None
        if with_J:
            loc_J = E * dt * self.I[:-1] + dt**2 * (F0 * m2 + F1 * (m1 - m2))
            self.J = np.zeros(len(self.F), dtype=complex)
            self.J[1:] = lfilter([1.0], [1.0, -E], loc_J)

    def at(self, t: np.ndarray, F_t: np.ndarray):
        k = np.clip(np.floor(t / self.dt).astype(int), 0, len(self.F) - 1)
        r = t - k * self.dt
        z = self.beta * r
        m0, m1, m2 = exp_moments(z, 2)
        e = np.exp(z)
        Fk = self.F[k]
        I = e * self.I[k] + r * (Fk * m1 + F_t * (m0 - m1))
        J = None
        if self.J is not None:
            J = e * (self.J[k] + r * self.I[k]) + r**2 * (Fk * m2 + F_t * (m1 - m2))
        return I, J


def memory_Y(params: SingleWallParams, F, t, dt: Optional[float] = None, t_max: Optional[float] = None):
    """Y(t) = [int_0^t F e^{beta+(t-t')} - int_0^t F e^{beta-(t-t')}] / (beta+ - beta-).

    ``F`` is a callable of time. It is sampled with step ``dt`` (default
    min(1/gamma, 1/omega0)/200) and integrated exactly against its linear
    interpolant. Degenerate roots use the confluent kernel (t-t') e^{beta (t-t')}.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    roots = beta_roots(params)
    if dt is None:
        scales = [1.0 / params.gamma]
        if params.omega0 > 0:
            scales.append(1.0 / params.omega0)
        dt = min(scales) / 200
    t_max = float(np.max(t)) if t_max is None else t_max
    tg = dt * np.arange(int(np.ceil(t_max / dt)) + 2)
    Fs = np.asarray(F(tg), dtype=complex) * np.ones_like(tg)
    Ft = np.asarray(F(t), dtype=complex) * np.ones_like(t)
    if roots.degenerate:
        beta = -0.5 * params.gamma
        _, J = _ExpMemory(beta, Fs, dt, True).at(t, Ft)
        return J
    Ip, _ = _ExpMemory(roots.plus, Fs, dt, False).at(t, Ft)
    Im, _ = _ExpMemory(roots.minus, Fs, dt, False).at(t, Ft)
    return (Ip - Im) / (roots.plus - roots.minus)


class ClosedForm:
    """Precomputed evaluation context for one initial datum (immutable once built).

    ``t_max`` bounds the times at which the memory integrals are tabulated;
    ``dt`` is the forcing sampling step.
    """

    def __init__(
        self,
        data: InitialData,
        params: SingleWallParams,
        t_max: float,
        dt: Optional[float] = None,
        strict_compat: bool = False,
    ):
        if params.omega0 <= 0:
            raise ValueError("the wall trajectory needs K > 0")
        self.data = data
        self.params = params
        self.roots = beta_roots(params)
        data.check_compat(params, strict=strict_compat)
        if dt is None:
            scales = [1.0 / params.gamma, 1.0 / params.omega0]
            scales += [prof.width / params.medium.a for prof in (data.f, data.g) if prof.label != "zero"]
            # second-order in dt; the sample count is capped for long horizons
            dt = max(min(scales) / 8000, t_max / MAX_SAMPLES)
        self.dt = dt
        self.t_max = t_max
        tg = dt * np.arange(int(np.ceil(t_max / dt)) + 2)
        Fs = forcing_F(data, params, tg)
        if self.roots.degenerate:
            self._mem = [_ExpMemory(-0.5 * params.gamma, Fs, dt, True)]
        else:
            self._mem = [_ExpMemory(b, Fs, dt, False) for b in (self.roots.plus, self.roots.minus)]

    def _integrals(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.t_max + self.dt):
            raise ValueError(f"time beyond tabulated range t_max={self.t_max}")
        Ft = forcing_F(self.data, self.params, np.clip(t, 0.0, None)) * np.ones_like(t)
        return [mem.at(np.clip(t, 0.0, None), Ft) for mem in self._mem]

    def Y(self, t):
        """Emitted wave amplitude; zero for negative arguments."""
        t = np.asarray(t, dtype=float)
        ints = self._integrals(t)
        if self.roots.degenerate:
            out = ints[0][1]
        else:
            bp, bm = self.roots.plus, self.roots.minus
            out = (ints[0][0] - ints[1][0]) / (bp - bm)
        return np.where(t > 0, out.real, 0.0)

    def y(self, t):
        t = np.asarray(t, dtype=float)
        w2 = self.params.omega0**2
        lead = -free_velocity_at_wall(self.data, self.params.medium, t, 1) / w2
        ints = self._integrals(t)
        if self.roots.degenerate:
            beta = -0.5 * self.params.gamma
            I, J = ints[0]
            mem = J / beta - I / beta**2
        else:
            bp, bm = self.roots.plus, self.roots.minus
            mem = (ints[0][0] / bp - ints[1][0] / bm) / (bp - bm)
        return lead + mem.real

    def ydot(self, t):
        # d/dt of y(t) reduces to v_f(0,t) + Y(t)
        t = np.asarray(t, dtype=float)
        return free_velocity_at_wall(self.data, self.params.medium, t, 0) + self.Y(t)

    def fields(self, x, t):
        """(p, v) at (x, t): free fields plus the outgoing wall wave."""
        x = np.asarray(x, dtype=float)
        m = self.params.medium
        p_f, v_f = dalembert_free(self.data, m, x, t)
        Yr = self.Y(np.asarray(t, dtype=float) - np.abs(x) / m.a)
        return p_f + m.impedance * np.sign(x) * Yr, v_f + Yr


def wall_trajectory(d: InitialData, p: SingleWallParams, t, dt: Optional[float] = None, strict_compat=False):
    """(y(t), y'(t)) for t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    cf = ClosedForm(d, p, float(np.max(t)), dt=dt, strict_compat=strict_compat)
    return cf.y(t), cf.ydot(t)


def field_solution(d: InitialData, p: SingleWallParams, x, t, dt: Optional[float] = None):
    t_arr = np.asarray(t, dtype=float)
    cf = ClosedForm(d, p, float(np.max(t_arr)), dt=dt)
    return cf.fields(x, t)


def decay_rate(p: SingleWallParams) -> float:
    """tau = gamma / 2 = a rho0 S / M."""
    return 0.5 * p.gamma


def asymptotic_decay_rate(p: SingleWallParams) -> float:
    """-max Re(beta): equals gamma/2 when underdamped, smaller when overdamped."""
    r = beta_roots(p)
    return -max(r.plus.real, r.minus.real)


def _peak_logs(t, f):
    """Parabolically refined (t, log|f|) at interior local maxima of |f|."""
    af = np.abs(f)
    i = np.where((af[1:-1] > af[:-2]) & (af[1:-1] >= af[2:]) & (af[1:-1] > 0))[0] + 1
    if len(i) == 0:
        return np.zeros(0), np.zeros(0)
    la, lb, lc = np.log(af[i - 1]), np.log(af[i]), np.log(af[i + 1])
    denom = la - 2 * lb + lc
    off = np.where(denom != 0, 0.5 * (la - lc) / np.where(denom != 0, denom, 1.0), 0.0)
    dt = t[1] - t[0]
    return t[i] + off * dt, lb - 0.25 * (la - lc) * off


def fit_decay_rate(t, y, ydot) -> float:
    """Envelope decay rate of a wall trajectory.

    The log-peaks of |y| and of |y'| are fitted with one common slope and a
    separate intercept per family. Without at least two peaks in either family
    (overdamped motion) the slope of log(|y| + |y'|) is returned instead.
    """
    t = np.asarray(t, dtype=float)
    fams = [_peak_logs(t, y), _peak_logs(t, ydot)]
    fams = [f for f in fams if len(f[0]) >= 2]
    if not fams:
        env = np.log(np.abs(y) + np.abs(ydot))
        slope = np.polyfit(t, env, 1)[0]
        return float(-slope)
    rows, rhs = [], []
    for k, (tp, lp) in enumerate(fams):
        for ti, li in zip(tp, lp):
            row = [ti] + [1.0 if j == k else 0.0 for j in range(len(fams))]
            rows.append(row)
            rhs.append(li)
    coef, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    return float(-coef[0])
