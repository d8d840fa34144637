"""Periodic lattice of identical walls (period L): band structure and Bloch modes.

Everything is computed in the dimensionless frequency ``xi = omega L / (2 a)``
and phase ``phi = theta L / 2``. With

    F(xi) = mu (pi^2 r^2 / xi - xi),   mu = M / (rho0 S L),   r = omega_o / omega_g,

``omega_o = sqrt(K/M)`` and ``omega_g = 2 pi a / L``, the fiber eigenvalues
satisfy

    N(xi) cos^2 phi = D(xi) sin^2 phi,
    N = sin xi (sin xi - F cos xi),   D = cos xi (cos xi + F sin xi),

so ``tan^2 phi = N / D``. Band edges at theta = 0 are the zeros of N, those at
|theta| = b/2 the zeros of D.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from scipy.optimize import brentq

from pointacoustics.core import Medium, NumericalDiagnostic

BRACKET_STEP = np.pi / 200
SWEEP_STEP = np.pi / 2000
XTOL = 1e-12
DEGENERACY_TOL = 1e-9
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class LatticeParams:
    L: float
    M: float
    K: float
    medium: Medium = field(default_factory=Medium)

    def __post_init__(self):
        if self.L <= 0 or self.M <= 0 or self.K <= 0:
            raise ValueError("L, M, K must be positive")

    @classmethod
    def from_dimensionless(cls, mu: float, r: float, medium: Optional[Medium] = None, L: float = 1.0):
        medium = medium or Medium()
        if mu <= 0 or r <= 0:
            raise ValueError("mu and r must be positive")
        M = mu * medium.rho0 * medium.S * L
        omega_g = 2 * np.pi * medium.a / L
        return cls(L, M, M * (r * omega_g) ** 2, medium)

    @property
    def b(self) -> float:
        return 2 * np.pi / self.L

    @property
    def M_g(self) -> float:
        return self.medium.rho0 * self.medium.S * self.L

    @property
    def omega_o(self) -> float:
        return float(np.sqrt(self.K / self.M))

    @property
    def omega_g(self) -> float:
        return 2 * np.pi * self.medium.a / self.L

    @property
    def mu(self) -> float:
        return self.M / self.M_g

    @property
    def r(self) -> float:
        return self.omega_o / self.omega_g

    def omega(self, xi):
        return 2 * np.asarray(xi) * self.medium.a / self.L

    def xi(self, omega):
        return np.asarray(omega) * self.L / (2 * self.medium.a)


def F_of_xi(xi, lat: LatticeParams):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi == 0):
        raise ValueError("F is singular at xi = 0")
    return lat.mu * (np.pi**2 * lat.r**2 / xi - xi)


def _N(xi, lat):
    F = F_of_xi(xi, lat)
    return np.sin(xi) * (np.sin(xi) - F * np.cos(xi))


def _D(xi, lat):
    F = F_of_xi(xi, lat)
    return np.cos(xi) * (np.cos(xi) + F * np.sin(xi))


def evs_residual(xi, theta, lat: LatticeParams):
    """N cos^2(theta L/2) - D sin^2(theta L/2)."""
    phi = np.asarray(theta) * lat.L / 2
    return _N(xi, lat) * np.cos(phi) ** 2 - _D(xi, lat) * np.sin(phi) ** 2


def rhs_tan2(xi, lat: LatticeParams):
    """tan xi (tan xi - F) / (1 + F tan xi) evaluated as N / D."""
    return _N(xi, lat) / _D(xi, lat)


# the four scalar edge equations
_EDGE_FUNCS = {
    "sin": (0, lambda x, lat: np.sin(x)),
    "sin-Fcos": (0, lambda x, lat: np.sin(x) - F_of_xi(x, lat) * np.cos(x)),
    "cos": (1, lambda x, lat: np.cos(x)),
    "cos+Fsin": (1, lambda x, lat: np.cos(x) + F_of_xi(x, lat) * np.sin(x)),
}


@dataclass(frozen=True)
class Edge:
    xi: float
    kind: Literal["zero", "half"]  # theta = 0 or |theta| = b/2
    origin: str


def _bracket_roots(func, lat, xi_max: float) -> list[float]:
    x0 = 1e-7
    n = int(np.ceil((xi_max - x0) / BRACKET_STEP)) + 1
    grid = x0 + BRACKET_STEP * np.arange(n + 1)
    vals = func(grid, lat)
    roots = []
    for i in range(n):
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(grid[i])
        elif fa * fb < 0:
            roots.append(brentq(func, grid[i], grid[i + 1], args=(lat,), xtol=XTOL, rtol=4 * np.finfo(float).eps))
    return [r for r in roots if 0 < r <= xi_max]


def band_edges(lat: LatticeParams, xi_max: float) -> dict[str, list[Edge]]:
    """All edges in (0, xi_max], keyed by "zero" (theta = 0) and "half" (|theta| = b/2)."""
    if xi_max <= 0:
        raise ValueError("xi_max must be positive")
    out = {"zero": [], "half": []}
    for origin, (kind, func) in _EDGE_FUNCS.items():
        key = "zero" if kind == 0 else "half"
        out[key] += [Edge(float(x), key, origin) for x in _bracket_roots(func, lat, xi_max)]
    for key in out:
        out[key].sort(key=lambda e: e.xi)
    return out


@dataclass(frozen=True)
class Band:
    index: int  # 1-based
    lower: Edge
    upper: Edge


@dataclass(frozen=True)
class Gap:
    index: int  # gap n lies between band n and band n+1
    xi_low: float
    xi_high: float

    @property
    def width(self) -> float:
        return self.xi_high - self.xi_low

    @property
    def closed(self) -> bool:
        return self.width < DEGENERACY_TOL


def bands_from_edges(edges: dict[str, list[Edge]]) -> list[Band]:
    """Band n spans the n-th theta = 0 edge and the n-th |theta| = b/2 edge."""
    out = []
    for n, (e0, eh) in enumerate(zip(edges["zero"], edges["half"]), start=1):
        lo, hi = (e0, eh) if e0.xi <= eh.xi else (eh, e0)
        out.append(Band(n, lo, hi))
    return out


@dataclass(frozen=True)
class Branch:
    index: int
    xi: np.ndarray
    theta: np.ndarray  # in [0, b/2]


@dataclass(frozen=True)
class BandDiagram:
    lattice: LatticeParams
    xi_max: float
    bands: list
    branches: list
    gaps: list
    degeneracies: list = field(default_factory=list)

    def omega_gaps(self):
        return [(g.index, *self.lattice.omega([g.xi_low, g.xi_high])) for g in self.gaps]

    @property
    def open_gaps(self):
        return [g for g in self.gaps if not g.closed]

    @property
    def closed_gaps(self):
        return [g for g in self.gaps if g.closed]

    def max_residual(self) -> float:
        return max(
            (float(np.max(np.abs(evs_residual(br.xi, br.theta, self.lattice)))) for br in self.branches),
            default=0.0,
        )

    def total_bandwidth(self, xi_cut: float) -> float:
        return float(sum(max(0.0, min(b.upper.xi, xi_cut) - b.lower.xi) for b in self.bands))


def theta_of_xi(xi, lat: LatticeParams):
    """|theta| in [0, b/2] from tan^2(theta L/2) = N/D (NaN where N/D < 0)."""
    N, D = _N(xi, lat), _D(xi, lat)
    ok = N * D >= 0
    phi = np.arctan2(np.sqrt(np.abs(N)), np.sqrt(np.abs(D)))
    return np.where(ok, 2 * phi / lat.L, np.nan)


def _sample_band(band: Band, lat: LatticeParams, samples: int):
    lo, hi = band.lower.xi, band.upper.xi
    s = 0.5 * (1 - np.cos(np.linspace(0.0, np.pi, samples)))
    xi = lo + (hi - lo) * s
    xi[0], xi[-1] = lo, hi
    theta = theta_of_xi(xi, lat)
    half = lat.b / 2
    for k, e in ((0, band.lower), (-1, band.upper)):
        theta[k] = 0.0 if e.kind == "zero" else half
    if np.any(np.isnan(theta)):
        raise NumericalDiagnostic(f"band {band.index}: negative tan^2 inside the band")
    return xi, theta


def _sweep_check(lat: LatticeParams, bands: list, xi_max: float):
    """Sign sweep of N/D on a fine grid must agree with the band/gap partition."""
    xi = np.arange(SWEEP_STEP / 2, xi_max, SWEEP_STEP)
    pos = _N(xi, lat) * _D(xi, lat) >= 0
    inside = np.zeros_like(pos)
    for b in bands:
        inside |= (xi >= b.lower.xi) & (xi <= b.upper.xi)
    covered = xi <= (bands[-1].upper.xi if bands else 0.0)
    mismatch = covered & (pos != inside)
    # allow disagreement only within the bracket tolerance of an edge
    edges = np.array([e.xi for b in bands for e in (b.lower, b.upper)])
    if np.any(mismatch):
        near = np.min(np.abs(xi[mismatch][:, None] - edges[None, :]), axis=1) < SWEEP_STEP
        if not np.all(near):
            raise NumericalDiagnostic("band partition disagrees with the sign sweep of the dispersion relation")


def dispersion(lat: LatticeParams, xi_max: float, samples_per_band: int = 101) -> BandDiagram:
    """Bands, sampled branches and gaps for all bands that close below ``xi_max``."""
    edges = band_edges(lat, xi_max)
    bands = [b for b in bands_from_edges(edges) if b.upper.xi <= xi_max]
    _sweep_check(lat, bands, xi_max)
    branches = [Branch(b.index, *_sample_band(b, lat, samples_per_band)) for b in bands]
    gaps = [Gap(b1.index, b1.upper.xi, b2.lower.xi) for b1, b2 in zip(bands[:-1], bands[1:])]
    for g in gaps:
        if g.width < -DEGENERACY_TOL:
            raise NumericalDiagnostic(f"bands {g.index} and {g.index + 1} overlap")
    degens = [(g.index, 0.5 * (g.xi_low + g.xi_high)) for g in gaps if g.closed]
    return BandDiagram(lat, xi_max, bands, branches, gaps, degens)


@dataclass
class OrderingReport:
    relations: list = field(default_factory=list)  # (label, left, right, "<" or "<=", holds, equal)

    @property
    def passed(self) -> bool:
        return all(r[4] for r in self.relations)

    @property
    def all_strict(self) -> bool:
        return self.passed and not any(r[5] for r in self.relations)

    @property
    def equalities(self):
        return [r for r in self.relations if r[5]]


def edge_ordering_check(diagram: BandDiagram, n_branches: Optional[int] = None) -> OrderingReport:
    """Alternating edge chain: odd bands rise from theta = 0, even bands from |theta| = b/2.

    Within a band the two edges are strictly ordered; consecutive bands may
    touch (equality within the degeneracy tolerance).
    """
    bands = diagram.bands[:n_branches] if n_branches else diagram.bands
    if len(bands) < 4 and n_branches is None:
        raise ValueError("need at least 4 bands")
    rep = OrderingReport()
    for b in bands:
        start = "zero" if b.index % 2 == 1 else "half"
        e_start = b.lower if b.lower.kind == start else b.upper
        e_end = b.upper if e_start is b.lower else b.lower
        d = e_end.xi - e_start.xi
        rep.relations.append((f"E{b.index}({start}) < E{b.index}(other)", e_start.xi, e_end.xi, "<", d > DEGENERACY_TOL, False))
    for b1, b2 in zip(bands[:-1], bands[1:]):
        d = b2.lower.xi - b1.upper.xi
        kind_ok = b1.upper.kind == b2.lower.kind
        rep.relations.append(
            (f"E{b1.index} top <= E{b2.index} bottom", b1.upper.xi, b2.lower.xi, "<=", d > -DEGENERACY_TOL and kind_ok, abs(d) <= DEGENERACY_TOL)
        )
    return rep


@dataclass
class SymmetryReport:
    even_in_theta: bool
    mirrored_negative: bool = True  # -E is an eigenvalue whenever E is (F odd in xi)
    max_odd_residual: float = 0.0


def symmetry_checks(diagram: BandDiagram) -> SymmetryReport:
    """Evenness in theta and the +-E mirror, tested directly on the dispersion relation."""
    lat = diagram.lattice
    worst = 0.0
    for br in diagram.branches:
        worst = max(worst, float(np.max(np.abs(evs_residual(br.xi, -br.theta, lat)))))
        worst = max(worst, float(np.max(np.abs(evs_residual(-br.xi, br.theta, lat)))))
    return SymmetryReport(worst < RESIDUAL_TOL, worst < RESIDUAL_TOL, worst)


def bandwidth_trend(mu_list, r: float, xi_cut: float = 4 * np.pi, medium: Optional[Medium] = None):
    """Total bandwidth below ``xi_cut`` for each mu; returns (widths, strictly_increasing)."""
    mu_list = list(mu_list)
    if len(mu_list) < 3:
        raise ValueError("need at least three mu values")
    if any(b >= a for a, b in zip(mu_list[:-1], mu_list[1:])):
        raise ValueError("mu_list must be strictly decreasing")
    widths = [total_bandwidth(mu, r, xi_cut, medium) for mu in mu_list]
    return widths, all(b > a for a, b in zip(widths[:-1], widths[1:]))


def total_bandwidth(mu: float, r: float, xi_cut: float = 4 * np.pi, medium: Optional[Medium] = None) -> float:
    lat = LatticeParams.from_dimensionless(mu, r, medium)
    edges = band_edges(lat, xi_cut + np.pi)
    return float(sum(max(0.0, min(b.upper.xi, xi_cut) - b.lower.xi) for b in bands_from_edges(edges)))


# ---------------------------------------------------------------- Bloch modes


@dataclass(frozen=True)
class BandPoint:
    branch: int
    theta: float
    xi: float
    lattice: LatticeParams

    @property
    def omega(self) -> float:
        return float(self.lattice.omega(self.xi))

    @property
    def E(self) -> complex:
        return 1j * self.omega

    @property
    def residual(self) -> float:
        return float(evs_residual(self.xi, self.theta, self.lattice))


def band_point(lat: LatticeParams, branch: int, theta: float) -> BandPoint:
    """xi on ``branch`` at quasi-momentum ``theta`` by root finding between the band edges."""
    edges = band_edges(lat, (branch + 2) * np.pi)
    bands = bands_from_edges(edges)
    if branch < 1 or branch > len(bands):
        raise ValueError(f"branch {branch} unavailable")
    b = bands[branch - 1]
    phi = abs(theta) * lat.L / 2
    half = np.pi / 2
    if phi < 1e-15:
        xi = b.lower.xi if b.lower.kind == "zero" else b.upper.xi
    elif abs(phi - half) < 1e-15:
        xi = b.lower.xi if b.lower.kind == "half" else b.upper.xi
    else:
        f = lambda x: evs_residual(x, theta, lat)
        xi = brentq(f, b.lower.xi, b.upper.xi, xtol=XTOL, rtol=4 * np.finfo(float).eps)
    return BandPoint(branch, float(theta), float(xi), lat)


@dataclass(frozen=True)
class BlochMode:
    """Fiber eigenfunction (p, v, y, z) on nu in [-L/2, L/2) with unit fiber norm."""

    point: BandPoint
    C: float

    def _parts(self):
        pt, lat = self.point, self.point.lattice
        # the phase enters as xi + theta L / 2 so that p(-L/2) = e^{i theta L} p(L/2)
        s = np.sin(pt.xi + pt.theta * lat.L / 2)
        c = np.cos(pt.xi + pt.theta * lat.L / 2)
        F = float(F_of_xi(pt.xi, lat))
        return s, c, F, 2 * pt.xi / lat.L

    def p(self, nu, side: int = 0):
        s, c, F, k = self._parts()
        nu = np.asarray(nu, dtype=float)
        sg = np.sign(nu) if not side else np.where(nu == 0, side, np.sign(nu))
        return self.C * ((s - F * c) * np.cos(k * nu) - 1j * s * (np.sin(k * nu) - F * sg * np.cos(k * nu)))

    def v(self, nu):
        s, c, F, k = self._parts()
        nu = np.asarray(nu, dtype=float)
        z0 = self.point.lattice.medium.impedance
        return -1j * self.C / z0 * ((s - F * c) * np.sin(k * nu) + 1j * s * (np.cos(k * nu) + F * np.sin(k * np.abs(nu))))

    @property
    def z(self) -> complex:
        s, *_ = self._parts()
        return self.C * s / self.point.lattice.medium.impedance

    @property
    def y(self) -> complex:
        # z / lambda with lambda = 2 i xi a / L
        return self.z / self.point.E

    @property
    def sigma(self) -> complex:
        s, _, F, _ = self._parts()
        return 2j * self.C * s * F


def fiber_inner(f1, f2, lat: LatticeParams, order: int = 128) -> complex:
    """Fiber scalar product of two modes (objects with p, v, y, z), Gauss-Legendre on each half cell."""
    m = lat.medium
    x, w = np.polynomial.legendre.leggauss(order)
    half = lat.L / 2
    total = 0.0 + 0.0j
    for lo in (-half, 0.0):
        nu = lo + 0.5 * half * (x + 1)
        wt = 0.5 * half * w
        total += np.sum(wt * np.conj(f1.p(nu)) * f2.p(nu)) / (m.a**2 * m.rho0)
        total += m.rho0 * np.sum(wt * np.conj(f1.v(nu)) * f2.v(nu))
    total += (lat.K * np.conj(f1.y) * f2.y + lat.M * np.conj(f1.z) * f2.z) / m.S
    return complex(total)


def bloch_eigenfunction(point: BandPoint, lat: Optional[LatticeParams] = None) -> BlochMode:
    """Unit-norm Bloch mode with C real and C sin(xi + theta L/2) >= 0."""
    lat = lat or point.lattice
    if abs(point.residual) > RESIDUAL_TOL:
        raise NumericalDiagnostic(f"band point residual {point.residual:.3g} exceeds tolerance")
    s = np.sin(point.xi + point.theta * lat.L / 2)
    sign = -1.0 if s < 0 else 1.0
    raw = BlochMode(point, sign)
    nrm = np.sqrt(fiber_inner(raw, raw, lat).real)
    return BlochMode(point, sign / nrm)


@dataclass(frozen=True)
class ThetaZeroMode:
    theta: float
    lattice: LatticeParams
    C: float

    @property
    def _phi(self):
        return self.theta * self.lattice.L / 2

    def p(self, nu, side: int = 0):
        nu = np.asarray(nu, dtype=float)
        sg = np.sign(nu) if not side else np.where(nu == 0, side, np.sign(nu))
        return self.C * (np.cos(self._phi) - 1j * np.sin(self._phi) * sg)

    def v(self, nu):
        return np.zeros_like(np.asarray(nu, dtype=float), dtype=complex)

    @property
    def y(self) -> complex:
        lat = self.lattice
        return 2j * self.C * lat.medium.S / lat.K * np.sin(self._phi)

    @property
    def z(self) -> complex:
        return 0j

    @property
    def sigma(self) -> complex:
        return -2j * self.C * np.sin(self._phi)


def theta_zero_mode(theta: float, lat: LatticeParams) -> ThetaZeroMode:
    raw = ThetaZeroMode(theta, lat, 1.0)
    return ThetaZeroMode(theta, lat, 1.0 / np.sqrt(fiber_inner(raw, raw, lat).real))
