"""Physical parameters, discretized states, the energy scalar product.

All field samples are complex. A state lives on a uniform :class:`Grid`; the
pressure is stored as a pair of one-sided traces (``p_minus``, ``p_plus``) that
agree everywhere except at wall nodes, where their difference is the pressure
jump sigma_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Raised when states or walls do not fit a grid."""


class NumericalDiagnostic(RuntimeError):
    """Raised when a computation is numerically unreliable (ill-conditioning, no convergence)."""


@dataclass(frozen=True)
class Medium:
    """Fluid constants: sound speed ``a`` (m/s), density ``rho0`` (kg/m^3), pipe section ``S`` (m^2)."""

    a: float = 343.0
    rho0: float = 1.21
    S: float = 0.01

    def __post_init__(self):
        for name in ("a", "rho0", "S"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"Medium.{name} must be positive, got {val}")

    @property
    def impedance(self) -> float:
        """Characteristic impedance a*rho0."""
        return self.a * self.rho0


@dataclass(frozen=True)
class OscillatorArray:
    """Thin walls at strictly increasing ``positions`` with masses and spring constants.

    An empty array (n = 0) is allowed and describes the free fluid.
    """

    positions: tuple = ()
    masses: tuple = ()
    stiffness: tuple = ()

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.positions, dtype=float))
        M = np.atleast_1d(np.asarray(self.masses, dtype=float))
        K = np.atleast_1d(np.asarray(self.stiffness, dtype=float))
        if not (len(s) == len(M) == len(K)):
            raise ValueError(
                f"positions, masses, stiffness must have equal length, got {len(s)}, {len(M)}, {len(K)}"
            )
        if len(s) > 1 and np.any(np.diff(s) <= 0):
            raise ValueError("wall positions must be strictly increasing")
        if np.any(M <= 0) or np.any(K <= 0):
            raise ValueError("masses and stiffness must be positive")
        object.__setattr__(self, "positions", tuple(s.tolist()))
        object.__setattr__(self, "masses", tuple(M.tolist()))
        object.__setattr__(self, "stiffness", tuple(K.tolist()))

    @classmethod
    def single(cls, s: float = 0.0, M: float = 1.0, K: float = 1.0) -> "OscillatorArray":
        return cls((s,), (M,), (K,))

    @classmethod
    def uniform(cls, positions, M: float, K: float) -> "OscillatorArray":
        n = len(positions)
        return cls(tuple(positions), (M,) * n, (K,) * n)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def s(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float)

    @property
    def M(self) -> np.ndarray:
        return np.asarray(self.masses, dtype=float)

    @property
    def K(self) -> np.ndarray:
        return np.asarray(self.stiffness, dtype=float)

    @property
    def natural_frequencies(self) -> np.ndarray:
        return np.sqrt(self.K / self.M)

    @property
    def min_gap(self) -> float:
        if self.n < 2:
            return np.inf
        return float(np.min(np.diff(self.s)))


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``N`` nodes on [x_min, x_max]."""

    x_min: float
    x_max: float
    N: int

    def __post_init__(self):
        if self.N < 2:
            raise GridError("a grid needs at least two nodes")
        if not self.x_min < self.x_max:
            raise GridError("x_min must be smaller than x_max")

    @classmethod
    def with_spacing(cls, x_min: float, x_max: float, h: float) -> "Grid":
        """Grid of spacing ``h`` starting at x_min; x_max is rounded to the nearest node."""
        n_cells = int(round((x_max - x_min) / h))
        return cls(x_min, x_min + n_cells * h, n_cells + 1)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.N - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.N)

    def node_index(self, pos: float) -> int:
        k = int(round((pos - self.x_min) / self.h))
        slack = 8 * np.finfo(float).eps * max(abs(pos), abs(self.x_min), abs(self.x_max))
        if k < 0 or k >= self.N or abs(self.x_min + k * self.h - pos) > 1e-12 * self.h + slack:
            raise GridError(f"position {pos} is not a grid node")
        return k

    def wall_indices(self, arr: OscillatorArray) -> np.ndarray:
        return np.array([self.node_index(s) for s in arr.positions], dtype=int)


@dataclass
class SystemState:
    """Discretized (p, v, y, z) on a grid.

    ``p_minus``/``p_plus`` are left/right pressure traces (Pa), ``v`` the
    velocity (m/s), ``y``/``z`` wall displacements and velocities.
    """

    grid: Grid
    p_minus: np.ndarray
    p_plus: np.ndarray
    v: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.p_minus = np.asarray(self.p_minus, dtype=complex)
        self.p_plus = np.asarray(self.p_plus, dtype=complex)
        self.v = np.asarray(self.v, dtype=complex)
        self.y = np.atleast_1d(np.asarray(self.y, dtype=complex))
        self.z = np.atleast_1d(np.asarray(self.z, dtype=complex))
        N = self.grid.N
        if self.p_minus.shape != (N,) or self.p_plus.shape != (N,) or self.v.shape != (N,):
            raise GridError("field arrays must have one sample per grid node")
        if self.y.shape != self.z.shape:
            raise GridError("y and z must have the same length")

    @classmethod
    def zeros(cls, grid: Grid, n: int) -> "SystemState":
        zf = np.zeros(grid.N, dtype=complex)
        return cls(grid, zf.copy(), zf.copy(), zf.copy(), np.zeros(n), np.zeros(n))

    @classmethod
    def from_functions(cls, grid: Grid, arr: OscillatorArray, p=None, v=None, y=None, z=None):
        """Sample smooth profiles ``p(x)``, ``v(x)`` on the grid (no jumps)."""
        x = grid.x
        pv = np.zeros(grid.N, dtype=complex) if p is None else np.asarray(p(x), dtype=complex)
        vv = np.zeros(grid.N, dtype=complex) if v is None else np.asarray(v(x), dtype=complex)
        yy = np.zeros(arr.n) if y is None else y
        zz = np.zeros(arr.n) if z is None else z
        return cls(grid, pv.copy(), pv.copy(), vv, yy, zz)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> np.ndarray:
        """Mean of the two traces (equal to p away from walls)."""
        return 0.5 * (self.p_minus + self.p_plus)

    def sigma(self, arr: OscillatorArray) -> np.ndarray:
        """Pressure jumps p(s_j+) - p(s_j-)."""
        idx = self.grid.wall_indices(arr)
        return self.p_plus[idx] - self.p_minus[idx]

    def copy(self) -> "SystemState":
        return SystemState(
            self.grid, self.p_minus.copy(), self.p_plus.copy(), self.v.copy(), self.y.copy(), self.z.copy()
        )

    def _combine(self, other: "SystemState", alpha: complex, beta: complex) -> "SystemState":
        _check_compatible(self, other)
        return SystemState(
            self.grid,
            alpha * self.p_minus + beta * other.p_minus,
            alpha * self.p_plus + beta * other.p_plus,
            alpha * self.v + beta * other.v,
            alpha * self.y + beta * other.y,
            alpha * self.z + beta * other.z,
        )

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, alpha):
        return self._combine(self, alpha, 0.0)

    __rmul__ = __mul__

    def restricted_to(self, grid: Grid) -> "SystemState":
        """Copy onto a sub-grid of the same spacing (nodes must coincide)."""
        i0 = self.grid.node_index(grid.x_min)
        sl = slice(i0, i0 + grid.N)
        return SystemState(grid, self.p_minus[sl], self.p_plus[sl], self.v[sl], self.y, self.z)


@dataclass(frozen=True)
class EnergyBreakdown:
    e_ac: float
    e_osc: float
    e_tot: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "e_tot", self.e_ac + self.e_osc)


def _check_compatible(s1: SystemState, s2: SystemState):
    if s1.grid != s2.grid:
        raise GridError("states live on different grids")
    if s1.n != s2.n:
        raise GridError(f"oscillator count mismatch: {s1.n} vs {s2.n}")


def _check_array(s: SystemState, arr: OscillatorArray):
    if s.n != arr.n:
        raise GridError(f"state has {s.n} oscillators, array has {arr.n}")


def trapezoid_pair(f_minus1, f_plus1, f_minus2, f_plus2, h: float) -> complex:
    """Cell-wise trapezoid of conj(f1) f2, using right traces at cell starts and left traces at cell ends."""
    left = np.conj(f_plus1[:-1]) * f_plus2[:-1]
    right = np.conj(f_minus1[1:]) * f_minus2[1:]
    return complex(0.5 * h * np.sum(left + right))


def inner_product(s1: SystemState, s2: SystemState, m: Medium, arr: OscillatorArray) -> complex:
    """Energy scalar product, conjugate-linear in the first argument.

    (1/(a^2 rho0)) <p1,p2> + rho0 <v1,v2> + (1/S) sum_j (K_j conj(y1_j) y2_j + M_j conj(z1_j) z2_j)
    """
    _check_compatible(s1, s2)
    _check_array(s1, arr)
    h = s1.grid.h
    pp = trapezoid_pair(s1.p_minus, s1.p_plus, s2.p_minus, s2.p_plus, h)
    vv = trapezoid_pair(s1.v, s1.v, s2.v, s2.v, h)
    osc = np.sum(arr.K * np.conj(s1.y) * s2.y + arr.M * np.conj(s1.z) * s2.z) / m.S
    return pp / (m.a**2 * m.rho0) + m.rho0 * vv + complex(osc)


def energy(s: SystemState, m: Medium, arr: OscillatorArray) -> EnergyBreakdown:
    _check_array(s, arr)
    h = s.grid.h
    pp = trapezoid_pair(s.p_minus, s.p_plus, s.p_minus, s.p_plus, h).real
    vv = trapezoid_pair(s.v, s.v, s.v, s.v, h).real
    e_ac = m.S / (2 * m.a**2 * m.rho0) * pp + m.rho0 * m.S / 2 * vv
    e_osc = 0.5 * float(np.sum(arr.K * np.abs(s.y) ** 2 + arr.M * np.abs(s.z) ** 2))
    return EnergyBreakdown(float(e_ac), e_osc)


def norm(s: SystemState, m: Medium, arr: OscillatorArray) -> float:
    return float(np.sqrt(max(inner_product(s, s, m, arr).real, 0.0)))


def is_real_state(s: SystemState, m: Medium, arr: OscillatorArray, rtol: float = 1e-12) -> bool:
    """True when every imaginary part is below ``rtol`` times the state norm."""
    scale = norm(s, m, arr)
    imag = max(
        np.max(np.abs(s.p_minus.imag), initial=0.0),
        np.max(np.abs(s.p_plus.imag), initial=0.0),
        np.max(np.abs(s.v.imag), initial=0.0),
        np.max(np.abs(s.y.imag), initial=0.0),
        np.max(np.abs(s.z.imag), initial=0.0),
    )
    return imag <= rtol * max(scale, np.finfo(float).tiny)


def _segment_derivative(f_minus, f_plus, h, walls):
    """Derivative on each smooth segment between walls; returns (left, right) one-sided values at nodes."""
    N = len(f_minus)
    d_left = np.zeros(N, dtype=complex)
    d_right = np.zeros(N, dtype=complex)
    cuts = [0, *walls.tolist(), N - 1]
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        seg = f_minus[a : b + 1].copy()
        seg[0] = f_plus[a]
        edge = 2 if b - a >= 2 else 1
        d = np.gradient(seg, h, edge_order=edge)
        d_right[a:b] = d[:-1]
        d_left[a + 1 : b + 1] = d[1:]
    d_left[0] = d_right[0]
    d_right[N - 1] = d_left[N - 1]
    return d_left, d_right


def apply_generator(s: SystemState, m: Medium, arr: OscillatorArray) -> SystemState:
    """Coupled generator action by finite differences on each smooth segment.

    (p, v, y, z) -> (-a^2 rho0 v', -(1/rho0) p0', z, -(K/M) y - (S/M) sigma)

    ``p0'`` is the derivative of the regular part, i.e. the jump contributions
    at the walls are dropped. At wall nodes the p-component keeps both
    one-sided values and the v-component is the mean of the one-sided ones.
    """
    _check_array(s, arr)
    h = s.grid.h
    walls = s.grid.wall_indices(arr)
    dv_l, dv_r = _segment_derivative(s.v, s.v, h, walls)
    dp_l, dp_r = _segment_derivative(s.p_minus, s.p_plus, h, walls)
    c = m.a**2 * m.rho0
    sigma = s.p_plus[walls] - s.p_minus[walls] if arr.n else np.zeros(0)
    return SystemState(
        s.grid,
        -c * dv_l,
        -c * dv_r,
        -0.5 * (dp_l + dp_r) / m.rho0,
        s.z.copy(),
        -(arr.K / arr.M) * s.y - (m.S / arr.M) * sigma,
    )
