"""Spectral machinery for a finite array of walls.

Conventions
-----------
The free kernel is ``Gk(x) = (a / (2 s zeta)) exp(-s zeta |x| / a)`` with
``s = sign(Re zeta)``; it inverts ``-d^2/dx^2 + zeta^2/a^2``. Its derivative is
``Gk'(x) = -sgn(x) exp(-s zeta |x| / a) / 2``.

The coupling matrix is

    Gamma_ij(zeta) = -s exp(-s zeta |s_i - s_j| / a) / (2 a rho0) - zeta S delta_ij / (K_j + zeta^2 M_j)

and its boundary value on the imaginary axis, ``Gamma_+(i omega)``, is the
``s = +1`` expression evaluated at ``zeta = i omega``.

Fields on a grid are convolved with the kernel exactly against their
piecewise-linear interpolant; derivatives of the input are never needed
because the resolvent is written in integrated-by-parts form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

from pointacoustics._quad import exp_convolve_nodes
from pointacoustics.core import (
    Grid,
    GridError,
    Medium,
    NumericalDiagnostic,
    OscillatorArray,
    SystemState,
    inner_product,
)

COND_LIMIT = 1e12
RESONANCE_RTOL = 1e-12


class AxisError(ValueError):
    """zeta lies on the imaginary axis; use the boundary values instead."""


class PoleError(ValueError):
    """zeta^2 = -K_j / M_j for some wall."""


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ComplexFrequency:
    """A spectral parameter together with its half-plane (+1, -1, or 0 on the axis)."""

    zeta: complex
    half_plane: int = field(init=False)

    def __post_init__(self):
        z = complex(self.zeta)
        object.__setattr__(self, "zeta", z)
        object.__setattr__(self, "half_plane", int(np.sign(z.real)))

    @property
    def on_axis(self) -> bool:
        return self.half_plane == 0


Frequency = Union[complex, float, ComplexFrequency]


def _freq(zeta: Frequency) -> ComplexFrequency:
    return zeta if isinstance(zeta, ComplexFrequency) else ComplexFrequency(zeta)


def _oscillator_denominator(zeta: complex, arr: OscillatorArray) -> np.ndarray:
    den = arr.K + zeta**2 * arr.M
    if np.any(np.abs(den) <= 1e-14 * arr.K):
        raise PoleError(f"zeta={zeta} coincides with an oscillator pole")
    return den


@dataclass(frozen=True)
class GammaMatrix:
    zeta: ComplexFrequency
    entries: np.ndarray

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.entries)


def _gamma_entries(zeta: complex, sign: int, arr: OscillatorArray, m: Medium) -> np.ndarray:
    s = arr.s
    dist = np.abs(s[:, None] - s[None, :])
    prop = -sign * np.exp(-sign * zeta * dist / m.a) / (2 * m.impedance)
    return prop - np.diag(zeta * m.S / _oscillator_denominator(zeta, arr))


def gamma_matrix(zeta: Frequency, arr: OscillatorArray, m: Medium) -> GammaMatrix:
    """Gamma(zeta) on the branch matching sign(Re zeta)."""
    zf = _freq(zeta)
    if zf.on_axis:
        raise AxisError("zeta is on the imaginary axis; use gamma_plus / gamma_plus_inverse")
    return GammaMatrix(zf, _gamma_entries(zf.zeta, zf.half_plane, arr, m))


def gamma_plus(lam: complex, arr: OscillatorArray, m: Medium) -> np.ndarray:
    """Continuation of the Re zeta > 0 branch to an arbitrary point (typically lam = i omega)."""
    return _gamma_entries(complex(lam), 1, arr, m)


def resonance_index(lam: complex, arr: OscillatorArray, rtol: float = RESONANCE_RTOL) -> np.ndarray:
    """Indices j with lam = i sqrt(K_j / M_j) to relative tolerance ``rtol``."""
    w = arr.natural_frequencies
    return np.where(np.abs(complex(lam) - 1j * w) <= rtol * w)[0]


def gamma_plus_inverse(
    lam: complex,
    arr: OscillatorArray,
    m: Medium,
    convention: Literal["zero", "limit"] = "zero",
) -> np.ndarray:
    """Boundary value Gamma_+(lam)^{-1} for lam in i R \\ {0}.

    The inverse is computed as ``-(I + W E)^{-1} W`` with
    ``W = diag((K_j + lam^2 M_j) / (lam S))`` and ``E`` the propagation part,
    which stays regular through the resonances. At a resonance
    ``lam = i sqrt(K_j/M_j)`` the ``"zero"`` convention returns the zero matrix;
    ``"limit"`` returns the continuous limit instead.
    """
    lam = complex(lam)
    if lam == 0:
        raise ValueError("lam = 0 is an eigenvalue; Gamma_+ is not invertible there")
    n = arr.n
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    if convention == "zero" and len(resonance_index(lam, arr)):
        return np.zeros((n, n), dtype=complex)
    s = arr.s
    E = np.exp(-lam * np.abs(s[:, None] - s[None, :]) / m.a) / (2 * m.impedance)
    W = (arr.K + lam**2 * arr.M) / (lam * m.S)
    mat = np.eye(n) + W[:, None] * E
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalDiagnostic(f"Gamma_+({lam}) is ill-conditioned (cond={cond:.3g})")
    return -np.linalg.solve(mat, np.diag(W))


# ---------------------------------------------------------------- kernels


def free_kernel(zeta: complex, x, m: Medium):
    zf = _freq(zeta)
    s = zf.half_plane
    if s == 0:
        raise AxisError("kernel needs Re zeta != 0")
    x = np.asarray(x, dtype=float)
    return (m.a / (2 * s * zf.zeta)) * np.exp(-s * zf.zeta * np.abs(x) / m.a)


def free_kernel_derivative(zeta: complex, x, m: Medium):
    """Gk'(x); at x = 0 returns the mean of the one-sided limits (zero)."""
    zf = _freq(zeta)
    s = zf.half_plane
    if s == 0:
        raise AxisError("kernel needs Re zeta != 0")
    x = np.asarray(x, dtype=float)
    return -0.5 * np.sign(x) * np.exp(-s * zf.zeta * np.abs(x) / m.a)


@dataclass(frozen=True)
class GreenVector:
    """G^j_zeta (kind "G") or the dual vector (kind "Gcheck").

    G^j    = (-Gk'(x-s_j), (zeta/(a^2 rho0)) Gk(x-s_j), -S/(K_j+zeta^2 M_j) e_j, -zeta S/(K_j+zeta^2 M_j) e_j)
    Gcheck = ( Gk'(x-s_j), (zeta/(a^2 rho0)) Gk(x-s_j),  S/(K_j+zeta^2 M_j) e_j, -zeta S/(K_j+zeta^2 M_j) e_j)

    G^j has a unit pressure jump at s_j; Gcheck^j a jump of -1.
    """

    kind: Literal["G", "Gcheck"]
    j: int
    zeta: complex
    arr: OscillatorArray
    m: Medium

    @property
    def _psign(self) -> float:
        return -1.0 if self.kind == "G" else 1.0

    def p(self, x, side: int = 0):
        """Pressure; ``side`` = -1/+1 picks the one-sided limit at x = s_j."""
        x = np.asarray(x, dtype=float)
        d = x - self.arr.s[self.j]
        val = self._psign * free_kernel_derivative(self.zeta, d, self.m)
        if side:
            at = d == 0
            val = np.where(at, self._psign * 0.5 * side * -1.0, val)
        return val

    def v(self, x):
        d = np.asarray(x, dtype=float) - self.arr.s[self.j]
        return self.zeta / (self.m.a**2 * self.m.rho0) * free_kernel(self.zeta, d, self.m)

    def _osc(self) -> complex:
        j = self.j
        return self.m.S / (self.arr.K[j] + self.zeta**2 * self.arr.M[j])

    @property
    def y(self) -> np.ndarray:
        out = np.zeros(self.arr.n, dtype=complex)
        out[self.j] = self._psign * self._osc()
        return out

    @property
    def z(self) -> np.ndarray:
        out = np.zeros(self.arr.n, dtype=complex)
        out[self.j] = -self.zeta * self._osc()
        return out

    def to_state(self, grid: Grid) -> SystemState:
        x = grid.x
        return SystemState(grid, self.p(x, -1), self.p(x, +1), self.v(x), self.y, self.z)


# ---------------------------------------------------------------- resolvents


def _convolutions(zeta: complex, u_minus, u_plus, grid: Grid, m: Medium):
    """(Gk * u, Gk' * u) at the grid nodes."""
    zf = _freq(zeta)
    s = zf.half_plane
    kappa = s * zf.zeta / m.a
    L, R = exp_convolve_nodes(u_plus, u_minus, kappa, grid.h)
    return (m.a / (2 * s * zf.zeta)) * (L + R), -0.5 * (L - R)


def _margin_check(zeta: complex, state: SystemState, m: Medium):
    mag = np.maximum(np.maximum(np.abs(state.p_minus), np.abs(state.p_plus)), m.impedance * np.abs(state.v))
    peak = mag.max(initial=0.0)
    if peak == 0:
        return
    live = np.where(mag > 1e-14 * peak)[0]
    x = state.grid.x
    margin = min(x[live[0]] - x[0], x[-1] - x[live[-1]])
    need = 10 * m.a / abs(complex(zeta).real)
    if margin < need:
        est = np.exp(-abs(complex(zeta).real) * margin / m.a)
        warnings.warn(
            f"support margin {margin:.3g} < {need:.3g}; truncation error ~ {est:.2g} relative",
            TruncationWarning,
            stacklevel=3,
        )


def free_resolvent_apply(zeta: Frequency, state: SystemState, m: Medium, arr: OscillatorArray) -> SystemState:
    """(-A + zeta)^{-1} applied to ``state`` for the uncoupled generator.

    p_out = -rho0 (Gk' * v) + (zeta / a^2) (Gk * p)
    v_out = -(Gk' * p) / (a^2 rho0) + (zeta / a^2) (Gk * v)
    y_out = M (z + zeta y) / (K + zeta^2 M),  z_out = (zeta M z - K y) / (K + zeta^2 M)

    Fields outside the grid are taken as zero.
    """
    zf = _freq(zeta)
    if zf.on_axis:
        raise AxisError("free resolvent needs Re zeta != 0")
    if state.n != arr.n:
        raise GridError("state and array sizes differ")
    _margin_check(zf.zeta, state, m)
    z = zf.zeta
    g_p, gp_p = _convolutions(z, state.p_minus, state.p_plus, state.grid, m)
    g_v, gp_v = _convolutions(z, state.v, state.v, state.grid, m)
    a2 = m.a**2
    p_out = -m.rho0 * gp_v + (z / a2) * g_p
    v_out = -gp_p / (a2 * m.rho0) + (z / a2) * g_v
    den = _oscillator_denominator(z, arr) if arr.n else np.zeros(0)
    y_out = arr.M * (state.z + z * state.y) / den if arr.n else np.zeros(0)
    z_out = (z * arr.M * state.z - arr.K * state.y) / den if arr.n else np.zeros(0)
    return SystemState(state.grid, p_out, p_out.copy(), v_out, y_out, z_out)


def dual_pairings(zeta: Frequency, state: SystemState, m: Medium, arr: OscillatorArray, route="trace"):
    """Pairings <<Gcheck^j_{conj zeta}, state>> for j = 1..n.

    ``route="trace"`` uses the identity pairing_j = v_free(s_j) - z_free_j with
    the free resolvent output; ``route="inner"`` evaluates the scalar product
    by quadrature.
    """
    z = _freq(zeta).zeta
    if route == "trace":
        free = free_resolvent_apply(z, state, m, arr)
        idx = state.grid.wall_indices(arr)
        return free.v[idx] - free.z
    if route == "inner":
        zc = np.conj(z)
        return np.array(
            [
                inner_product(GreenVector("Gcheck", j, zc, arr, m).to_state(state.grid), state, m, arr)
                for j in range(arr.n)
            ]
        )
    raise ValueError(f"unknown route {route!r}")


def resolvent_apply(zeta: Frequency, state: SystemState, m: Medium, arr: OscillatorArray, route="trace") -> SystemState:
    """(-A_hat + zeta)^{-1} state: free resolvent plus the rank-n correction."""
    zf = _freq(zeta)
    free = free_resolvent_apply(zf, state, m, arr)
    if arr.n == 0:
        return free
    if route == "trace":
        idx = state.grid.wall_indices(arr)
        pair = free.v[idx] - free.z
    else:
        pair = dual_pairings(zf, state, m, arr, route=route)
    coeff = np.linalg.solve(gamma_matrix(zf, arr, m).entries, pair)
    out = free
    x = state.grid.x
    for i, c in enumerate(coeff):
        G = GreenVector("G", i, zf.zeta, arr, m)
        out.p_minus = out.p_minus + c * G.p(x, -1)
        out.p_plus = out.p_plus + c * G.p(x, +1)
        out.v = out.v + c * G.v(x)
        out.y = out.y + c * G.y
        out.z = out.z + c * G.z
    return out


# ---------------------------------------------------------------- spectrum


@dataclass(frozen=True)
class ZeroMode:
    """Static state p = (1/2) sum sigma_j sgn(x - s_j), v = 0, y_j = -S sigma_j / K_j, z = 0."""

    sigma: np.ndarray
    arr: OscillatorArray
    m: Medium

    def __post_init__(self):
        sig = np.asarray(self.sigma, dtype=complex)
        object.__setattr__(self, "sigma", sig)
        if abs(sig.sum()) > 1e-12:
            raise ValueError("zero-mode jumps must sum to zero")

    def p(self, x, side: int = 0):
        x = np.asarray(x, dtype=float)
        d = x[..., None] - self.arr.s
        sg = np.sign(d)
        if side:
            sg = np.where(d == 0, side, sg)
        return 0.5 * (sg * self.sigma).sum(axis=-1)

    @property
    def y(self) -> np.ndarray:
        return -self.m.S * self.sigma / self.arr.K

    def to_state(self, grid: Grid) -> SystemState:
        x = grid.x
        n = self.arr.n
        return SystemState(grid, self.p(x, -1), self.p(x, +1), np.zeros(grid.N), self.y, np.zeros(n))


def zero_mode_basis(arr: OscillatorArray, m: Medium) -> list[ZeroMode]:
    """Difference basis sigma = e_k - e_{k+1}, k = 1..n-1 (empty for n < 2)."""
    out = []
    for k in range(arr.n - 1):
        sig = np.zeros(arr.n)
        sig[k], sig[k + 1] = 1.0, -1.0
        out.append(ZeroMode(sig, arr, m))
    return out


Incidence = Literal["+", "-"]


@dataclass(frozen=True)
class GeneralizedEigenfunction:
    """Plane-wave scattering state for lam = i omega.

    ``"+"`` carries the free wave C exp(+lam x / a), ``"-"`` carries
    C exp(-lam x / a); with time factor exp(lam t) these travel towards -x and
    +x respectively. ``coeff = Gamma_+^{-1} e`` with e_j = exp(+-lam s_j / a).
    """

    lam: complex
    incidence: Incidence
    arr: OscillatorArray
    m: Medium
    C: float
    coeff: np.ndarray
    resonant: bool

    @property
    def _pm(self) -> float:
        return 1.0 if self.incidence == "+" else -1.0

    def _scatter(self, x):
        x = np.asarray(x, dtype=float)
        d = x[..., None] - self.arr.s
        return d, np.exp(-self.lam * np.abs(d) / self.m.a)

    def p(self, x, side: int = 0):
        x = np.asarray(x, dtype=float)
        pm, z0 = self._pm, self.m.impedance
        d, e = self._scatter(x)
        sg = np.sign(d)
        if side:
            sg = np.where(d == 0, side, sg)
        sc = (self.coeff * sg * e).sum(axis=-1)
        return self.C * np.exp(pm * self.lam * x / self.m.a) - pm * self.C / (2 * z0) * sc

    def v(self, x):
        x = np.asarray(x, dtype=float)
        pm, z0 = self._pm, self.m.impedance
        _, e = self._scatter(x)
        sc = (self.coeff * e).sum(axis=-1)
        return -pm * self.C * np.exp(pm * self.lam * x / self.m.a) / z0 - pm * self.C / (2 * z0**2) * sc

    @property
    def y(self) -> np.ndarray:
        den = self.arr.K + self.lam**2 * self.arr.M
        return self._pm * self.m.S * self.C / self.m.impedance * self.coeff / den

    @property
    def z(self) -> np.ndarray:
        return self.lam * self.y

    @property
    def jumps(self) -> np.ndarray:
        """p(s_i+) - p(s_i-) = -+ (C / (a rho0)) coeff_i."""
        return -self._pm * self.C / self.m.impedance * self.coeff


def generalized_eigenfunction(
    lam: complex, incidence: Incidence, arr: OscillatorArray, m: Medium, convention="zero"
) -> GeneralizedEigenfunction:
    lam = complex(lam)
    if lam == 0:
        raise ValueError("lam = 0 is excluded")
    if incidence not in ("+", "-"):
        raise ValueError("incidence must be '+' or '-'")
    pm = 1.0 if incidence == "+" else -1.0
    C = float(np.sqrt(m.impedance / (4 * np.pi)))
    if arr.n == 0:
        return GeneralizedEigenfunction(lam, incidence, arr, m, C, np.zeros(0, dtype=complex), False)
    ginv = gamma_plus_inverse(lam, arr, m, convention=convention)
    coeff = ginv @ np.exp(pm * lam * arr.s / m.a)
    resonant = bool(len(resonance_index(lam, arr)))
    return GeneralizedEigenfunction(lam, incidence, arr, m, C, coeff, resonant)


@dataclass(frozen=True)
class TransmissionSpectrum:
    omega: np.ndarray
    T: np.ndarray
    R: np.ndarray
    resonance: np.ndarray

    def rows(self):
        for w, T, R, res in zip(self.omega, self.T, self.R, self.resonance):
            yield (w, T.real, T.imag, R.real, R.imag, abs(T) ** 2, abs(R) ** 2, bool(res))


def _plane_wave_split(p, v, x, omega, m: Medium):
    """Amplitudes (A, B) with p = A e^{-i w x/a} + B e^{i w x/a}, v = (A e^{..} - B e^{..}) / (a rho0)."""
    ph = np.exp(1j * omega * x / m.a)
    right = 0.5 * (p + m.impedance * v)
    left = 0.5 * (p - m.impedance * v)
    return right * ph, left / ph


def transmission_spectrum(omega_grid, arr: OscillatorArray, m: Medium, incidence: Incidence = "-") -> TransmissionSpectrum:
    """Transmission and reflection amplitudes from the generalized eigenfunctions.

    The default ``"-"`` eigenfunction is incident from x < s_1 and travels
    towards +x. The amplitudes are read off by splitting (p, v) into right-
    and left-moving plane waves at probe points 10 a / omega outside the array.
    """
    omega = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    if np.any(omega <= 0):
        raise ValueError("frequencies must be positive")
    T = np.ones(len(omega), dtype=complex)
    R = np.zeros(len(omega), dtype=complex)
    res = np.zeros(len(omega), dtype=bool)
    if arr.n == 0:
        return TransmissionSpectrum(omega, T, R, res)
    s1, sn = arr.s[0], arr.s[-1]
    for k, w in enumerate(omega):
        phi = generalized_eigenfunction(1j * w, incidence, arr, m)
        res[k] = phi.resonant
        xl, xr = s1 - 10 * m.a / w, sn + 10 * m.a / w
        Al, Bl = _plane_wave_split(phi.p(xl), phi.v(xl), xl, w, m)
        Ar, Br = _plane_wave_split(phi.p(xr), phi.v(xr), xr, w, m)
        if incidence == "-":
            T[k], R[k] = Ar / phi.C, Bl / phi.C
        else:
            T[k], R[k] = Bl / phi.C, Ar / phi.C
    return TransmissionSpectrum(omega, T, R, res)
