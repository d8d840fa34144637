import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pointacoustics.core import (
    Grid,
    Medium,
    NumericalDiagnostic,
    OscillatorArray,
    SystemState,
    apply_generator,
    inner_product,
    norm,
)
from pointacoustics.krein import (
    AxisError,
    ComplexFrequency,
    GreenVector,
    PoleError,
    TruncationWarning,
    ZeroMode,
    dual_pairings,
    free_kernel,
    free_kernel_derivative,
    free_resolvent_apply,
    gamma_matrix,
    gamma_plus,
    gamma_plus_inverse,
    generalized_eigenfunction,
    resolvent_apply,
    transmission_spectrum,
    zero_mode_basis,
)

UNIT = Medium(1.0, 1.0, 1.0)
THREE = OscillatorArray((-1.0, 0.0, 1.5), (1.0, 2.0, 0.5), (1.0, 3.0, 2.0))

off_axis = st.builds(
    complex,
    st.floats(0.05, 5.0) | st.floats(-5.0, -0.05),
    st.floats(-5.0, 5.0),
)


def smooth_state(grid, arr):
    return SystemState.from_functions(
        grid,
        arr,
        p=lambda x: np.exp(-((x - 0.5) ** 2)),
        v=lambda x: 0.3 * x * np.exp(-(x**2)),
        y=np.array([0.1, 0.2, -0.1]),
        z=np.array([0.0, 0.3, 0.1]),
    )


@pytest.fixture(scope="module")
def fine_grid():
    return Grid.with_spacing(-40.0, 40.0, 1 / 128)


# ---------------------------------------------------------------- Gamma


def test_complex_frequency_half_plane():
    assert ComplexFrequency(1 + 2j).half_plane == 1
    assert ComplexFrequency(-0.1).half_plane == -1
    assert ComplexFrequency(3j).on_axis


def test_gamma_single_wall_example():
    # n = 1: Gamma = -1/(2 a rho0) - zeta S / (K + zeta^2 M)
    g = gamma_matrix(2.0, OscillatorArray.single(0.0, 1.0, 1.0), UNIT).entries
    assert g.shape == (1, 1)
    assert g[0, 0] == pytest.approx(-0.5 - 2.0 / 5.0)
    gm = gamma_matrix(-2.0, OscillatorArray.single(0.0, 1.0, 1.0), UNIT).entries
    assert gm[0, 0] == pytest.approx(0.5 + 2.0 / 5.0)


def test_gamma_rejects_axis_and_poles():
    with pytest.raises(AxisError):
        gamma_matrix(1j, THREE, UNIT)
    arr = OscillatorArray.single(0.0, 1.0, 4.0)
    with pytest.raises(PoleError):
        gamma_matrix(complex(1e-17, 2.0), arr, UNIT)


@given(zeta=off_axis)
def test_gamma_symmetric_and_reflection(zeta):
    G = gamma_matrix(zeta, THREE, UNIT).entries
    np.testing.assert_allclose(G, G.T, rtol=1e-15, atol=0)
    lhs = np.conj(gamma_matrix(np.conj(zeta), THREE, UNIT).entries)
    rhs = -gamma_matrix(-zeta, THREE, UNIT).entries
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


@given(omega=st.floats(0.05, 20.0))
def test_gamma_plus_inverse_matches_direct_inverse(omega):
    lam = 1j * omega
    if np.min(np.abs(omega - THREE.natural_frequencies)) < 1e-3:
        return
    direct = np.linalg.inv(gamma_plus(lam, THREE, UNIT))
    np.testing.assert_allclose(gamma_plus_inverse(lam, THREE, UNIT), direct, rtol=1e-8, atol=1e-12)


def test_gamma_plus_inverse_at_resonance():
    arr = OscillatorArray.single(0.0, 1.0, 4.0)
    lam = 2.0j
    assert np.all(gamma_plus_inverse(lam, arr, UNIT) == 0)
    lim = gamma_plus_inverse(lam, arr, UNIT, convention="limit")
    near = gamma_plus_inverse(lam * (1 + 1e-7), arr, UNIT)
    np.testing.assert_allclose(lim, near, atol=1e-6)
    assert gamma_plus_inverse(1j, OscillatorArray(()), UNIT).shape == (0, 0)
    with pytest.raises(ValueError):
        gamma_plus_inverse(0.0, arr, UNIT)


def test_gamma_plus_inverse_ill_conditioned():
    # near lam = 0 the spring terms dominate and I + W E has condition ~ K / (|lam| S a rho0)
    arr = OscillatorArray((0.0, 1.0), (1.0, 1.0), (1.0, 1.0))
    gamma_plus_inverse(1e-9j, arr, UNIT)
    with pytest.raises(NumericalDiagnostic):
        gamma_plus_inverse(1e-14j, arr, UNIT)


# ---------------------------------------------------------------- kernels and Green vectors


def test_free_kernel_is_fundamental_solution():
    m = Medium(1.5, 0.8, 1.0)
    zeta = 0.7 + 0.4j
    x = np.linspace(0.1, 3.0, 9)
    h = 1e-4
    d2 = (free_kernel(zeta, x + h, m) - 2 * free_kernel(zeta, x, m) + free_kernel(zeta, x - h, m)) / h**2
    np.testing.assert_allclose(d2, zeta**2 / m.a**2 * free_kernel(zeta, x, m), rtol=1e-5)
    d1 = (free_kernel(zeta, x + h, m) - free_kernel(zeta, x - h, m)) / (2 * h)
    np.testing.assert_allclose(free_kernel_derivative(zeta, x, m), d1, rtol=1e-7)
    jump = free_kernel_derivative(zeta, 1e-14, m) - free_kernel_derivative(zeta, -1e-14, m)
    assert jump == pytest.approx(-1.0)
    assert free_kernel_derivative(zeta, 0.0, m) == 0
    with pytest.raises(AxisError):
        free_kernel(2j, x, m)


def test_free_kernel_left_half_plane_decays():
    x = np.array([10.0, -10.0])
    assert np.all(np.abs(free_kernel(-1 + 1j, x, UNIT)) < 1e-4)


@pytest.mark.parametrize("kind,expected", [("G", 1.0), ("Gcheck", -1.0)])
def test_green_vector_pressure_jump(kind, expected):
    zeta = 0.9 - 0.3j
    for j in range(3):
        G = GreenVector(kind, j, zeta, THREE, UNIT)
        sj = THREE.s[j]
        assert G.p(sj, +1) - G.p(sj, -1) == pytest.approx(expected)
        others = np.delete(THREE.s, j)
        np.testing.assert_allclose(G.p(others, +1), G.p(others, -1))


# ---------------------------------------------------------------- resolvents


def test_free_resolvent_inverts_free_generator():
    empty = OscillatorArray(())
    grid = Grid.with_spacing(-30.0, 30.0, 1 / 128)
    st_ = SystemState.from_functions(grid, empty, p=lambda x: np.exp(-(x**2)), v=lambda x: np.exp(-((x - 1) ** 2)))
    zeta = 1.1 + 0.6j
    R = free_resolvent_apply(zeta, st_, UNIT, empty)
    back = zeta * R - apply_generator(R, UNIT, empty)
    assert norm(back - st_, UNIT, empty) < 1e-4 * norm(st_, UNIT, empty)


def test_free_resolvent_oscillator_part():
    grid = Grid.with_spacing(-20.0, 20.0, 1 / 16)
    arr = OscillatorArray.single(0.0, 2.0, 3.0)
    s = SystemState.from_functions(grid, arr, y=np.array([1.0]), z=np.array([0.5]))
    zeta = 0.4 + 1j
    R = free_resolvent_apply(zeta, s, UNIT, arr)
    # (zeta - A_osc)(y, z) = (y_in, z_in) with A_osc (y, z) = (z, -K y / M)
    assert zeta * R.y[0] - R.z[0] == pytest.approx(1.0)
    assert zeta * R.z[0] + 1.5 * R.y[0] == pytest.approx(0.5)


def test_truncation_warning():
    grid = Grid.with_spacing(-3.0, 3.0, 1 / 32)
    s = SystemState.from_functions(grid, THREE, p=lambda x: np.exp(-(x**2)))
    with pytest.warns(TruncationWarning):
        free_resolvent_apply(0.1 + 1j, s, UNIT, THREE)


def test_resolvent_identity_and_inverse(fine_grid):
    st_ = smooth_state(fine_grid, THREE)
    zeta, xi = 0.8 + 0.5j, 1.1 - 0.7j
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        Rz = resolvent_apply(zeta, st_, UNIT, THREE)
        Rx = resolvent_apply(xi, st_, UNIT, THREE)
        lhs = (zeta - xi) * resolvent_apply(xi, Rz, UNIT, THREE)
    rhs = Rx - Rz
    assert norm(lhs - rhs, UNIT, THREE) <= 1e-4 * norm(rhs, UNIT, THREE)
    back = zeta * Rz - apply_generator(Rz, UNIT, THREE)
    assert norm(back - st_, UNIT, THREE) <= 1e-3 * norm(st_, UNIT, THREE)
    # the output lies in the domain: v(s_j) = z_j
    idx = fine_grid.wall_indices(THREE)
    np.testing.assert_allclose(Rz.v[idx], Rz.z, atol=1e-6)


def test_pairing_routes_agree(fine_grid):
    st_ = smooth_state(fine_grid, THREE)
    zeta = 0.8 + 0.5j
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        trace = dual_pairings(zeta, st_, UNIT, THREE)
        inner = dual_pairings(zeta, st_, UNIT, THREE, route="inner")
        R1 = resolvent_apply(zeta, st_, UNIT, THREE)
        R2 = resolvent_apply(zeta, st_, UNIT, THREE, route="inner")
    np.testing.assert_allclose(trace, inner, rtol=1e-4)
    assert norm(R1 - R2, UNIT, THREE) <= 1e-4 * norm(R1, UNIT, THREE)
    with pytest.raises(ValueError):
        dual_pairings(zeta, st_, UNIT, THREE, route="magic")


def test_gamma_difference_identity(fine_grid):
    # Gamma(zeta) - Gamma(xi) = (zeta - xi) <Gcheck^i_{conj xi}, G^j_zeta>
    zeta, xi = 0.8 + 0.5j, 1.1 - 0.7j
    Gz = gamma_matrix(zeta, THREE, UNIT).entries
    Gx = gamma_matrix(xi, THREE, UNIT).entries
    for i in range(3):
        Ci = GreenVector("Gcheck", i, np.conj(xi), THREE, UNIT).to_state(fine_grid)
        for j in range(3):
            Gj = GreenVector("G", j, zeta, THREE, UNIT).to_state(fine_grid)
            lhs = Gz[i, j] - Gx[i, j]
            assert abs(lhs - (zeta - xi) * inner_product(Ci, Gj, UNIT, THREE)) <= 1e-4 * abs(lhs)


# ---------------------------------------------------------------- zero modes


@pytest.mark.parametrize("n", [0, 1, 2, 4])
def test_zero_mode_basis_size_and_stationarity(n):
    arr = OscillatorArray(tuple(np.arange(n) * 0.75), tuple(1.0 + 0.1 * np.arange(n)), tuple(2.0 + np.arange(n)))
    basis = zero_mode_basis(arr, UNIT)
    assert len(basis) == max(n - 1, 0)
    grid = Grid.with_spacing(-4.0, 6.0, 1 / 16)
    for zm in basis:
        s = zm.to_state(grid)
        assert np.all(s.sigma(arr) == zm.sigma)
        A = apply_generator(s, UNIT, arr)
        assert norm(A, UNIT, arr) <= 1e-15 * norm(s, UNIT, arr)
        # spring balances the pressure jump
        np.testing.assert_allclose(arr.K * zm.y, -UNIT.S * zm.sigma)


def test_zero_mode_requires_balanced_jumps():
    with pytest.raises(ValueError):
        ZeroMode(np.array([1.0, 0.5]), OscillatorArray((0.0, 1.0), (1.0, 1.0), (1.0, 1.0)), UNIT)


# ---------------------------------------------------------------- generalized eigenfunctions


@pytest.mark.parametrize("incidence", ["+", "-"])
@pytest.mark.parametrize("omega", [0.3, 1.7, 4.0])
def test_generalized_eigenfunction_relations(incidence, omega):
    lam = 1j * omega
    phi = generalized_eigenfunction(lam, incidence, THREE, UNIT)
    np.testing.assert_allclose(phi.v(THREE.s), phi.z, atol=1e-12)
    np.testing.assert_allclose(phi.p(THREE.s, +1) - phi.p(THREE.s, -1), phi.jumps, atol=1e-12)
    # wall equation (K + lam^2 M) y = -S sigma
    np.testing.assert_allclose((THREE.K + lam**2 * THREE.M) * phi.y, -UNIT.S * phi.jumps, atol=1e-12)
    # field equations lam p = -a^2 rho0 v', lam v = -p' / rho0 away from the walls
    x = np.array([-3.0, -0.5, 0.8, 4.0])
    h = 1e-5
    dp = (phi.p(x + h) - phi.p(x - h)) / (2 * h)
    dv = (phi.v(x + h) - phi.v(x - h)) / (2 * h)
    np.testing.assert_allclose(lam * phi.p(x), -UNIT.a**2 * UNIT.rho0 * dv, atol=1e-7)
    np.testing.assert_allclose(lam * phi.v(x), -dp / UNIT.rho0, atol=1e-7)


def test_generalized_eigenfunction_free_limit():
    phi = generalized_eigenfunction(2j, "-", OscillatorArray(()), UNIT)
    x = np.linspace(-2, 2, 5)
    np.testing.assert_allclose(phi.p(x), phi.C * np.exp(-2j * x))
    with pytest.raises(ValueError):
        generalized_eigenfunction(0.0, "+", THREE, UNIT)
    with pytest.raises(ValueError):
        generalized_eigenfunction(1j, "left", THREE, UNIT)


# ---------------------------------------------------------------- transmission


def single_wall_T(omega, m, M, K):
    # impedance-balance solution for a mass-spring wall between two half-spaces
    return 1.0 / (1.0 + (K - omega**2 * M) / (2j * omega * m.S * m.impedance))


@pytest.mark.parametrize("M,K", [(1.0, 1.0), (0.3, 5.0), (4.0, 0.5)])
def test_single_wall_transmission_closed_form(M, K):
    m = Medium(1.3, 0.7, 0.9)
    omega = np.array([0.1, 0.5, 1.0, 2.0, 7.0, 30.0])
    sp = transmission_spectrum(omega, OscillatorArray.single(0.4, M, K), m)
    ref = single_wall_T(omega, m, M, K)
    np.testing.assert_allclose(np.abs(sp.T) ** 2, np.abs(ref) ** 2, rtol=1e-10)


def test_single_wall_limits():
    arr = OscillatorArray.single(0.0, 1.0, 1.0)
    sp = transmission_spectrum([1.0, 1e4], arr, UNIT)
    assert sp.resonance[0] and not sp.resonance[1]
    assert abs(sp.T[0]) == pytest.approx(1.0)
    assert abs(sp.T[1]) < 1e-3  # heavy walls are opaque at high frequency
    sp0 = transmission_spectrum([0.5, 2.0], OscillatorArray(()), UNIT)
    assert np.all(sp0.T == 1) and np.all(sp0.R == 0)
    with pytest.raises(ValueError):
        transmission_spectrum([0.0, 1.0], arr, UNIT)


def test_flux_conservation_and_reciprocity():
    omega = np.linspace(0.1, 5.0, 60)
    right = transmission_spectrum(omega, THREE, UNIT)
    left = transmission_spectrum(omega, THREE, UNIT, incidence="+")
    np.testing.assert_allclose(np.abs(right.T) ** 2 + np.abs(right.R) ** 2, 1.0, atol=1e-8)
    np.testing.assert_allclose(np.abs(left.T) ** 2 + np.abs(left.R) ** 2, 1.0, atol=1e-8)
    np.testing.assert_allclose(right.T, left.T, atol=1e-10)
    rows = list(right.rows())
    assert len(rows) == len(omega) and len(rows[0]) == 8
