import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pointacoustics.core import Medium
from pointacoustics.bands import (
    LatticeParams,
    F_of_xi,
    band_edges,
    band_point,
    bandwidth_trend,
    bloch_eigenfunction,
    dispersion,
    edge_ordering_check,
    evs_residual,
    fiber_inner,
    symmetry_checks,
    theta_zero_mode,
    total_bandwidth,
)

XI_MAX = 4 * np.pi + 0.5


def transfer_trace(xi, lat):
    """Half trace of the one-cell transfer matrix (free propagation times wall jump)."""
    m = lat.medium
    omega = lat.omega(xi)
    kL = omega * lat.L / m.a
    return np.cos(kL) + (lat.K - omega**2 * lat.M) * np.sin(kL) / (2 * omega * m.S * m.impedance)


@pytest.fixture(scope="module")
def lat12():
    return LatticeParams.from_dimensionless(0.5, 1.2)


@pytest.fixture(scope="module")
def diag12(lat12):
    return dispersion(lat12, XI_MAX)


def test_lattice_parameters_round_trip():
    m = Medium(343.0, 1.21, 0.01)
    lat = LatticeParams.from_dimensionless(0.7, 1.3, m, L=0.2)
    assert lat.mu == pytest.approx(0.7) and lat.r == pytest.approx(1.3)
    assert lat.b == pytest.approx(2 * np.pi / 0.2)
    assert lat.xi(lat.omega(2.5)) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        LatticeParams(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        LatticeParams.from_dimensionless(0.0, 1.0)
    with pytest.raises(ValueError):
        F_of_xi(0.0, lat)


@given(xi=st.floats(0.01, 15.0), theta=st.floats(-np.pi, np.pi), mu=st.floats(0.05, 5.0), r=st.floats(0.1, 3.0))
def test_dispersion_relation_matches_transfer_matrix(xi, theta, mu, r):
    lat = LatticeParams.from_dimensionless(mu, r)
    # the residual is half the distance between cos(theta L) and the transfer-matrix half trace
    expected = 0.5 * (np.cos(theta * lat.L) - transfer_trace(xi, lat))
    scale = 1.0 + abs(float(F_of_xi(xi, lat)))
    assert abs(evs_residual(xi, theta, lat) - expected) <= 1e-12 * scale


def test_band_points_satisfy_transfer_matrix_condition(diag12, lat12):
    for br in diag12.branches:
        np.testing.assert_allclose(np.cos(br.theta * lat12.L), transfer_trace(br.xi, lat12), atol=1e-9)
    # inside gaps the half trace leaves [-1, 1]
    for g in diag12.open_gaps:
        mid = 0.5 * (g.xi_low + g.xi_high)
        assert abs(transfer_trace(mid, lat12)) > 1.0


def test_reference_lattice_gaps(diag12):
    assert len(diag12.bands) >= 8
    assert all(not g.closed for g in diag12.gaps[:4])
    assert diag12.max_residual() < 1e-10
    # gap n always has one edge pinned at n pi / 2 (sin xi = 0 or cos xi = 0)
    for g in diag12.gaps:
        pinned = g.index * np.pi / 2
        assert min(abs(g.xi_low - pinned), abs(g.xi_high - pinned)) < 1e-12


@pytest.mark.parametrize("r,gap_index", [(0.5, 1), (1.0, 2), (1.5, 3), (2.0, 4)])
def test_half_integer_ratio_closes_one_gap(r, gap_index):
    d = dispersion(LatticeParams.from_dimensionless(0.5, r), XI_MAX)
    assert [g.index for g in d.closed_gaps] == [gap_index]
    (idx, xi), = d.degeneracies
    assert idx == gap_index and xi == pytest.approx(np.pi * r, abs=1e-9)
    rep = edge_ordering_check(d)
    assert rep.passed and not rep.all_strict and len(rep.equalities) == 1


def test_degenerate_edge_theta():
    lat = LatticeParams.from_dimensionless(0.5, 1.0)
    d = dispersion(lat, XI_MAX)
    band2 = d.bands[1]
    # the closed gap at xi = pi is a theta = 0 edge (even band index)
    assert band2.upper.kind == "zero" and band2.upper.xi == pytest.approx(np.pi, abs=1e-9)


@given(mu=st.floats(0.05, 5.0), r=st.floats(0.1, 3.0))
def test_edge_chain_holds(mu, r):
    if abs(2 * r - round(2 * r)) < 1e-3:
        return
    d = dispersion(LatticeParams.from_dimensionless(mu, r), XI_MAX, samples_per_band=11)
    rep = edge_ordering_check(d, n_branches=6)
    assert rep.all_strict
    assert len(rep.relations) == 11


def test_ordering_needs_four_bands():
    d = dispersion(LatticeParams.from_dimensionless(0.5, 1.2), 1.3 * np.pi)
    with pytest.raises(ValueError):
        edge_ordering_check(d)
    assert edge_ordering_check(d, n_branches=2).passed


def test_symmetries(diag12):
    rep = symmetry_checks(diag12)
    assert rep.even_in_theta and rep.mirrored_negative and rep.max_odd_residual < 1e-10


def test_edges_are_sorted_and_typed(lat12):
    edges = band_edges(lat12, 10.0)
    for kind, lst in edges.items():
        xs = [e.xi for e in lst]
        assert xs == sorted(xs) and all(e.kind == kind for e in lst)
    with pytest.raises(ValueError):
        band_edges(lat12, 0.0)


def test_bandwidth_trend_and_limits():
    widths, increasing = bandwidth_trend([1.0, 0.5, 0.25], 1.2)
    assert increasing and widths == sorted(widths)
    assert total_bandwidth(1e-4, 1.2) > 0.99 * 4 * np.pi
    assert total_bandwidth(50.0, 1.2) < 0.25 * 4 * np.pi
    with pytest.raises(ValueError):
        bandwidth_trend([1.0, 0.5], 1.2)
    with pytest.raises(ValueError):
        bandwidth_trend([0.25, 0.5, 1.0], 1.2)


def test_band_point_edges(lat12, diag12):
    b1 = diag12.bands[0]
    assert band_point(lat12, 1, 0.0).xi == pytest.approx(b1.lower.xi)
    assert band_point(lat12, 1, lat12.b / 2).xi == pytest.approx(b1.upper.xi)
    with pytest.raises(ValueError):
        band_point(lat12, 0, 0.1)


def bloch_relations(md, lat):
    pt = md.point
    L, m = lat.L, lat.medium
    ph = np.exp(1j * pt.theta * L)
    quasi = max(abs(md.p(-L / 2) - ph * md.p(L / 2)), abs(md.v(-L / 2) - ph * md.v(L / 2)))
    kin = abs(md.v(0.0) - md.z)
    jump = abs(md.p(0.0, +1) - md.p(0.0, -1) - md.sigma)
    wall = abs(pt.E * md.z + lat.K / lat.M * md.y + m.S / lat.M * md.sigma)
    return quasi, kin, jump, wall


@given(branch=st.integers(1, 6), theta=st.floats(-np.pi, np.pi))
def test_bloch_mode_contract(branch, theta):
    lat = LatticeParams.from_dimensionless(0.5, 1.2)
    md = bloch_eigenfunction(band_point(lat, branch, theta))
    assert max(bloch_relations(md, lat)) < 1e-8
    assert fiber_inner(md, md, lat).real == pytest.approx(1.0, abs=1e-12)
    assert md.C * np.sin(md.point.xi + theta * lat.L / 2) >= 0


def test_bloch_mode_field_equations(lat12):
    md = bloch_eigenfunction(band_point(lat12, 3, 0.7))
    m, lam, h = lat12.medium, md.point.E, 1e-6
    nu = np.array([-0.4, -0.1, 0.2, 0.45])
    dp = (md.p(nu + h) - md.p(nu - h)) / (2 * h)
    dv = (md.v(nu + h) - md.v(nu - h)) / (2 * h)
    np.testing.assert_allclose(lam * md.p(nu), -m.a**2 * m.rho0 * dv, rtol=1e-6)
    np.testing.assert_allclose(lam * md.v(nu), -dp / m.rho0, rtol=1e-6)


def test_bloch_orthogonality(lat12):
    theta = 1.1
    modes = [bloch_eigenfunction(band_point(lat12, n, theta)) for n in range(1, 5)]
    zm = theta_zero_mode(theta, lat12)
    for i, a in enumerate(modes):
        assert abs(fiber_inner(zm, a, lat12)) < 1e-10
        for b in modes[i + 1:]:
            assert abs(fiber_inner(a, b, lat12)) < 1e-10


def test_theta_zero_mode(lat12):
    theta = -0.9
    zm = theta_zero_mode(theta, lat12)
    L = lat12.L
    assert fiber_inner(zm, zm, lat12).real == pytest.approx(1.0)
    assert abs(zm.p(-L / 2) - np.exp(1j * theta * L) * zm.p(L / 2)) < 1e-13
    assert zm.p(0.0, 1) - zm.p(0.0, -1) == pytest.approx(zm.sigma)
    assert lat12.K * zm.y == pytest.approx(-lat12.medium.S * zm.sigma)
    assert zm.z == 0 and np.all(zm.v(np.linspace(-0.5, 0.5, 5)) == 0)
