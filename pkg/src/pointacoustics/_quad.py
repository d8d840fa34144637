"""Exponential-moment helpers shared by the memory integrals and the Green convolutions."""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

_SERIES_RADIUS = 0.5
_SERIES_TERMS = 24


def exp_moments(z, kmax: int = 2) -> list[np.ndarray]:
    """Return [m_0, ..., m_kmax] with m_k(z) = int_0^1 s^k exp(z s) ds.

    Uses a Taylor series for small |z| and the closed forms otherwise.
    """
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < _SERIES_RADIUS
    out = []
    ez = np.exp(z)
    zz = np.where(small, 1.0, z)
    prev = None
    for k in range(kmax + 1):
        # series: sum_j z^j / (j! (k + j + 1))
        ser = np.zeros_like(z)
        term = np.ones_like(z)
        for j in range(_SERIES_TERMS):
            ser = ser + term / (k + j + 1)
            term = term * z / (j + 1)
        if k == 0:
            closed = np.expm1(zz) / zz
        else:
            closed = (ez - k * prev) / zz
        mk = np.where(small, ser, closed)
        out.append(mk)
        prev = mk
    return out


def exp_convolve_nodes(u_right, u_left, kappa: complex, h: float):
    """One-sided exponential convolutions on a uniform grid.

    The data are the piecewise-linear interpolant whose value at the left end of
    cell [x_k, x_{k+1}] is ``u_right[k]`` and at the right end ``u_left[k+1]``
    (the two arrays differ only where the data jump). Returns ``(L, R)``::

        L_i = int_{y < x_i} exp(-kappa (x_i - y)) u(y) dy
        R_i = int_{y > x_i} exp(-kappa (y - x_i)) u(y) dy

    integrated exactly against the interpolant. Requires Re kappa > 0.
    """
    u_right = np.asarray(u_right, dtype=complex)
    u_left = np.asarray(u_left, dtype=complex)
    m0, m1 = exp_moments(-kappa * h, 1)
    m0 = complex(m0)
    m1 = complex(m1)
    decay = np.exp(-kappa * h)
    # near end weight (m0 - m1), far end weight m1
    loc_l = h * ((m0 - m1) * u_left[1:] + m1 * u_right[:-1])
    loc_r = h * ((m0 - m1) * u_right[:-1] + m1 * u_left[1:])
    L = np.zeros(u_right.shape, dtype=complex)
    R = np.zeros(u_right.shape, dtype=complex)
    L[1:] = lfilter([1.0], [1.0, -decay], loc_l)
    R[:-1] = lfilter([1.0], [1.0, -decay], loc_r[::-1])[::-1]
    return L, R


def phi_weights(z):
    """Weights (w_old, w_new) / dt for int_0^dt exp(beta (dt - s)) F_lin(s) ds, z = beta dt."""
    m0, m1 = exp_moments(z, 1)
    return m1, m0 - m1
