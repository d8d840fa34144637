"""One-dimensional acoustic point interactions: thin spring-loaded walls in a pipe.

Submodules
----------
core         physical parameters, discretized states, scalar product, energy
single_wall  closed-form solution for one wall
krein        finite-array resolvent, Gamma matrix, zero modes, scattering
timedomain   characteristics-based simulator (independent dynamical oracle)
bands        periodic lattice: band edges, dispersion branches, Bloch modes
cli          command line front end
"""

from pointacoustics.core import (
    EnergyBreakdown,
    Grid,
    Medium,
    OscillatorArray,
    SystemState,
    energy,
    inner_product,
)

__all__ = [
    "EnergyBreakdown",
    "Grid",
    "Medium",
    "OscillatorArray",
    "SystemState",
    "energy",
    "inner_product",
]

__version__ = "0.1.0"
