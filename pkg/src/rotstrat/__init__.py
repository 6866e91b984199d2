"""Spectral tools for the fast-rotation, strong-stratification limit of the primitive equations.

Subpackages:

* :mod:`rotstrat.spectral` - periodic grids, transforms, projections, norms and snapshot I/O
* :mod:`rotstrat.qg` - potential vorticity and the quasi-geostrophic / oscillating split
* :mod:`rotstrat.linear` - per-mode eigen-decomposition and exact linear propagator
* :mod:`rotstrat.littlewood_paley` - dyadic blocks, Besov and Chemin-Lerner norms
* :mod:`rotstrat.kernel` - dispersive phase, Hessian zones, whole-space kernels and Strichartz scans
* :mod:`rotstrat.solver` - integrating-factor time stepping of the nonlinear systems
* :mod:`rotstrat.lab` - ill-prepared data, epsilon sweeps and rate reports
"""

from .spectral import PhysicalParams, TorusGrid
from .linear import LinearPropagator, eigensystem, propagate
from .qg import decompose
from .solver import SolverConfig, run_coupled, solve_pe, solve_qg
from .lab import ExperimentConfig, epsilon_sweep, validate_config

__version__ = "0.1.0"

__all__ = [
    "PhysicalParams",
    "TorusGrid",
    "LinearPropagator",
    "eigensystem",
    "propagate",
    "decompose",
    "SolverConfig",
    "run_coupled",
    "solve_pe",
    "solve_qg",
    "ExperimentConfig",
    "epsilon_sweep",
    "validate_config",
]
