"""Implicit upwind finite-volume solver for 1D aggregation-diffusion equations."""

__version__ = "0.1.0"

from .discretize import DiscreteProblem, build_kernel, convolve, discretize, kernel_definiteness
from .grid import Mesh, TimeGrid, Trajectory, build_mesh
from .model import (
    ConfigurationError,
    EnergyFamily,
    ModelSpec,
    RhoPolicy,
    build_auxiliary,
    entropic_average,
    make_initial_datum,
    make_potential,
)
from .solver import SolverConfig, implicit_step, run, transport_solve

__all__ = [
    "ConfigurationError",
    "DiscreteProblem",
    "EnergyFamily",
    "Mesh",
    "ModelSpec",
    "RhoPolicy",
    "SolverConfig",
    "TimeGrid",
    "Trajectory",
    "build_auxiliary",
    "build_kernel",
    "build_mesh",
    "convolve",
    "discretize",
    "entropic_average",
    "implicit_step",
    "kernel_definiteness",
    "make_initial_datum",
    "make_potential",
    "run",
    "transport_solve",
]
