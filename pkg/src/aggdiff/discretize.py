"""Cell averages, the interaction-kernel table and discrete convolution."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import eigvalsh, toeplitz

from .grid import Mesh
from .model import ConfigurationError, ModelSpec

# 5-node Gauss-Legendre on [-1/2, 1/2], weights summing to 1.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)
GL_NODES = 0.5 * _GL_NODES
GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _averages(f, left, dx, what):
    """Averages of ``f`` over ``[left, left + dx]`` for each entry of ``left``."""
    left = np.asarray(left, dtype=float)
    pts = left[:, None] + dx * (0.5 + GL_NODES[None, :])
    with np.errstate(all="ignore"):
        vals = np.asarray(f(pts), dtype=float)
    vals = np.broadcast_to(vals, pts.shape)
    bad = ~np.all(np.isfinite(vals), axis=1)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ConfigurationError(f"{what} is not finite on [{left[k]:g}, {left[k] + dx:g}]")
    return vals @ GL_WEIGHTS


def cell_average(f, cell: int, mesh: Mesh) -> float:
    """Average of ``f`` over cell ``cell`` (0-based) by 5-point Gauss-Legendre."""
    if not 0 <= cell < mesh.cell_count:
        raise IndexError(f"cell {cell} outside 0..{mesh.cell_count - 1}")
    return float(_averages(f, mesh.interfaces[cell : cell + 1], mesh.dx, f"function on cell {cell + 1}")[0])


def cell_averages(f, mesh: Mesh, what: str = "function") -> np.ndarray:
    """Averages of ``f`` over every cell."""
    return _averages(f, mesh.interfaces[:-1], mesh.dx, what)


def discretize_initial(rho0, mesh: Mesh) -> np.ndarray:
    rho = cell_averages(rho0, mesh, "initial datum")
    if np.any(rho < 0):
        i = int(np.argmax(rho < 0))
        raise ConfigurationError(f"initial datum has negative average {rho[i]:g} on cell {i + 1}")
    return rho


def discretize_potential(V, mesh: Mesh) -> np.ndarray:
    return cell_averages(V, mesh, "V")


@dataclass(frozen=True)
class KernelTable:
    """Values ``W_k`` for offsets ``k = -(2M-1) .. 2M-1``.

    ``W_k`` is the average of ``W`` over ``[k dx - dx/2, k dx + dx/2]``, i.e.
    the average of ``W(x_i - s)`` over cell ``C_j`` with ``i - j = k``.
    """

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (2 * self.mesh.cell_count - 1,):
            raise ValueError(f"kernel table needs {2 * self.mesh.cell_count - 1} values, got {vals.shape}")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dx(self) -> float:
        return self.mesh.dx

    @property
    def offsets(self) -> np.ndarray:
        n = self.mesh.cell_count
        return np.arange(-(n - 1), n)

    def value(self, k: int) -> float:
        return float(self.values[k + self.mesh.cell_count - 1])

    @cached_property
    def matrix(self) -> np.ndarray:
        """Toeplitz matrix ``T[i, j] = W_{i-j}``."""
        n = self.mesh.cell_count
        col = self.values[n - 1 :]  # W_0, W_1, ..., W_{n-1}
        row = self.values[n - 1 :: -1]  # W_0, W_{-1}, ..., W_{-(n-1)}
        T = toeplitz(col, row)
        T.flags.writeable = False
        return T

    @cached_property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    @cached_property
    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.values - self.values[::-1])))


def build_kernel(W, mesh: Mesh) -> KernelTable:
    n = mesh.cell_count
    k = np.arange(-(n - 1), n)
    left = (k - 0.5) * mesh.dx
    return KernelTable(mesh, _averages(W, left, mesh.dx, "W"))


def convolve(table: KernelTable, rho) -> np.ndarray:
    """``(W * rho)_i = sum_j W_{i-j} rho_j dx``; rows of a 2D ``rho`` are independent."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape[-1] != table.mesh.cell_count:
        raise ValueError("density and kernel table live on different meshes")
    if table.is_zero:
        return np.zeros_like(rho)
    return (rho @ table.matrix.T) * table.dx


class Definiteness(enum.Enum):
    POSITIVE_SEMIDEFINITE = "positive_semidefinite"
    NEGATIVE_SEMIDEFINITE = "negative_semidefinite"
    INDEFINITE = "indefinite"


@dataclass(frozen=True)
class DefinitenessReport:
    kind: Definiteness
    degenerate: bool
    eig_min: float
    eig_max: float
    tolerance: float
    asymmetric: bool

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "degenerate": self.degenerate,
            "eig_min": self.eig_min,
            "eig_max": self.eig_max,
            "tolerance": self.tolerance,
            "asymmetric": self.asymmetric,
        }


def kernel_definiteness(table: KernelTable) -> DefinitenessReport:
    """Classify the symmetric part of ``T[i, j] = W_{i-j}`` by its extreme eigenvalues.

    Eigenvalues within ``1e-10 * ||T||_inf`` of zero count as zero.  A zero
    kernel is reported positive semidefinite with ``degenerate`` set.
    """
    T = table.matrix
    norm = float(np.max(np.sum(np.abs(T), axis=1)))
    tol = 1e-10 * norm
    asym = table.asymmetry > tol
    if asym:
        warnings.warn(
            f"interaction kernel is not even (max |W_k - W_-k| = {table.asymmetry:.3e}); "
            "classifying its symmetric part",
            stacklevel=2,
        )
    if norm == 0:
        return DefinitenessReport(Definiteness.POSITIVE_SEMIDEFINITE, True, 0.0, 0.0, 0.0, False)
    eig = eigvalsh(0.5 * (T + T.T))
    lo, hi = float(eig[0]), float(eig[-1])
    if lo >= -tol:
        kind = Definiteness.POSITIVE_SEMIDEFINITE
    elif hi <= tol:
        kind = Definiteness.NEGATIVE_SEMIDEFINITE
    else:
        kind = Definiteness.INDEFINITE
    degenerate = lo >= -tol and hi <= tol
    return DefinitenessReport(kind, degenerate, lo, hi, tol, asym)


@dataclass(frozen=True)
class DiscreteProblem:
    """A model sampled on a mesh: initial cells, ``V_i`` and the kernel table."""

    model: ModelSpec
    mesh: Mesh
    rho0: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    kernel: KernelTable = field(repr=False)

    @property
    def mass(self) -> float:
        return float(np.sum(self.rho0) * self.mesh.dx)


def discretize(model: ModelSpec, mesh: Mesh, rho0=None) -> DiscreteProblem:
    """Sample ``model`` on ``mesh``; ``rho0`` overrides the initial cells."""
    model.validate(mesh.L)
    if rho0 is None:
        cells = discretize_initial(model.rho0, mesh)
    else:
        cells = mesh.check_cells(rho0, "rho0").copy()
        if np.any(cells < 0):
            raise ConfigurationError("initial cells must be nonnegative")
    if model.positivity_required and np.any(cells <= 0):
        raise ConfigurationError(f"{model.energy.name} needs strictly positive initial cells")
    return DiscreteProblem(model, mesh, cells, discretize_potential(model.V, mesh), build_kernel(model.W, mesh))
