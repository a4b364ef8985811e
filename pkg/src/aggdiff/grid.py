"""Uniform primal/dual meshes on (-L, L), time grids and discrete operators.

Cell fields are 1D float arrays of length ``2M`` (cell ``i`` of the
documentation is stored at index ``i - 1``).  Face fields hold the ``2M - 1``
interior interfaces ``x_{i+1/2}``, ``i = 1..2M-1``; the two boundary
interfaces are never stored and are treated as exactly zero (no-flux).

Norms use ``math.fsum`` so sums are correctly rounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of ``2M`` cells of width ``dx = L / M`` on ``(-L, L)``."""

    half_length: float
    half_cells: int
    dx: float = field(init=False)
    centers: np.ndarray = field(init=False, repr=False)
    interfaces: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.half_length > 0 and math.isfinite(self.half_length)):
            raise ValueError(f"half_length must be positive and finite, got {self.half_length!r}")
        if int(self.half_cells) != self.half_cells or self.half_cells < 1:
            raise ValueError(f"half_cells must be a positive integer, got {self.half_cells!r}")
        L, M = float(self.half_length), int(self.half_cells)
        dx = L / M
        i = np.arange(1, 2 * M + 1)
        centers = -L + dx * (i - 0.5)
        interfaces = -L + dx * np.arange(0, 2 * M + 1)
        centers.flags.writeable = False
        interfaces.flags.writeable = False
        object.__setattr__(self, "half_length", L)
        object.__setattr__(self, "half_cells", M)
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "interfaces", interfaces)

    @property
    def L(self) -> float:
        return self.half_length

    @property
    def M(self) -> int:
        return self.half_cells

    @property
    def cell_count(self) -> int:
        return 2 * self.half_cells

    @property
    def face_count(self) -> int:
        return 2 * self.half_cells - 1

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    def refined(self, factor: int = 2) -> "Mesh":
        return Mesh(self.half_length, self.half_cells * factor)

    def check_cells(self, values, name: str = "field") -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.shape != (self.cell_count,):
            raise ValueError(f"{name} must have shape ({self.cell_count},), got {arr.shape}")
        return arr

    def check_faces(self, values, name: str = "field") -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.shape != (self.face_count,):
            raise ValueError(f"{name} must have shape ({self.face_count},), got {arr.shape}")
        return arr


def build_mesh(L: float, M: int) -> Mesh:
    return Mesh(L, M)


@dataclass(frozen=True)
class TimeGrid:
    """``N + 1`` equal intervals of length ``dt = T / (N + 1)`` covering ``[0, T]``."""

    horizon: float
    intervals: int
    dt: float = field(init=False)

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon!r}")
        if int(self.intervals) != self.intervals or self.intervals < 1:
            raise ValueError(f"intervals must be a positive integer, got {self.intervals!r}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "intervals", int(self.intervals))
        object.__setattr__(self, "dt", self.horizon / self.intervals)

    @classmethod
    def from_N(cls, T: float, N: int) -> "TimeGrid":
        """Time grid in the ``N + 1`` intervals convention."""
        return cls(T, int(N) + 1)

    @classmethod
    def from_dt(cls, T: float, dt: float) -> "TimeGrid":
        """Smallest grid whose step does not exceed ``dt``.

        When ``T / dt`` is an integer up to rounding the step is ``dt``
        itself (re-derived as ``T / intervals``).
        """
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        ratio = T / dt
        n = round(ratio)
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
            n = max(1, math.ceil(ratio))
        return cls(T, n)

    @property
    def T(self) -> float:
        return self.horizon

    @property
    def N(self) -> int:
        return self.intervals - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.intervals + 1)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.horizon, self.intervals * factor)


def face_gradient(f, dx: float) -> np.ndarray:
    """Discrete gradient ``(f_{i+1} - f_i) / dx`` on the interior interfaces."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] < 2:
        raise ValueError("face_gradient needs at least two cells")
    return np.diff(f, axis=-1) / dx


def cell_divergence(g, dx: float) -> np.ndarray:
    """Discrete divergence ``(g_{i+1/2} - g_{i-1/2}) / dx`` with zero boundary values."""
    g = np.asarray(g, dtype=float)
    pad = [(0, 0)] * (g.ndim - 1) + [(1, 1)]
    return np.diff(np.pad(g, pad), axis=-1) / dx


def lp_norm(f, dx: float, p: float = 2.0) -> float:
    """Discrete ``L^p(Omega)`` norm of a cell or face field."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p!r}")
    a = np.abs(np.asarray(f, dtype=float)).ravel()
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    if p == 1:
        return math.fsum(a) * dx
    return (math.fsum(a**p) * dx) ** (1.0 / p)


def spacetime_lp_norm(f, dx: float, dt: float, p: float = 2.0) -> float:
    """Discrete ``L^p(Q_T)`` norm of a stack of fields, one row per time level."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p!r}")
    a = np.abs(np.asarray(f, dtype=float)).ravel()
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    return (math.fsum(a**p) * dx * dt) ** (1.0 / p)


def mass(rho, dx: float) -> float:
    return math.fsum(np.asarray(rho, dtype=float)) * dx


@dataclass
class Trajectory:
    """Cell densities at the stored time levels.

    ``levels[k]`` is the time index ``n`` of ``densities[k]``.  With cadence 1
    every level ``0..N+1`` is present.
    """

    mesh: Mesh
    timegrid: TimeGrid
    densities: np.ndarray
    levels: np.ndarray
    cadence: int = 1

    def __post_init__(self):
        self.densities = np.asarray(self.densities, dtype=float)
        self.levels = np.asarray(self.levels, dtype=int)
        if self.densities.ndim != 2 or self.densities.shape[1] != self.mesh.cell_count:
            raise ValueError("densities must have shape (levels, 2M)")
        if len(self.levels) != len(self.densities):
            raise ValueError("levels and densities disagree in length")
        expected = expected_levels(self.timegrid.intervals, self.cadence)
        if not np.array_equal(self.levels, expected):
            raise ValueError(
                f"snapshot levels inconsistent with cadence {self.cadence} "
                f"over {self.timegrid.intervals} steps"
            )

    @property
    def complete(self) -> bool:
        return self.cadence == 1

    @property
    def times(self) -> np.ndarray:
        return self.levels * self.timegrid.dt

    @property
    def final(self) -> np.ndarray:
        return self.densities[-1]

    def require_complete(self, what: str = "this diagnostic"):
        if not self.complete:
            raise ValueError(f"{what} needs every time level (snapshot cadence 1)")


def expected_levels(steps: int, cadence: int) -> np.ndarray:
    """Stored time indices: every ``cadence``-th level plus the final one."""
    if cadence < 1:
        raise ValueError("snapshot cadence must be >= 1")
    levels = list(range(0, steps + 1, cadence))
    if levels[-1] != steps:
        levels.append(steps)
    return np.asarray(levels, dtype=int)
