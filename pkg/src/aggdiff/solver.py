"""Implicit upwind finite-volume stepper.

One step solves

    (rho_i - rho^n_i) / dt + (F_{i+1/2} - F_{i-1/2}) / dx = 0,
    F_{i+1/2} = rho_i u^+ + rho_{i+1} u^-,   u = -(xi_{i+1} - xi_i) / dx,
    xi_i = H'(rho_i) + V_i + (W * rho**)_i,

with zero boundary fluxes.  For frozen velocities the system is linear and
tridiagonal (:func:`transport_solve`); the map ``G(theta)`` = transport solve
with velocities computed from ``theta`` has the new density as fixed point.
``G`` is iterated with damping.  Large ``dt / dx^2`` makes that iteration
expansive for stiff diffusion, so the default ``auto`` method falls back to a
Newton iteration on the scheme residual when the damped iteration stalls.
Either way the returned density is a transport-solve output, so mass is
conserved and nonnegativity holds by construction.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import solve_banded

from .diagnostics import discrete_energy
from .discretize import DiscreteProblem, convolve
from .grid import TimeGrid, Trajectory, cell_divergence, expected_levels, face_gradient
from .model import ConfigurationError

METHODS = ("auto", "picard", "newton")


class SolverError(RuntimeError):
    """Base class for step failures; ``step`` is filled in by :func:`run`."""

    step: int | None = None


class NonConvergenceError(SolverError):
    def __init__(self, message: str, history):
        super().__init__(message)
        self.history = list(history)


class PositivityError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Outer-iteration controls.

    ``damping`` is the starting relaxation; it halves (floor 1/16) after five
    consecutive non-decreasing residuals.  ``picard_budget`` is the number of
    damped iterations ``auto`` tries before switching to Newton.
    """

    tol: float = 1e-10
    max_outer_iters: int = 200
    damping: float = 1.0
    method: str = "auto"
    picard_budget: int = 30

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError(f"solver tol must be positive, got {self.tol!r}")
        if int(self.max_outer_iters) != self.max_outer_iters or self.max_outer_iters < 1:
            raise ConfigurationError(f"max_outer_iters must be a positive integer, got {self.max_outer_iters!r}")
        if not 0 < self.damping <= 1:
            raise ConfigurationError(f"damping must lie in (0, 1], got {self.damping!r}")
        if self.method not in METHODS:
            raise ConfigurationError(f"solver method must be one of {METHODS}, got {self.method!r}")


MIN_DAMPING = 1.0 / 16


@dataclass
class StepReport:
    step: int
    outer_iters: int
    final_residual: float
    scheme_residual: float
    method: str
    damping: float
    mass_before: float
    mass_after: float
    energy_before: float
    energy_after: float
    min_density: float
    max_density: float

    @property
    def dissipation_slack(self) -> float:
        return self.energy_before - self.energy_after

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dissipation_slack"] = self.dissipation_slack
        return d


# ------------------------------------------------------------ scheme pieces


def entropy_variables(rho, rho_ss, energy, V, kernel) -> np.ndarray:
    """``xi_i = H'(rho_i) + V_i + (W * rho**)_i``."""
    rho = np.asarray(rho, dtype=float)
    if energy.requires_positivity and np.any(rho <= 0):
        i = int(np.argmax(rho <= 0))
        raise PositivityError(f"{energy.name} needs positive densities; cell {i + 1} holds {rho[i]:g}")
    xi = np.asarray(energy.dH(rho), dtype=float) + V
    if not kernel.is_zero:
        xi = xi + convolve(kernel, rho_ss)
    return xi


def velocities(xi, dx: float) -> np.ndarray:
    return -face_gradient(xi, dx)


def upwind_flux(rho, u) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    return rho[:-1] * np.maximum(u, 0.0) + rho[1:] * np.minimum(u, 0.0)


def transport_matrix_bands(u, dt: float, dx: float):
    """Sub-, main and super-diagonal of the frozen-velocity system."""
    u = np.asarray(u, dtype=float)
    lam = dt / dx
    up = lam * np.maximum(u, 0.0)
    um = lam * np.minimum(u, 0.0)
    diag = np.ones(len(u) + 1)
    diag[:-1] += up
    diag[1:] -= um
    return -up, diag, um


PIVOT_FLOOR = 1.0 - 1e-12


def transport_solve(rho_n, u, dt: float, dx: float) -> np.ndarray:
    """Solve the upwind transport system for frozen interface velocities ``u``.

    Row ``i``: ``theta_i (1 + lam(u+_{i+1/2} - u-_{i-1/2})) + lam u-_{i+1/2} theta_{i+1}
    - lam u+_{i-1/2} theta_{i-1} = rho^n_i`` with ``lam = dt/dx``.  Columns sum
    to one and off-diagonals are nonpositive, so forward elimination keeps
    every pivot at least 1 and maps nonnegative data to nonnegative output.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    rho_n = np.asarray(rho_n, dtype=float)
    n = rho_n.shape[0]
    if n == 1:
        return rho_n.copy()
    sub, diag, sup = transport_matrix_bands(u, dt, dx)
    sub = sub.tolist()
    sup = sup.tolist()
    d = diag.tolist()
    r = rho_n.tolist()
    # Forward elimination without pivoting.
    piv = d[0]
    cp = [0.0] * (n - 1)
    y = [0.0] * n
    if piv < PIVOT_FLOOR:
        raise SolverError(f"transport pivot {piv!r} below 1")
    cp[0] = sup[0] / piv
    y[0] = r[0] / piv
    for i in range(1, n):
        a = sub[i - 1]
        piv = d[i] - a * cp[i - 1]
        if piv < PIVOT_FLOOR:
            raise SolverError(f"transport pivot {piv!r} below 1 in row {i + 1}")
        if i < n - 1:
            cp[i] = sup[i] / piv
        y[i] = (r[i] - a * y[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        y[i] -= cp[i] * y[i + 1]
    return np.array(y)


def transport_matrix(u, dt: float, dx: float) -> np.ndarray:
    """Dense form of the transport system (for checks)."""
    sub, diag, sup = transport_matrix_bands(u, dt, dx)
    return np.diag(diag) + np.diag(sub, -1) + np.diag(sup, 1)


def scheme_residual(rho_new, rho_old, u, dt: float, dx: float) -> np.ndarray:
    """``(rho^{n+1} - rho^n)/dt + div F`` with fluxes from ``rho_new`` and ``u``."""
    return (np.asarray(rho_new) - rho_old) / dt + cell_divergence(upwind_flux(rho_new, u), dx)


# ------------------------------------------------------------ implicit step


class _StepProblem:
    """The fixed-point map and the scheme residual for one time step."""

    def __init__(self, problem: DiscreteProblem, rho_n, dt):
        self.p = problem
        self.energy = problem.model.energy
        self.policy = problem.model.policy
        self.rho_n = np.asarray(rho_n, dtype=float)
        self.dt = dt
        self.dx = problem.mesh.dx
        self.lam = dt / self.dx

    def velocity(self, theta):
        rho_ss = self.policy.combine(self.rho_n, theta)
        xi = entropy_variables(theta, rho_ss, self.energy, self.p.V, self.p.kernel)
        return velocities(xi, self.dx)

    def G(self, theta):
        u = self.velocity(theta)
        return transport_solve(self.rho_n, u, self.dt, self.dx), u

    def residual(self, theta):
        """Scheme residual scaled by ``dt``: ``theta - rho^n + lam * div F``."""
        u = self.velocity(theta)
        F = upwind_flux(theta, u)
        return theta - self.rho_n + self.lam * np.diff(np.pad(F, 1))

    def jacobian_solve(self, theta, rhs):
        """Solve ``J delta = rhs`` for the Jacobian of :meth:`residual`."""
        n = len(theta)
        dx, lam = self.dx, self.lam
        u = self.velocity(theta)
        up, um = np.maximum(u, 0.0), np.minimum(u, 0.0)
        # dF_f/du_f: upwind density (mean when u_f = 0).
        dFdu = np.where(u > 0, theta[:-1], np.where(u < 0, theta[1:], 0.5 * (theta[:-1] + theta[1:])))
        with np.errstate(divide="ignore", invalid="ignore"):
            h2 = np.asarray(self.energy.d2H(theta), dtype=float)
        if not np.all(np.isfinite(h2)):
            return None
        c = self.policy.weight
        dense = not self.p.kernel.is_zero and c != 0
        # u_f = -(xi_{f+1} - xi_f)/dx, xi' = diag(h2) (+ c dx T)
        # F_f depends on theta_f, theta_{f+1} directly and on u_f.
        if not dense:
            # du_f/dtheta_f = h2_f/dx, du_f/dtheta_{f+1} = -h2_{f+1}/dx
            dF_left = up + dFdu * h2[:-1] / dx  # dF_f / dtheta_f
            dF_right = um - dFdu * h2[1:] / dx  # dF_f / dtheta_{f+1}
            # (J)_{i,i} = 1 + lam(dF_i/dtheta_i - dF_{i-1}/dtheta_i)
            main = np.ones(n)
            main[:-1] += lam * dF_left
            main[1:] -= lam * dF_right
            upper = lam * dF_right  # J_{i,i+1} = lam dF_i/dtheta_{i+1}
            lower = -lam * dF_left  # J_{i+1,i} = -lam dF_i/dtheta_i
            ab = np.zeros((3, n))
            ab[0, 1:] = upper
            ab[1] = main
            ab[2, :-1] = lower
            try:
                return solve_banded((1, 1), ab, rhs)
            except (np.linalg.LinAlgError, ValueError):
                return None
        Jxi = c * dx * np.array(self.p.kernel.matrix)
        Jxi[np.diag_indices(n)] += h2
        dU = -(Jxi[1:] - Jxi[:-1]) / dx  # du_f / dtheta, shape (n-1, n)
        dF = dFdu[:, None] * dU
        idx = np.arange(n - 1)
        dF[idx, idx] += up
        dF[idx, idx + 1] += um
        J = np.eye(n)
        J[:-1] += lam * dF
        J[1:] -= lam * dF
        try:
            return np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError:
            return None


def _stop(theta, g, tol):
    r = float(np.max(np.abs(g - theta))) if len(theta) else 0.0
    return r, r <= tol * (1.0 + float(np.max(np.abs(theta), initial=0.0)))


POLISH_LIMIT = 3


class _Acceptance:
    """Stop test plus scheme consistency of the returned density.

    A small fixed-point defect still leaves a scheme residual of order
    ``|u'| defect / dx``.  Once the defect test passes, up to
    ``POLISH_LIMIT`` further iterations are spent until
    ``|residual|_inf <= 10 tol max(1, |rho|_inf) / dt``.
    """

    def __init__(self, sp, tol):
        self.sp, self.tol, self.polish = sp, tol, 0

    def __call__(self, g, ok) -> bool:
        if not ok:
            return False
        sp = self.sp
        res = scheme_residual(g, sp.rho_n, sp.velocity(g), sp.dt, sp.dx)
        if np.max(np.abs(res), initial=0.0) * sp.dt <= 10 * self.tol * max(1.0, float(np.max(g, initial=0.0))):
            return True
        self.polish += 1
        return self.polish > POLISH_LIMIT


def implicit_step(problem: DiscreteProblem, rho_n, dt: float, config: SolverConfig = SolverConfig(), step: int = 0):
    """Advance one step; returns ``(rho^{n+1}, StepReport, u)``.

    The stopping test is ``||G(theta) - theta||_inf <= tol (1 + ||theta||_inf)``
    and the returned density is ``G(theta)`` for the final iterate.
    """
    rho_n = np.asarray(rho_n, dtype=float)
    sp = _StepProblem(problem, rho_n, dt)
    history: list[float] = []
    theta = rho_n.copy()
    omega = config.damping
    iters = 0
    result = None
    accept = _Acceptance(sp, config.tol)
    method = "picard"

    if config.method in ("auto", "picard"):
        auto = config.method == "auto"
        budget = min(config.picard_budget, config.max_outer_iters) if auto else config.max_outer_iters
        nondecreasing = 0
        best = (math.inf, theta)
        while iters < budget:
            g, u = sp.G(theta)
            iters += 1
            r, ok = _stop(theta, g, config.tol)
            if not math.isfinite(r):
                break
            if history and r >= history[-1]:
                nondecreasing += 1
            else:
                nondecreasing = 0
            history.append(r)
            if accept(g, ok):
                result = (g, u)
                break
            if r < best[0]:
                best = (r, theta)
            if auto and _picard_too_slow(history, config.tol * (1.0 + float(np.max(np.abs(theta))))):
                break
            if nondecreasing >= 5:
                omega = max(0.5 * omega, MIN_DAMPING)
                nondecreasing = 0
            theta = (1.0 - omega) * theta + omega * g
        theta = best[1]

    if result is None and config.method in ("auto", "newton"):
        method = "newton"
        result, iters = _newton(sp, theta, config, history, iters, problem.model.energy, accept)

    if result is None:
        raise NonConvergenceError(
            f"outer iteration did not converge in {iters} iterations "
            f"(last residual {history[-1] if history else float('nan'):.3e})",
            history,
        )
    rho_new, u = result
    if problem.model.positivity_required and np.any(rho_new <= 0):
        raise PositivityError(f"density lost strict positivity (min {rho_new.min():g})")
    dx = problem.mesh.dx
    res = scheme_residual(rho_new, rho_n, sp.velocity(rho_new), dt, dx)
    report = StepReport(
        step=step,
        outer_iters=iters,
        final_residual=history[-1],
        scheme_residual=float(np.max(np.abs(res))),
        method=method,
        damping=omega,
        mass_before=math.fsum(rho_n) * dx,
        mass_after=math.fsum(rho_new) * dx,
        energy_before=discrete_energy(rho_n, problem.model.energy, problem.V, problem.kernel),
        energy_after=discrete_energy(rho_new, problem.model.energy, problem.V, problem.kernel),
        min_density=float(rho_new.min()),
        max_density=float(rho_new.max()),
    )
    return rho_new, report, u


def _picard_too_slow(history, target, horizon: int = 10) -> bool:
    """True when the observed contraction rate needs more than ``horizon`` further iterations."""
    if len(history) < 3:
        return False
    q = history[-1] / history[-2] if history[-2] > 0 else 0.0
    if q >= 1.0:
        return True
    if q <= 0.0:
        return False
    return math.log(target / history[-1]) / math.log(q) > horizon


def _newton(sp: _StepProblem, theta, config, history, iters, energy, accept):
    """Newton on the scheme residual with Armijo backtracking.

    Falls back to a plain ``G`` step when the Newton direction fails.
    Returns ``((rho, u), iterations)`` or ``(None, iterations)``.
    """
    positive = energy.requires_positivity
    R = sp.residual(theta)
    nR = float(np.linalg.norm(R))
    while iters < config.max_outer_iters:
        g, u = sp.G(theta)
        iters += 1
        r, ok = _stop(theta, g, config.tol)
        history.append(r)
        if accept(g, ok):
            return (g, u), iters
        delta = sp.jacobian_solve(theta, -R)
        accepted = False
        if delta is not None and np.all(np.isfinite(delta)):
            alpha = 1.0
            if positive:
                neg = delta < 0
                if np.any(neg):
                    alpha = min(1.0, 0.9 * float(np.min(theta[neg] / -delta[neg])))
            while alpha > 1e-10:
                trial = theta + alpha * delta
                if not positive:
                    trial = np.maximum(trial, 0.0)
                try:
                    Rt = sp.residual(trial)
                except PositivityError:
                    Rt = None
                if Rt is not None and np.all(np.isfinite(Rt)):
                    nRt = float(np.linalg.norm(Rt))
                    if nRt <= (1.0 - 1e-4 * alpha) * nR:
                        theta, R, nR = trial, Rt, nRt
                        accepted = True
                        break
                alpha *= 0.5
        if not accepted:
            theta = g
            R = sp.residual(theta)
            nR = float(np.linalg.norm(R))
    return None, iters


# --------------------------------------------------------------------- run


@dataclass
class RunResult:
    trajectory: Trajectory
    reports: list[StepReport]
    faces: list | None = None
    elapsed: float = 0.0


def run(
    problem: DiscreteProblem,
    timegrid: TimeGrid,
    config: SolverConfig = SolverConfig(),
    snapshot_cadence: int = 1,
    record_faces: bool = False,
    steps: int | None = None,
) -> RunResult:
    """March ``timegrid.intervals`` steps (or ``steps``) from the initial cells.

    Snapshots are kept every ``snapshot_cadence`` steps plus the final one.
    With ``record_faces`` the velocities and fluxes of every step are kept.
    """
    nsteps = timegrid.intervals if steps is None else int(steps)
    if nsteps != timegrid.intervals:
        timegrid = TimeGrid(timegrid.dt * nsteps, nsteps)
    dt = timegrid.dt
    levels = expected_levels(nsteps, snapshot_cadence)
    keep = set(levels.tolist())
    rho = problem.rho0.copy()
    snaps = [rho.copy()]
    reports = []
    faces = [] if record_faces else None
    t0 = time.perf_counter()
    for n in range(nsteps):
        try:
            rho, report, u = implicit_step(problem, rho, dt, config, step=n)
        except SolverError as err:
            err.step = n
            err.args = (f"step {n}: {err.args[0]}",)
            raise
        reports.append(report)
        if record_faces:
            faces.append((u, upwind_flux(rho, u)))
        if n + 1 in keep:
            snaps.append(rho.copy())
    traj = Trajectory(problem.mesh, timegrid, np.array(snaps), levels, snapshot_cadence)
    return RunResult(traj, reports, faces, time.perf_counter() - t0)
