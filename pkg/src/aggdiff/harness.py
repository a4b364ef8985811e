"""Run orchestration: diagnostics suite, refinement studies, steady-state runs."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import diagnostics as dg
from . import reference as ref
from .config import RunConfig
from .discretize import DiscreteProblem, discretize, kernel_definiteness
from .grid import Mesh, lp_norm, spacetime_lp_norm
from .model import ConfigurationError, build_auxiliary
from .solver import RunResult, implicit_step, run

TRAJECTORY_CHECKS = {"potential_gradient", "flow_interchange", "grad_H_l2", "translates", "weak_residual"}


@dataclass
class RunArtifacts:
    config: RunConfig
    problem: DiscreteProblem
    result: RunResult
    diagnostics: dict
    elapsed: float


def default_epsilon(problem: DiscreteProblem) -> float:
    """Regularisation used when ``H''(s)/s`` is not integrable: ``1e-8 max rho^0``."""
    return 1e-8 * max(float(problem.rho0.max()), 1e-300)


def auxiliary_for(problem: DiscreteProblem, epsilon: float | None = None):
    energy = problem.model.energy
    if epsilon is None:
        exact_ok = not energy.needs_regularisation() or (energy.kind == "porous_medium" and energy.m == 2)
        epsilon = 0.0 if exact_ok else default_epsilon(problem)
    upper = max(1e4, 10.0 * float(problem.mesh.cell_count * problem.mass / problem.mesh.length))
    return build_auxiliary(energy, epsilon, upper=upper)


def default_shifts(span: float, count: int = 6) -> np.ndarray:
    """A decade of shifts between ``span/50`` and ``span/5``."""
    return np.logspace(math.log10(span / 50), math.log10(span / 5), count)


def run_diagnostics(cfg: RunConfig, problem: DiscreteProblem, result: RunResult) -> dict:
    """Evaluate the enabled checks on a finished run."""
    traj = result.trajectory
    dt = traj.timegrid.dt
    model = problem.model
    energy = model.energy
    constants = dg.bound_constants(
        model, problem.mesh, problem.mass, dt, traj.timegrid.intervals, float(problem.rho0.max())
    )
    checks = cfg.checks
    if not checks:
        return {"constants": constants.to_dict()}
    out: dict = {"constants": constants.to_dict(), "checks": {}, "values": {}, "notes": list(cfg.warnings)}
    if result.reports:
        out["steps"] = [r.to_dict() for r in result.reports]
    out["kernel_definiteness"] = kernel_definiteness(problem.kernel).to_dict()
    skipped = [c for c in checks if c in TRAJECTORY_CHECKS and not traj.complete]
    for c in skipped:
        out["notes"].append(f"{c} skipped: needs every time level")
    active = [c for c in checks if c not in skipped]
    if "energy" in active:
        if result.reports:
            rep = dg.dissipation_check(result.reports)
        else:
            rep = dg.energy_sequence_check(traj, problem)
        out["checks"]["energy_dissipation"] = rep.to_dict()
    if "potential_gradient" in active:
        out["checks"]["potential_gradient_bound"] = dg.potential_gradient_check(traj, problem, constants).to_dict()
    if "linf_envelope" in active:
        out["checks"]["linf_envelope"] = dg.linf_envelope_check(traj, constants, dt).to_dict()
    if "flow_interchange" in active:
        aux = None if energy.kind == "boltzmann" else auxiliary_for(problem, cfg.epsilon)
        rep = dg.flow_interchange_check(traj, problem, aux, constants, dt, alpha=cfg.alpha)
        out["checks"][rep.name] = rep.to_dict()
    if "grad_H_l2" in active:
        out["values"]["grad_H_l2"] = dg.grad_H_l2(traj, energy, dt)
        if energy.kind == "boltzmann":
            out["values"]["grad_rho_l2"] = dg.grad_rho_l2(traj, dt)
    if "translates" in active and len(traj.densities) > 2:
        scans = {}
        for which, span in (("time", traj.timegrid.T), ("space", traj.mesh.length)):
            scan = dg.translate_scan(traj, energy, which, default_shifts(span), dt)
            scans[which] = {"shifts": [s for s, _ in scan], "integrals": [v for _, v in scan],
                            "fitted_exponent": dg.fitted_exponent(scan)}
        out["values"]["translates"] = scans
    if "weak_residual" in active:
        res = {}
        for k in (0, 1, 2):
            phi = dg.cosine_test_function(k, traj.mesh.L, traj.timegrid.T)
            res[f"k={k}"] = dg.weak_residual(traj, problem, phi)
        out["values"]["weak_residual"] = res
    return out


def execute_run(cfg: RunConfig) -> RunArtifacts:
    """Discretize, march and evaluate diagnostics for one configuration."""
    t0 = time.perf_counter()
    problem = discretize(cfg.model, cfg.mesh)
    result = run(problem, cfg.timegrid, cfg.solver, snapshot_cadence=1, record_faces=cfg.faces)
    diag = run_diagnostics(cfg, problem, result)
    return RunArtifacts(cfg, problem, result, diag, time.perf_counter() - t0)


# ------------------------------------------------------------ references


def reference_solution(name: str, cfg: RunConfig, mesh: Mesh, t: float, mass: float, V_cells=None) -> np.ndarray:
    """Cell averages of the named reference on ``mesh`` at time ``t``."""
    model = cfg.model
    if name == "heat_neumann":
        if model.energy.kind != "boltzmann" or not (model.V.is_zero and model.W.is_zero):
            raise ConfigurationError("heat_neumann needs the boltzmann energy with V = W = zero")
        return ref.heat_neumann(model.rho0, mesh, t)
    if name == "gibbs_steady":
        return ref.gibbs_steady(model.V, mesh, mass)
    if name == "gibbs_discrete":
        if V_cells is None:
            from .discretize import discretize_potential

            V_cells = discretize_potential(model.V, mesh)
        return ref.gibbs_discrete(V_cells, mesh.dx, mass)
    if name == "pme_barenblatt_steady":
        if model.energy.kind != "porous_medium" or not model.W.is_zero:
            raise ConfigurationError("pme_barenblatt_steady needs a porous-medium energy and W = zero")
        return ref.pme_barenblatt_steady(model.V, model.energy.m, mesh, mass)
    raise ConfigurationError(f"unknown reference {name!r}")


# --------------------------------------------------------- refinement


@dataclass
class StudyRow:
    level: int
    M: int
    h: float
    dx: float
    dt: float
    error_L1: float
    error_L2: float
    error_L2_spacetime: float
    eoc_L1: float = math.nan
    eoc_L2: float = math.nan
    degenerate: bool = False


@dataclass
class StudyResult:
    rows: list
    reference: str
    reference_name: str | None
    ratio_c: float
    elapsed: float = 0.0
    levels: list = field(default_factory=list)

    def eoc(self, norm: str = "L1") -> list:
        return [getattr(r, f"eoc_{norm}") for r in self.rows[1:]]

    def to_dict(self) -> dict:
        def clean(d):
            return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}

        return {
            "reference": self.reference,
            "reference_name": self.reference_name,
            "c": self.ratio_c,
            "rows": [clean(asdict(r)) for r in self.rows],
            "elapsed": self.elapsed,
        }


def observed_orders(errors, floor: float = 0.0):
    """``log2(e_l / e_{l+1})``; NaN with a degeneracy flag when an error is at or below ``floor``."""
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        if not (a > floor and b > floor):
            out.append((math.nan, True))
        else:
            out.append((math.log2(a / b), False))
    return out


def aggregate(fine, factor: int) -> np.ndarray:
    """Average groups of ``factor`` neighbouring cells (last axis)."""
    fine = np.asarray(fine, dtype=float)
    return fine.reshape(fine.shape[:-1] + (-1, factor)).mean(axis=-1)


def refinement_study(cfg: RunConfig, levels: int = 3, reference: str = "analytic") -> StudyResult:
    """Errors at the final time under coupled halving of ``dx`` and ``dt``.

    ``reference='analytic'`` uses ``scenario.reference``; ``'finest'`` uses
    the last level, aggregated onto each coarser mesh, so that level
    contributes no row.
    """
    if levels < 3:
        raise ConfigurationError("a refinement study needs at least 3 levels")
    if reference not in ("analytic", "finest"):
        raise ConfigurationError("reference must be 'analytic' or 'finest'")
    name = cfg.scenario.get("reference") if reference == "analytic" else None
    if reference == "analytic" and name is None:
        raise ConfigurationError("scenario.reference is required for an analytic study")
    t0 = time.perf_counter()
    runs = []
    for ell in range(levels):
        c = cfg.refined(2**ell)
        p = discretize(c.model, c.mesh)
        try:
            r = run(p, c.timegrid, c.solver)
        except Exception as err:
            if hasattr(err, "args") and err.args:
                err.args = (f"level {ell}: {err.args[0]}",) + tuple(err.args[1:])
            raise
        runs.append((c, p, r))
    T = cfg.timegrid.T
    errs1, errs2, errst = [], [], []
    measured = runs if reference == "analytic" else runs[:-1]
    fine_c, fine_p, fine_r = runs[-1]
    for ell, (c, p, r) in enumerate(measured):
        traj = r.trajectory
        dx = c.mesh.dx
        if reference == "analytic":
            target = reference_solution(name, c, c.mesh, T, p.mass, p.V)
            if name == "heat_neumann":
                stack = np.array([reference_solution(name, c, c.mesh, t, p.mass) for t in traj.times[1:]])
            else:
                stack = np.broadcast_to(target, traj.densities[1:].shape)
        else:
            factor = 2 ** (levels - 1 - ell)
            fine = fine_r.trajectory.densities
            target = aggregate(fine[-1], factor)
            stack = aggregate(fine[factor::factor], factor)
        diff = traj.final - target
        errs1.append(lp_norm(diff, dx, 1))
        errs2.append(lp_norm(diff, dx, 2))
        errst.append(spacetime_lp_norm(traj.densities[1:] - stack, dx, c.timegrid.dt, 2))
    floor = 1e-13 * (1.0 + runs[0][1].mass)
    o1 = observed_orders(errs1, floor)
    o2 = observed_orders(errs2, floor)
    rows = []
    for ell, (c, p, r) in enumerate(measured):
        row = StudyRow(ell, c.mesh.M, c.mesh.dx, c.mesh.dx, c.timegrid.dt, errs1[ell], errs2[ell], errst[ell])
        if ell > 0:
            row.eoc_L1, d1 = o1[ell - 1]
            row.eoc_L2, d2 = o2[ell - 1]
            row.degenerate = d1 or d2
        rows.append(row)
    return StudyResult(rows, reference, name, cfg.mesh.dx / cfg.timegrid.dt, time.perf_counter() - t0,
                       [c.mesh.M for c, _, _ in runs])


# -------------------------------------------------------------- steady


@dataclass
class SteadyResult:
    rho: np.ndarray
    distance: float
    converged: bool
    t: float
    steps: int
    reference_name: str
    rate: float
    reports: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "distance_L1": self.distance,
            "converged": self.converged,
            "t": self.t,
            "steps": self.steps,
            "reference": self.reference_name,
            "final_rate": self.rate,
        }


def default_steady_reference(cfg: RunConfig) -> str:
    if "reference" in cfg.scenario and cfg.scenario["reference"] != "heat_neumann":
        return cfg.scenario["reference"]
    model = cfg.model
    if model.energy.kind == "boltzmann" and model.W.is_zero:
        return "gibbs_discrete"
    if model.energy.kind == "porous_medium" and model.W.is_zero:
        return "pme_barenblatt_steady"
    raise ConfigurationError("no steady reference is known for this model; set scenario.reference")


def steady_state_run(cfg: RunConfig, t_max: float | None = None, residual_tol: float | None = None,
                     rho_init=None, reference_name: str | None = None) -> SteadyResult:
    """March until ``||rho^{n+1} - rho^n||_1 / dt < residual_tol`` or ``t >= t_max``.

    Not reaching the tolerance is reported through ``converged``, not raised.
    """
    t_max = float(t_max if t_max is not None else cfg.scenario.get("t_max", cfg.timegrid.T))
    tol = float(residual_tol if residual_tol is not None else cfg.scenario.get("residual_tol", 1e-10))
    name = reference_name or default_steady_reference(cfg)
    problem = discretize(cfg.model, cfg.mesh, rho0=rho_init)
    target = reference_solution(name, cfg, cfg.mesh, t_max, problem.mass, problem.V)
    dt, dx = cfg.timegrid.dt, cfg.mesh.dx
    rho = problem.rho0.copy()
    t, n, rate, converged = 0.0, 0, math.inf, False
    reports = []
    while t < t_max - 1e-12 * t_max:
        new, report, _ = implicit_step(problem, rho, dt, cfg.solver, step=n)
        reports.append(report)
        rate = lp_norm(new - rho, dx, 1) / dt
        rho = new
        n += 1
        t = n * dt
        if rate < tol:
            converged = True
            break
    return SteadyResult(rho, lp_norm(rho - target, dx, 1), converged, t, n, name, rate, reports)
