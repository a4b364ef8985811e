"""Discrete energy and checks of the structural inequalities of the scheme.

All checks are read-only passes over a finished trajectory.  Each returns
an :class:`InequalityReport` whose ``slack`` is right-hand side minus
left-hand side at the worst step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .discretize import convolve
from .grid import Trajectory, face_gradient

SUP_SAMPLES = 2048


# ----------------------------------------------------------------- energy


def discrete_energy(rho, energy, V, kernel) -> float:
    """``sum_i (H(rho_i) + V_i rho_i + 1/2 sum_j W_{i-j} rho_i rho_j dx) dx``."""
    rho = np.asarray(rho, dtype=float)
    dx = kernel.dx
    terms = np.asarray(energy.H_extended(rho), dtype=float) + V * rho
    e = math.fsum(terms) * dx
    if not kernel.is_zero:
        e += 0.5 * float(rho @ (kernel.matrix @ rho)) * dx * dx
    return e


# ----------------------------------------------------------- constants


@dataclass(frozen=True)
class BoundConstants:
    """Constants of the a-priori bounds, from sampled sup-norms.

    ``C_inf`` is the upper envelope at the final step, infinite when
    ``dt * C_V2 >= 1``.  Sampled sup-norms are lower bounds on the true ones.
    """

    C_V1: float
    C_V2: float
    C_inf: float = math.inf
    mass: float = 0.0
    sup: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"C_V1": self.C_V1, "C_V2": self.C_V2, "C_inf": _json_float(self.C_inf), "mass": self.mass, "sup": self.sup}


def _sup(fn, half_width):
    x = np.linspace(-half_width, half_width, SUP_SAMPLES)
    return float(np.max(np.abs(fn(x))))


def bound_constants(model, mesh, rho0_mass: float, dt: float | None = None, steps: int | None = None,
                    rho0_max: float | None = None) -> BoundConstants:
    """``C_V1 = |V'| + |W'| |rho0|_1`` and ``C_V2 = |V''| + |W''| |rho0|_1``."""
    L = mesh.L
    sup = {
        "dV": _sup(model.V.df, L),
        "d2V": _sup(model.V.d2f, L),
        "dW": _sup(model.W.df, 2 * L),
        "d2W": _sup(model.W.d2f, 2 * L),
    }
    m = abs(float(rho0_mass))
    c1 = sup["dV"] + sup["dW"] * m
    c2 = sup["d2V"] + sup["d2W"] * m
    c_inf = math.inf
    if dt is not None and steps is not None and rho0_max is not None and dt * c2 < 1:
        c_inf = (1.0 - dt * c2) ** (-steps) * rho0_max
    return BoundConstants(c1, c2, c_inf, m, sup)


def _json_float(v):
    return v if math.isfinite(v) else str(v)


# ---------------------------------------------------------- reports


@dataclass
class InequalityReport:
    name: str
    holds: bool | None
    slack: float
    location: object = None
    tolerance: float = 0.0
    notes: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "holds": self.holds,
            "slack": _json_float(self.slack),
            "location": self.location,
            "tolerance": self.tolerance,
            "notes": list(self.notes),
            "values": {k: _json_float(v) if isinstance(v, float) else v for k, v in self.values.items()},
        }


def _worst(name, slacks, tols, locations, notes=None, values=None):
    """Report from per-item slacks (RHS - LHS) and tolerances."""
    slacks = np.asarray(slacks, dtype=float)
    tols = np.broadcast_to(np.asarray(tols, dtype=float), slacks.shape)
    if slacks.size == 0:
        return InequalityReport(name, True, math.inf, None, 0.0, list(notes or []), values or {})
    margin = slacks + tols
    k = int(np.argmin(margin))
    holds = bool(np.all(margin >= 0))
    return InequalityReport(name, holds, float(slacks.min()), locations[k], float(tols[k]), list(notes or []), values or {})


def dissipation_check(reports, rel_tol: float = 1e-10) -> InequalityReport:
    """``E(rho^{n+1}) <= E(rho^n) + rel_tol (1 + |E(rho^n)|)`` at every step."""
    slacks = [r.energy_before - r.energy_after for r in reports]
    tols = [rel_tol * (1.0 + abs(r.energy_before)) for r in reports]
    return _worst("energy_dissipation", slacks, tols, [r.step for r in reports])


def energy_sequence_check(traj: Trajectory, problem, rel_tol: float = 1e-10) -> InequalityReport:
    """Dissipation between stored snapshots, for trajectories read back from disk."""
    energy = problem.model.energy
    E = [discrete_energy(r, energy, problem.V, problem.kernel) for r in traj.densities]
    slacks = [a - b for a, b in zip(E[:-1], E[1:])]
    tols = [rel_tol * (1.0 + abs(a)) for a in E[:-1]]
    return _worst("energy_dissipation", slacks, tols, [int(n) for n in traj.levels[1:]])


def potential_gradient_check(traj: Trajectory, problem, constants: BoundConstants, tol: float = 1e-10):
    """``sum |dx V|^2 dx + sum |dx (W * rho**)|^2 dx <= 2 L C_V1^2`` at every step."""
    dx = traj.mesh.dx
    gV = math.fsum(face_gradient(problem.V, dx) ** 2) * dx
    rhs = 2 * traj.mesh.L * constants.C_V1**2
    policy = problem.model.policy
    slacks, locs = [], []
    rho = traj.densities
    for k in range(1, len(rho)):
        rho_ss = policy.combine(rho[k - 1], rho[k]) if traj.complete else rho[k]
        gW = math.fsum(face_gradient(convolve(problem.kernel, rho_ss), dx) ** 2) * dx
        slacks.append(rhs - gV - gW)
        locs.append(int(traj.levels[k]))
    return _worst("potential_gradient_bound", slacks, tol, locs, values={"rhs": rhs})


def linf_envelope_check(traj: Trajectory, constants: BoundConstants, dt: float, rel_tol: float = 1e-10):
    """Upper ``(1 - dt C_V2)^{-n} max rho^0`` and lower ``(1 + dt C_V2)^{-n} min rho^0`` envelopes.

    The upper envelope needs ``dt C_V2 < 1``; otherwise only the lower one is
    checked and a note records the skip.
    """
    rho = traj.densities
    n = traj.levels.astype(float)
    c2 = constants.C_V2
    notes = []
    slacks, tols, locs = [], [], []
    mx0, mn0 = float(rho[0].max()), float(rho[0].min())
    if dt * c2 < 1:
        env = (1.0 - dt * c2) ** (-n) * mx0
        mx = rho.max(axis=1)
        slacks += list(env - mx)
        tols += list(rel_tol * env)
        locs += [("max", int(k)) for k in traj.levels]
    else:
        msg = f"upper envelope skipped: dt*C_V2 = {dt * c2:.3g} >= 1"
        notes.append(msg)
        warnings.warn(msg, stacklevel=2)
    env_lo = (1.0 + dt * c2) ** (-n) * mn0
    mn = rho.min(axis=1)
    slacks += list(mn - env_lo)
    # densities below a few ulps of the peak are rounding noise in the solve
    tols += list(rel_tol * env_lo + 64 * np.finfo(float).eps * mx0)
    locs += [("min", int(k)) for k in traj.levels]
    return _worst("linf_envelope", slacks, tols, locs, notes)


# ------------------------------------------------- flow interchange


def _grad_sq_sum(values, dx):
    return math.fsum(face_gradient(values, dx) ** 2) * dx


def flow_interchange_check(traj: Trajectory, problem, aux, constants: BoundConstants, dt: float,
                           alpha: float = 0.5, rel_tol: float = 1e-8) -> InequalityReport:
    """Per step: ``sum (K(rho^{n+1}) - K(rho^n)) dx/dt + (1-alpha) sum |dx H'(rho^{n+1})|^2 dx
    <= L C_V1^2 / alpha``.

    For a regularised ``K`` the tolerance adds ``2 L C eps (|K'(max rho)| + |K'(0)|)``
    with ``C = 4 (H'(|rho|_1/dx) + |V|_inf + |W|_inf |rho|_1) / dx^2``, a bound
    on the remainder introduced by the regularisation.
    """
    traj.require_complete("flow_interchange_check")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    energy = problem.model.energy
    if energy.kind == "boltzmann":
        return quadratic_flow_interchange_check(traj, constants, dt, alpha, rel_tol)
    dx, L = traj.mesh.dx, traj.mesh.L
    rho = traj.densities
    K0 = aux.K(rho[0])
    if not np.all(np.isfinite(K0)):
        raise ValueError("K is undefined at a zero density; build the auxiliary functional with epsilon > 0")
    rhs = L * constants.C_V1**2 / alpha
    eps_tol = 0.0
    if aux.epsilon > 0:
        mass = math.fsum(rho[0]) * dx
        supV = float(np.max(np.abs(problem.V))) if len(problem.V) else 0.0
        supW = float(np.max(np.abs(problem.kernel.values)))
        C = 4.0 * (abs(energy.dH(mass / dx)) + supV + supW * mass) / dx**2
        kp = abs(float(aux.dK(float(rho.max())))) + abs(float(aux.dK(0.0)))
        eps_tol = 2 * L * C * aux.epsilon * kp
    slacks, tols, locs, lhs_all = [], [], [], []
    Kprev = K0
    for n in range(1, len(rho)):
        Kn = aux.K(rho[n])
        dK = math.fsum(Kn - Kprev) * dx / dt
        grad = _grad_sq_sum(energy.dH(rho[n]), dx)
        lhs = dK + (1 - alpha) * grad
        lhs_all.append(lhs)
        slacks.append(rhs - lhs)
        tols.append(rel_tol * max(1.0, abs(rhs), abs(dK), grad) + eps_tol)
        locs.append(n)
        Kprev = Kn
    notes = [f"regularised K, epsilon={aux.epsilon:g}, epsilon tolerance {eps_tol:.3e}"] if aux.epsilon > 0 else []
    return _worst("flow_interchange", slacks, tols, locs, notes,
                  {"rhs": rhs, "alpha": alpha, "max_lhs": max(lhs_all, default=0.0)})


def quadratic_flow_interchange_check(traj: Trajectory, constants: BoundConstants, dt: float,
                                     alpha: float = 0.5, rel_tol: float = 1e-8) -> InequalityReport:
    """Linear-diffusion variant with ``K(s) = s^2/2``:

    ``sum (K(rho^{n+1}) - K(rho^n)) dx/dt + (1-alpha) sum |dx rho^{n+1}|^2 dx
    <= L (max rho^{n+1})^2 C_V1^2 / alpha``.
    """
    traj.require_complete("quadratic_flow_interchange_check")
    dx, L = traj.mesh.dx, traj.mesh.L
    rho = traj.densities
    slacks, tols, locs = [], [], []
    for n in range(1, len(rho)):
        dK = 0.5 * math.fsum(rho[n] ** 2 - rho[n - 1] ** 2) * dx / dt
        grad = _grad_sq_sum(rho[n], dx)
        lhs = dK + (1 - alpha) * grad
        rhs = L * float(rho[n].max()) ** 2 * constants.C_V1**2 / alpha
        slacks.append(rhs - lhs)
        tols.append(rel_tol * max(1.0, rhs, abs(dK), grad))
        locs.append(n)
    return _worst("flow_interchange_quadratic", slacks, tols, locs, values={"alpha": alpha})


def gradient_l2(traj: Trajectory, fn, dt: float) -> float:
    """``(sum_{n>=1} sum_i |dx fn(rho^n)_{i+1/2}|^2 dx dt)^{1/2}``."""
    traj.require_complete("gradient_l2")
    dx = traj.mesh.dx
    total = math.fsum(_grad_sq_sum(fn(r), dx) for r in traj.densities[1:])
    return math.sqrt(total * dt)


def grad_H_l2(traj: Trajectory, energy, dt: float) -> float:
    """Space-time ``L^2`` norm of the discrete gradient of ``H'(rho)``."""
    return gradient_l2(traj, energy.dH, dt)


def grad_rho_l2(traj: Trajectory, dt: float) -> float:
    """Space-time ``L^2`` norm of the discrete gradient of ``rho``."""
    return gradient_l2(traj, lambda r: r, dt)


# ----------------------------------------------------------- translates


def _split(shift, step):
    k = int(math.floor(shift / step * (1 + 1e-14)))
    r = shift - k * step
    if r < 0:
        r = 0.0
    return k, r


def time_translate(values, dt: float, dx: float, tau: float) -> float:
    """``int_0^{T-tau} int |f(t+tau) - f(t)|^2`` for ``f`` constant on ``(t_{j-1}, t_j]``.

    ``values[j]`` is level ``j``; level 0 only fixes ``t = 0`` and carries no
    weight.  With ``tau = k dt + r`` each interval splits into a piece of
    length ``dt - r`` meeting level ``j + k`` and one of length ``r`` meeting
    level ``j + k + 1``.
    """
    f = np.asarray(values, dtype=float)
    S = len(f) - 1
    k, r = _split(tau, dt)
    if k >= S:
        return 0.0
    total = 0.0
    if dt - r > 0:
        d = np.sum((f[1 + k : S + 1] - f[1 : S + 1 - k]) ** 2, axis=1) * dx
        total += (dt - r) * math.fsum(d)
    if r > 0 and S - k - 1 >= 1:
        d = np.sum((f[2 + k : S + 1] - f[1 : S - k]) ** 2, axis=1) * dx
        total += r * math.fsum(d)
    return total


def space_translate(values, dt: float, dx: float, ell: float) -> float:
    """``int_0^T int_{-L}^{L-ell} |f(t,x+ell) - f(t,x)|^2`` over levels ``1..S``."""
    f = np.asarray(values, dtype=float)[1:]
    n = f.shape[1]
    k, r = _split(ell, dx)
    if k >= n:
        return 0.0
    total = 0.0
    if dx - r > 0:
        total += (dx - r) * math.fsum(np.sum((f[:, k:] - f[:, : n - k]) ** 2, axis=0))
    if r > 0 and n - k - 1 >= 1:
        total += r * math.fsum(np.sum((f[:, k + 1 :] - f[:, : n - k - 1]) ** 2, axis=0))
    return total * dt


def translate_scan(traj: Trajectory, energy, which: str, shifts, dt: float):
    """Translate integrals of ``H'(rho_h)`` for each shift."""
    traj.require_complete("translate_scan")
    dx = traj.mesh.dx
    T = traj.timegrid.T
    vals = np.asarray(energy.dH(traj.densities), dtype=float)
    out = []
    for s in shifts:
        s = float(s)
        if which == "time":
            if not 0 <= s < T:
                raise ValueError(f"time shift {s} outside [0, {T})")
            out.append((s, time_translate(vals, dt, dx, s)))
        elif which == "space":
            if not 0 <= s < 2 * traj.mesh.L:
                raise ValueError(f"space shift {s} outside [0, {2 * traj.mesh.L})")
            out.append((s, space_translate(vals, dt, dx, s)))
        else:
            raise ValueError("which must be 'time' or 'space'")
    return out


def fitted_exponent(scan) -> float:
    """Least-squares slope of ``log(integral)`` against ``log(shift)``."""
    s = np.array([a for a, _ in scan], dtype=float)
    v = np.array([b for _, b in scan], dtype=float)
    keep = (s > 0) & (v > 0)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(s[keep]), np.log(v[keep]), 1)[0])


# -------------------------------------------------------- weak residual


@dataclass(frozen=True)
class TestFunction:
    """``phi`` with its partial derivatives, all callables of ``(t, x)``."""

    phi: object
    dt: object
    dx: object
    label: str = ""


def cosine_test_function(k: int, L: float, T: float) -> TestFunction:
    """``phi_k(t, x) = (1 - t/T) cos(k pi (x + L) / (2L))``."""
    w = k * math.pi / (2 * L)
    return TestFunction(
        lambda t, x: (1 - t / T) * np.cos(w * (x + L)),
        lambda t, x: -np.cos(w * (x + L)) / T + 0 * t,
        lambda t, x: -(1 - t / T) * w * np.sin(w * (x + L)),
        f"cos{k}",
    )


_G3, _W3 = np.polynomial.legendre.leggauss(3)


def _rect_integrals(fn, t0, t1, x0, x1):
    """3x3 Gauss integrals of ``fn`` over rectangles ``[t0,t1] x [x0,x1]`` (broadcast)."""
    t0, t1, x0, x1 = (np.asarray(a, dtype=float) for a in (t0, t1, x0, x1))
    tm, th = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
    xm, xh = 0.5 * (x0 + x1), 0.5 * (x1 - x0)
    total = 0.0
    for gt, wt in zip(_G3, _W3):
        for gx, wx in zip(_G3, _W3):
            total = total + wt * wx * fn(tm + th * gt, xm + xh * gx)
    return total * th * xh


def weak_residual(traj: Trajectory, problem, test: TestFunction) -> float:
    """Weak-form defect of the piecewise-constant solution against ``test``.

    ``-int_0^T [int rho dt(phi) - int rho dx(phi) dx(H'(rho) + V + W*rho)] dt
    - int rho^0 phi(0)``; the flux term lives on the dual cells covering
    ``(-L + dx/2, L - dx/2)``.  ``phi(T, .)`` must vanish.
    """
    traj.require_complete("weak_residual")
    mesh = traj.mesh
    dx, T = mesh.dx, traj.timegrid.T
    tt = traj.timegrid.times
    xs = np.linspace(-mesh.L, mesh.L, 257)
    end = np.asarray(test.phi(T, xs), dtype=float)
    if np.max(np.abs(end)) > 1e-12:
        raise ValueError("test function must vanish at the final time")
    rho = traj.densities
    energy = problem.model.energy
    faces = mesh.interfaces
    centers = mesh.centers
    t0 = tt[:-1][:, None]
    t1 = tt[1:][:, None]
    # time-derivative term over primal cells
    dphi_t = _rect_integrals(test.dt, t0, t1, faces[None, :-1], faces[None, 1:])
    term_t = math.fsum((rho[1:] * dphi_t).ravel())
    # flux term over the two halves of each dual cell
    left = _rect_integrals(test.dx, t0, t1, centers[None, :-1], faces[None, 1:-1])
    right = _rect_integrals(test.dx, t0, t1, faces[None, 1:-1], centers[None, 1:])
    xi = np.asarray(energy.dH(rho[1:]), dtype=float) + problem.V + convolve(problem.kernel, rho[1:])
    gxi = np.diff(xi, axis=1) / dx
    term_x = math.fsum((gxi * (rho[1:, :-1] * left + rho[1:, 1:] * right)).ravel())
    init = _rect_integrals(lambda t, x: test.phi(0.0, x), 0.0, 1.0, faces[:-1], faces[1:])
    term_0 = math.fsum(rho[0] * init)
    return -(term_t - term_x) - term_0
