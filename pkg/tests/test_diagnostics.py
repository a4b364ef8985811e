import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aggdiff import diagnostics as dg
from aggdiff.discretize import build_kernel, discretize
from aggdiff.grid import TimeGrid, Trajectory, build_mesh
from aggdiff.model import EnergyFamily, ModelSpec, RhoPolicy, build_auxiliary, make_initial_datum, make_potential
from aggdiff.solver import run

PM2, PM3 = EnergyFamily.porous_medium(2), EnergyFamily.porous_medium(3)


def model(energy=PM3, V="zero", W="zero", rho0="constant", policy="midpoint", L=1.0):
    return ModelSpec(energy, make_potential(V), make_potential(W), make_initial_datum(rho0, L), RhoPolicy.parse(policy))


def simulate(energy=PM3, V="zero", W="zero", rho0="constant", L=1.0, M=8, T=0.1, steps=10):
    p = discretize(model(energy, V, W, rho0, L=L), build_mesh(L, M))
    res = run(p, TimeGrid(T, steps))
    return p, res


def constants_for(p, res):
    tg = res.trajectory.timegrid
    return dg.bound_constants(p.model, p.mesh, p.mass, tg.dt, tg.intervals, float(p.rho0.max()))


# ---------------------------------------------------------------- energy


def test_energy_examples():
    mesh = build_mesh(1.5, 3)
    zero = build_kernel(make_potential("zero"), mesh)
    c = 0.7
    assert dg.discrete_energy(np.full(6, c), PM3, np.zeros(6), zero) == pytest.approx(3.0 * PM3.H(c))
    assert dg.discrete_energy(np.zeros(6), EnergyFamily.boltzmann(), np.zeros(6), zero) == 0.0
    unit = build_mesh(1.0, 1)
    ones = build_kernel(lambda x: 1 + 0 * x, unit)
    assert dg.discrete_energy(np.array([1.0, 2.0]), PM2, np.zeros(2), ones) == pytest.approx(9.5)


def test_dissipation_on_constant_state():
    p, res = simulate(rho0="constant")
    rep = dg.dissipation_check(res.reports)
    assert rep.holds and rep.slack == 0.0
    seq = dg.energy_sequence_check(res.trajectory, p)
    assert seq.holds


def test_dissipation_flags_increase():
    class R:
        def __init__(self, step, a, b):
            self.step, self.energy_before, self.energy_after = step, a, b

    rep = dg.dissipation_check([R(0, 1.0, 0.5), R(1, 0.5, 0.6)])
    assert not rep.holds and rep.location == 1 and rep.slack == pytest.approx(-0.1)


# ------------------------------------------------------------- constants


def test_bound_constant_examples():
    mesh = build_mesh(1.0, 8)
    c = dg.bound_constants(model(V="quadratic"), mesh, 1.0)
    assert c.C_V1 == pytest.approx(1.0, rel=1e-12) and c.C_V2 == pytest.approx(1.0, rel=1e-12)
    # differenced second derivative of an expression carries ~1e-6 rounding error
    e = dg.bound_constants(model(V="x^2/2"), mesh, 1.0)
    assert e.C_V1 == pytest.approx(1.0, rel=1e-8) and e.C_V2 == pytest.approx(1.0, rel=1e-5)
    z = dg.bound_constants(model(), mesh, 1.0)
    assert z.C_V1 == z.C_V2 == 0.0
    w = dg.bound_constants(model(V="double_well", W={"expr": "1 + 0*x", "d1": "0", "d2": "0"}), mesh, 3.0)
    assert w.C_V1 == pytest.approx(2 / (3 * math.sqrt(3)), rel=1e-6)  # |x^3 - x| peaks at 1/sqrt(3)
    q = dg.bound_constants(model(V="x^2/2"), mesh, 1.0, dt=0.1, steps=5, rho0_max=2.0)
    assert q.C_inf == pytest.approx(0.9**-5 * 2.0)
    assert set(q.to_dict()) == {"C_V1", "C_V2", "C_inf", "mass", "sup"}


def test_potential_gradient_bound_holds():
    p, res = simulate(V="double_well", W="morse", rho0="tent", M=16, T=0.2, steps=10)
    rep = dg.potential_gradient_check(res.trajectory, p, constants_for(p, res))
    assert rep.holds and rep.slack > 0


# -------------------------------------------------------------- L-inf


def test_linf_flat_envelope_without_potentials():
    p, res = simulate(rho0="tent", M=16)
    c = constants_for(p, res)
    assert c.C_V2 == 0
    rep = dg.linf_envelope_check(res.trajectory, c, res.trajectory.timegrid.dt)
    assert rep.holds
    mx = res.trajectory.densities.max(axis=1)
    assert np.all(np.diff(mx) <= 1e-14)


def test_linf_upper_envelope_skipped_for_large_steps():
    p, res = simulate(V={"kind": "quadratic", "a": 30.0}, rho0="tent", T=1.0, steps=10)
    c = constants_for(p, res)
    with pytest.warns(UserWarning, match="skipped"):
        rep = dg.linf_envelope_check(res.trajectory, c, 0.1)
    assert any("skipped" in n for n in rep.notes)


def test_linf_upper_envelope_with_quadratic_potential():
    p, res = simulate(V="quadratic", rho0={"kind": "gaussian_bump", "floor": 0.2}, M=16, T=0.5, steps=20)
    c = constants_for(p, res)
    assert c.C_V2 == 1.0
    dt = res.trajectory.timegrid.dt
    env = (1 - dt) ** -res.trajectory.levels * p.rho0.max()
    assert np.all(res.trajectory.densities.max(axis=1) <= env * (1 + 1e-10))


# ---------------------------------------------------- flow interchange


def test_flow_interchange_constant_state():
    p, res = simulate(rho0="constant")
    rep = dg.flow_interchange_check(res.trajectory, p, build_auxiliary(PM3), constants_for(p, res), 0.01)
    assert rep.holds and rep.slack == 0.0


@pytest.mark.parametrize("energy, eps", [(PM3, 0.0), (EnergyFamily.porous_medium(4), 0.0), (PM2, 0.0), (PM2, 1e-8)])
def test_flow_interchange_and_time_summed_form(energy, eps):
    p, res = simulate(energy, V="x^2/2", W="gaussian", rho0={"kind": "gaussian_bump", "floor": 0.05},
                      M=16, T=0.5, steps=25)
    aux = build_auxiliary(energy, eps)
    c = constants_for(p, res)
    dt = res.trajectory.timegrid.dt
    assert dg.flow_interchange_check(res.trajectory, p, aux, c, dt).holds
    alpha, L, T = 0.5, p.mesh.L, res.trajectory.timegrid.T
    lhs = (1 - alpha) * dg.grad_H_l2(res.trajectory, energy, dt) ** 2
    rhs = L * c.C_V1**2 * T / alpha + 2 * L * max(-aux.C_K, 0) + math.fsum(np.abs(aux.K(p.rho0))) * p.mesh.dx
    assert lhs <= rhs


def test_flow_interchange_boltzmann_uses_quadratic_variant():
    p, res = simulate(EnergyFamily.boltzmann(), V="x^2/2", rho0={"kind": "gaussian_bump", "floor": 0.1},
                      M=16, T=0.5, steps=10)
    rep = dg.flow_interchange_check(res.trajectory, p, None, constants_for(p, res), 0.05)
    assert rep.name == "flow_interchange_quadratic" and rep.holds


def test_flow_interchange_with_empty_cells():
    # K(s) = 2 (s log s - s) stays finite at s = 0 although K'(0) = -inf
    p, res = simulate(PM2, rho0={"kind": "tent", "halfwidth": 0.3}, M=8)
    assert np.any(res.trajectory.densities == 0)
    rep = dg.flow_interchange_check(res.trajectory, p, build_auxiliary(PM2), constants_for(p, res), 0.01)
    assert rep.holds


# ------------------------------------------------------------ gradients


def test_grad_H_examples():
    mesh, tg = build_mesh(1.0, 1), TimeGrid(1.0, 1)
    traj = Trajectory(mesh, tg, np.array([[1.0, 1.0], [0.5, 1.5]]), [0, 1])
    assert dg.grad_H_l2(traj, PM2, 1.0) == pytest.approx(2.0)
    const = Trajectory(mesh, tg, np.ones((2, 2)), [0, 1])
    assert dg.grad_H_l2(const, PM2, 1.0) == 0.0
    assert dg.grad_rho_l2(traj, 1.0) == pytest.approx(1.0)


# ----------------------------------------------------------- translates


def time_translate_oracle(values, dt, dx, tau):
    """Merge the breakpoints of f(t) and f(t + tau) and integrate piece by piece."""
    S = len(values) - 1
    T = S * dt
    if tau >= T:
        return 0.0
    cuts = {0.0, T - tau}
    for j in range(S + 1):
        for c in (j * dt, j * dt - tau):
            if 0 < c < T - tau:
                cuts.add(c)
    cuts = sorted(cuts)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        mid = 0.5 * (a + b)
        j0 = min(S, max(1, math.ceil(mid / dt)))
        j1 = min(S, max(1, math.ceil((mid + tau) / dt)))
        total += (b - a) * np.sum((values[j1] - values[j0]) ** 2) * dx
    return total


def space_translate_oracle(values, dt, dx, ell):
    n = values.shape[1]
    Lx = n * dx
    if ell >= Lx:
        return 0.0
    cuts = {0.0, Lx - ell}
    for i in range(n + 1):
        for c in (i * dx, i * dx - ell):
            if 0 < c < Lx - ell:
                cuts.add(c)
    cuts = sorted(cuts)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        i0, i1 = min(n - 1, int(mid // dx)), min(n - 1, int((mid + ell) // dx))
        total += (b - a) * np.sum((values[1:, i1] - values[1:, i0]) ** 2) * dt
    return total


@given(st.integers(1, 8), st.integers(1, 6), st.floats(0.0, 1.0), st.integers(0, 2**31))
def test_time_translate_matches_oracle(S, n, frac, seed):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(S + 1, n))
    dt, dx = 0.3, 0.2
    tau = frac * S * dt
    assert dg.time_translate(values, dt, dx, tau) == pytest.approx(time_translate_oracle(values, dt, dx, tau),
                                                                   rel=1e-10, abs=1e-12)


@given(st.integers(1, 4), st.integers(1, 9), st.floats(0.0, 1.0), st.integers(0, 2**31))
def test_space_translate_matches_oracle(S, n, frac, seed):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(S + 1, n))
    dt, dx = 0.3, 0.2
    ell = frac * n * dx
    assert dg.space_translate(values, dt, dx, ell) == pytest.approx(space_translate_oracle(values, dt, dx, ell),
                                                                    rel=1e-10, abs=1e-12)


def test_translate_examples():
    mesh, tg = build_mesh(1.0, 4), TimeGrid(1.0, 5)
    const = Trajectory(mesh, tg, np.ones((6, 8)), range(6))
    for which, shifts in (("time", [0.0, 0.05, 0.5]), ("space", [0.0, 0.1, 1.0])):
        assert all(v == 0 for _, v in dg.translate_scan(const, PM3, which, shifts, tg.dt))
    # constant in time, varying in space: time shifts below dt see nothing
    rows = np.tile(np.linspace(1, 2, 8), (6, 1))
    traj = Trajectory(mesh, tg, rows, range(6))
    assert dg.translate_scan(traj, PM3, "time", [0.1], tg.dt)[0][1] == 0.0
    assert dg.translate_scan(traj, PM3, "space", [0.1], tg.dt)[0][1] > 0
    with pytest.raises(ValueError):
        dg.translate_scan(traj, PM3, "time", [1.0], tg.dt)
    with pytest.raises(ValueError):
        dg.translate_scan(traj, PM3, "sideways", [0.1], tg.dt)


def test_fitted_exponent():
    assert dg.fitted_exponent([(s, 3 * s) for s in (0.1, 0.2, 0.5, 1.0)]) == pytest.approx(1.0)
    assert dg.fitted_exponent([(s, s**2) for s in (0.1, 0.3, 1.0)]) == pytest.approx(2.0)
    assert math.isnan(dg.fitted_exponent([(0.1, 0.0)]))


# --------------------------------------------------------- weak residual


def test_weak_residual_examples():
    p, res = simulate(rho0={"kind": "constant", "c": 1.3}, M=6, T=0.3, steps=6)
    L, T = p.mesh.L, 0.3
    assert abs(dg.weak_residual(res.trajectory, p, dg.cosine_test_function(0, L, T))) < 1e-14
    zero = dg.TestFunction(lambda t, x: 0 * x + 0 * t, lambda t, x: 0 * x + 0 * t, lambda t, x: 0 * x + 0 * t)
    assert dg.weak_residual(res.trajectory, p, zero) == 0.0
    bad = dg.TestFunction(lambda t, x: 1 + 0 * x, lambda t, x: 0 * x, lambda t, x: 0 * x)
    with pytest.raises(ValueError, match="vanish"):
        dg.weak_residual(res.trajectory, p, bad)


def test_weak_residual_decays_under_refinement():
    out = []
    for M, N in ((8, 8), (16, 16), (32, 32)):
        p, res = simulate(PM3, V="x^2/2", rho0={"kind": "gaussian_bump", "floor": 0.2}, M=M, T=0.2, steps=N)
        out.append(abs(dg.weak_residual(res.trajectory, p, dg.cosine_test_function(1, 1.0, 0.2))))
    assert out[0] > out[1] > out[2]
