import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aggdiff.grid import (
    Mesh,
    TimeGrid,
    Trajectory,
    build_mesh,
    cell_divergence,
    expected_levels,
    face_gradient,
    lp_norm,
    mass,
    spacetime_lp_norm,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.mark.parametrize(
    "L, M, dx, centers",
    [
        (1.0, 2, 0.5, [-0.75, -0.25, 0.25, 0.75]),
        (1.0, 1, 1.0, [-0.5, 0.5]),
    ],
)
def test_mesh_examples(L, M, dx, centers):
    mesh = build_mesh(L, M)
    assert mesh.dx == dx
    np.testing.assert_allclose(mesh.centers, centers, atol=1e-15)
    assert mesh.cell_count == 2 * M
    assert mesh.face_count == 2 * M - 1


def test_mesh_end_cells():
    mesh = build_mesh(2.5, 5)
    assert mesh.dx == 0.5
    assert mesh.centers[0] == pytest.approx(-2.25, abs=1e-15)
    assert mesh.centers[-1] == pytest.approx(2.25, abs=1e-15)


@pytest.mark.parametrize("L, M", [(0.0, 2), (-1.0, 2), (1.0, 0), (1.0, -3), (1.0, 1.5), (math.inf, 2)])
def test_mesh_rejects_bad_input(L, M):
    with pytest.raises(ValueError):
        build_mesh(L, M)


@given(st.floats(1e-3, 1e3), st.integers(1, 500))
def test_mesh_invariants(L, M):
    mesh = Mesh(L, M)
    assert abs(mesh.dx * 2 * M - 2 * L) <= 2 * L * 4e-16 * 2
    assert mesh.centers[0] == pytest.approx(-L + mesh.dx / 2, rel=1e-12, abs=1e-12)
    assert mesh.centers[-1] == pytest.approx(L - mesh.dx / 2, rel=1e-12, abs=1e-12)
    assert np.all(np.diff(mesh.interfaces) > 0)


def test_mesh_is_immutable():
    mesh = build_mesh(1.0, 4)
    with pytest.raises(ValueError):
        mesh.centers[0] = 3.0
    with pytest.raises(AttributeError):
        mesh.half_length = 2.0


def test_timegrid_conventions():
    tg = TimeGrid.from_N(1.0, 9)
    assert tg.intervals == 10 and tg.N == 9 and tg.dt == pytest.approx(0.1)
    assert TimeGrid.from_dt(1.0, 0.1).intervals == 10
    # a non-dividing step is shortened so that the grid ends at T
    tg = TimeGrid.from_dt(1.0, 0.3)
    assert tg.intervals == 4 and tg.dt == 0.25
    assert tg.times[-1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 3)
    with pytest.raises(ValueError):
        TimeGrid.from_dt(1.0, 0.0)


@given(st.floats(1e-3, 1e3), st.integers(1, 10**6))
def test_timegrid_invariant(T, n):
    tg = TimeGrid(T, n)
    assert abs(tg.dt * tg.intervals - T) <= 4 * np.spacing(T)


def test_face_gradient_examples():
    mesh = build_mesh(1.0, 4)
    np.testing.assert_array_equal(face_gradient(np.full(8, 2.0), mesh.dx), np.zeros(7))
    np.testing.assert_allclose(face_gradient(mesh.centers, mesh.dx), np.ones(7), rtol=1e-13)
    np.testing.assert_array_equal(face_gradient([1.0, 3.0], 0.5), [4.0])


def test_cell_divergence_examples():
    np.testing.assert_array_equal(cell_divergence(np.zeros(3), 0.5), np.zeros(4))
    np.testing.assert_array_equal(cell_divergence([2.0], 1.0), [2.0, -2.0])


@given(arrays(float, st.integers(1, 40), elements=finite), st.floats(1e-3, 10))
def test_divergence_telescopes(g, dx):
    div = cell_divergence(g, dx)
    assert len(div) == len(g) + 1
    assert abs(math.fsum(div * dx)) <= 1e-9 * (1 + np.abs(g).sum())


def test_divergence_of_linear_gradient_vanishes_inside():
    mesh = build_mesh(2.0, 8)
    d = cell_divergence(face_gradient(3 * mesh.centers + 1, mesh.dx), mesh.dx)
    np.testing.assert_allclose(d[1:-1], 0.0, atol=1e-12)
    assert abs(d[0]) > 1 and abs(d[-1]) > 1


@given(
    arrays(float, 12, elements=finite),
    arrays(float, 13, elements=finite),
    st.integers(0, 11),
    st.integers(0, 11),
)
def test_summation_by_parts(a, b, m, n):
    m, n = min(m, n), max(m, n)
    lhs = sum(a[i] * (b[i + 1] - b[i]) for i in range(m, n + 1))
    lhs += sum((a[i + 1] - a[i]) * b[i + 1] for i in range(m, n))
    rhs = a[n] * b[n + 1] - a[m] * b[m]
    scale = 1 + np.abs(a).max() * np.abs(b).max() * 4 * (n - m + 1)
    assert abs(lhs - rhs) <= 1e-12 * scale


def test_lp_norm_examples():
    assert lp_norm(np.full(6, -2.0), 1 / 3, 1) == pytest.approx(4.0)
    assert lp_norm([3.0, -4.0], 1.0, math.inf) == 4.0
    assert lp_norm([3.0, 4.0], 0.5, 2) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(ValueError):
        lp_norm([1.0], 1.0, 0.5)


@given(
    arrays(float, 10, elements=finite),
    arrays(float, 10, elements=finite),
    st.floats(-50, 50),
    st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf]),
)
def test_lp_norm_is_a_norm(f, g, c, p):
    dx = 0.1
    assert lp_norm(c * f, dx, p) == pytest.approx(abs(c) * lp_norm(f, dx, p), rel=1e-10, abs=1e-10)
    assert lp_norm(f + g, dx, p) <= lp_norm(f, dx, p) + lp_norm(g, dx, p) + 1e-9


def test_spacetime_norm_and_mass():
    f = np.ones((3, 4))
    assert spacetime_lp_norm(f, 0.5, 0.25, 2) == pytest.approx(math.sqrt(3 * 4 * 0.5 * 0.25))
    assert mass([1.0, 2.0, 3.0], 0.5) == 3.0


def test_trajectory_cadence_metadata():
    mesh, tg = build_mesh(1.0, 1), TimeGrid(1.0, 5)
    np.testing.assert_array_equal(expected_levels(5, 2), [0, 2, 4, 5])
    traj = Trajectory(mesh, tg, np.ones((4, 2)), [0, 2, 4, 5], cadence=2)
    assert not traj.complete
    np.testing.assert_allclose(traj.times, [0, 0.4, 0.8, 1.0])
    with pytest.raises(ValueError):
        traj.require_complete()
    with pytest.raises(ValueError):
        Trajectory(mesh, tg, np.ones((3, 2)), [0, 2, 5], cadence=2)
    with pytest.raises(ValueError):
        Trajectory(mesh, tg, np.ones((6, 3)), range(6))
