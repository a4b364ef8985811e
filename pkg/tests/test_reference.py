import math

import numpy as np
import pytest

from aggdiff import reference as ref
from aggdiff.discretize import discretize_potential
from aggdiff.grid import build_mesh
from aggdiff.model import ConfigurationError, make_initial_datum, make_potential


def test_heat_constant_datum_stays_constant():
    mesh = build_mesh(1.0, 8)
    rho0 = make_initial_datum({"kind": "constant", "c": 2.0})
    for t in (0.0, 0.01, 1.0):
        np.testing.assert_allclose(ref.heat_neumann(rho0, mesh, t), 2.0, atol=1e-13)


def test_heat_single_mode():
    L, t = 1.5, 0.3
    mesh = build_mesh(L, 16)
    rho0 = make_initial_datum({"kind": "cosine_mode", "mean": 1.0, "amplitude": 0.5, "k": 2}, half_length=L)
    w = 2 * math.pi / (2 * L)
    lo, hi = mesh.interfaces[:-1] + L, mesh.interfaces[1:] + L
    exact = 1.0 + 0.5 * math.exp(-w * w * t) * (np.sin(w * hi) - np.sin(w * lo)) / (w * mesh.dx)
    np.testing.assert_allclose(ref.heat_neumann(rho0, mesh, t), exact, atol=1e-12)


def test_heat_conserves_mass_and_truncation():
    mesh = build_mesh(1.0, 32)
    rho0 = make_initial_datum({"kind": "tent", "halfwidth": 0.5})
    out = ref.heat_neumann(rho0, mesh, 0.05)
    assert out.sum() * mesh.dx == pytest.approx(0.5, rel=1e-10)
    assert ref.heat_truncation(1.0, 1.0, 1.0) < ref.heat_truncation(0.01, 1.0, 1.0)
    with pytest.raises(ValueError):
        ref.heat_truncation(0.0, 1.0, 1.0)


def test_gibbs_uniform_without_potential():
    mesh = build_mesh(2.0, 5)
    np.testing.assert_allclose(ref.gibbs_steady(make_potential("zero"), mesh, 3.0), 3.0 / 4.0, rtol=1e-12)


def test_gibbs_discrete_normalisation():
    mesh = build_mesh(2.0, 10)
    V = discretize_potential(make_potential("x^2/2"), mesh)
    g = ref.gibbs_discrete(V, mesh.dx, 1.7)
    assert g.sum() * mesh.dx == pytest.approx(1.7)
    assert np.ptp(np.log(g) + V) < 1e-12


def test_barenblatt_radius_and_level():
    V = make_potential("quadratic")
    C = ref.barenblatt_level(V, 2.0, 1.0, 3.0)
    r = 3 ** (1 / 3)
    assert C == pytest.approx(r * r / 2, rel=1e-12)
    a, b = ref._support(V, C, 3.0)
    assert b == pytest.approx(r, rel=1e-12) and a == pytest.approx(-r, rel=1e-12)
    mesh = build_mesh(3.0, 24)
    cells = ref.pme_barenblatt_steady(V, 2.0, mesh, 1.0)
    assert cells.sum() * mesh.dx == pytest.approx(1.0, rel=1e-10)
    assert cells[0] == 0.0 and cells[-1] == 0.0


def test_barenblatt_rejects_support_at_boundary():
    with pytest.raises(ConfigurationError, match="boundary"):
        ref.pme_barenblatt_steady(make_potential("quadratic"), 2.0, build_mesh(1.2, 8), 1.0)
