"""Reference solutions returned as cell averages."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .discretize import cell_averages
from .grid import Mesh
from .model import ConfigurationError

SCENARIOS = ("heat_neumann", "gibbs_steady", "gibbs_discrete", "pme_barenblatt_steady")


# ------------------------------------------------------------------- heat


def cosine_coefficients(rho0, L: float, K: int, panels: int | None = None) -> np.ndarray:
    """``a_0 = mean rho0`` and ``a_k = (1/L) int rho0 cos(k pi (x+L)/(2L)) dx``.

    Composite 5-point Gauss-Legendre on ``panels`` equal panels.
    """
    panels = panels or max(4000, 8 * K)
    g, w = np.polynomial.legendre.leggauss(5)
    h = 2 * L / panels
    mids = -L + h * (np.arange(panels) + 0.5)
    x = (mids[:, None] + 0.5 * h * g[None, :]).ravel()
    wx = np.tile(0.5 * h * w, panels)
    f = np.asarray(rho0(x), dtype=float) * wx
    k = np.arange(K + 1)
    a = np.cos(np.outer(k, np.pi * (x + L) / (2 * L))) @ f / L
    a[0] *= 0.5
    return a


def heat_truncation(t: float, L: float, bound: float, tol: float = 1e-12, cap: int = 20000) -> int:
    """Smallest ``K`` whose neglected modes sum below ``tol`` given ``|a_k| <= bound``."""
    if t <= 0:
        raise ValueError("truncation needs t > 0")
    c = (math.pi / (2 * L)) ** 2 * t
    for K in range(1, cap):
        q = math.exp(-c * (2 * K + 3))
        tail = bound * math.exp(-c * (K + 1) ** 2) / (1 - q) if q < 1 else math.inf
        if tail < tol:
            return K
    raise ValueError(f"heat series needs more than {cap} modes at t={t}")


def heat_neumann(rho0, mesh: Mesh, t: float) -> np.ndarray:
    """Cell averages of the Neumann heat solution on ``(-L, L)`` at time ``t``."""
    L = mesh.L
    if t == 0:
        return cell_averages(rho0, mesh, "initial datum")
    xs = np.linspace(-L, L, 4097)
    bound = 2.0 * float(np.max(np.abs(rho0(xs)))) + 1e-300
    K = heat_truncation(t, L, bound)
    a = cosine_coefficients(rho0, L, K)
    k = np.arange(1, K + 1)
    w = k * np.pi / (2 * L)
    decay = a[1:] * np.exp(-(w**2) * t)
    lo = mesh.interfaces[:-1] + L
    hi = mesh.interfaces[1:] + L
    # average of cos(w (x + L)) over a cell
    avg = (np.sin(np.outer(hi, w)) - np.sin(np.outer(lo, w))) / (w[None, :] * mesh.dx)
    return a[0] + avg @ decay


# ------------------------------------------------------------------ Gibbs


def gibbs_steady(V, mesh: Mesh, mass: float) -> np.ndarray:
    """Cell averages of ``mass e^{-V} / int e^{-V}``."""
    L = mesh.L
    Z = quad(lambda x: math.exp(-float(V(x))), -L, L, limit=200, epsabs=1e-14, epsrel=1e-13)[0]
    return mass * cell_averages(lambda x: np.exp(-V(x)), mesh) / Z


def gibbs_discrete(V_cells, dx: float, mass: float) -> np.ndarray:
    """``rho_i = mass e^{-V_i} / sum_j e^{-V_j} dx``, the scheme's linear-diffusion fixed point."""
    v = np.asarray(V_cells, dtype=float)
    e = np.exp(-(v - v.min()))
    return mass * e / (math.fsum(e) * dx)


# ------------------------------------------------------------- Barenblatt


def _support(V, C, L, samples=4001):
    """Endpoints of ``{V < C}`` in ``[-L, L]`` (single interval expected)."""
    x = np.linspace(-L, L, samples)
    inside = np.asarray(V(x)) < C
    if not inside.any():
        return None
    idx = np.flatnonzero(inside)
    if np.any(np.diff(idx) != 1):
        raise ConfigurationError("steady profile support is not an interval")
    a = x[idx[0]]
    b = x[idx[-1]]
    if idx[0] > 0:
        a = brentq(lambda s: float(V(s)) - C, x[idx[0] - 1], x[idx[0]], xtol=1e-15)
    if idx[-1] < samples - 1:
        b = brentq(lambda s: float(V(s)) - C, x[idx[-1]], x[idx[-1] + 1], xtol=1e-15)
    return a, b


def barenblatt_profile(V, m: float, C: float):
    """``rho(x) = ((m-1)/m (C - V(x)))_+^{1/(m-1)}``."""

    def rho(x):
        return np.power(np.maximum((m - 1) / m * (C - np.asarray(V(x), dtype=float)), 0.0), 1.0 / (m - 1))

    return rho


def barenblatt_level(V, m: float, mass: float, L: float) -> float:
    """Level ``C`` with ``int rho = mass`` for the steady porous-medium profile."""

    def excess(C):
        sup = _support(V, C, L)
        if sup is None:
            return -mass
        rho = barenblatt_profile(V, m, C)
        return quad(lambda x: float(rho(x)), sup[0], sup[1], limit=200, epsabs=1e-14, epsrel=1e-13)[0] - mass

    xs = np.linspace(-L, L, 4001)
    lo = float(np.min(V(xs)))
    hi = lo + 1.0
    while excess(hi) < 0:
        hi = lo + 2 * (hi - lo)
        if hi - lo > 1e12:
            raise ConfigurationError("cannot bracket the steady level")
    C = brentq(excess, lo, hi, xtol=1e-15, rtol=1e-15)
    sup = _support(V, C, L)
    if sup[0] <= -L or sup[1] >= L:
        raise ConfigurationError(
            "steady profile support reaches the boundary; enlarge the domain or reduce the mass"
        )
    return C


def pme_barenblatt_steady(V, m: float, mesh: Mesh, mass: float) -> np.ndarray:
    """Cell averages of the compactly supported steady state ``H'(rho) + V = C``."""
    C = barenblatt_level(V, m, mass, mesh.L)
    a, b = _support(V, C, mesh.L)
    rho = barenblatt_profile(V, m, C)
    out = np.zeros(mesh.cell_count)
    faces = mesh.interfaces
    for i in range(mesh.cell_count):
        lo, hi = max(faces[i], a), min(faces[i + 1], b)
        if hi <= lo:
            continue
        out[i] = quad(lambda x: float(rho(x)), lo, hi, epsabs=1e-15, epsrel=1e-13)[0] / mesh.dx
    return out
