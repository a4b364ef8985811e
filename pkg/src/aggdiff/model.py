"""Problem data: internal energies, auxiliary functionals, potentials, initial data.

Energy densities are vectorised callables of the density ``s``.  The
auxiliary functional ``K`` satisfies ``(s + eps) K''(s) = H''(s)``; with
``eps = 0`` this is the exact functional, otherwise the regularised one
used when ``H''(s)/s`` is not integrable at the origin.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import xlogy

from .expr import central_derivative, parse_expression

Fn = Callable[[np.ndarray], np.ndarray]

# Sample grid for the construction-time sanity checks on energies.
ENERGY_SAMPLES = np.logspace(-3, 2, 61)


class ConfigurationError(ValueError):
    """Invalid model or run configuration."""


def _vec(fn):
    """Wrap ``fn`` so scalars come back as floats and arrays as arrays."""

    def call(s):
        arr = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(fn(arr), dtype=float)
        return float(out) if out.ndim == 0 else out

    return call


# ---------------------------------------------------------------- energies


@dataclass(frozen=True)
class EnergyFamily:
    """Internal energy density ``H`` with its first two derivatives.

    Use :meth:`porous_medium`, :meth:`boltzmann` or :meth:`custom`.
    """

    kind: str
    H: Fn = field(repr=False)
    dH: Fn = field(repr=False)
    d2H: Fn = field(repr=False)
    m: float | None = None
    sources: tuple | None = None

    @classmethod
    def porous_medium(cls, m: float) -> "EnergyFamily":
        m = float(m)
        if not m > 1:
            raise ConfigurationError(f"porous-medium exponent must exceed 1, got {m}")
        return cls(
            "porous_medium",
            _vec(lambda s: np.power(s, m) / (m - 1)),
            _vec(lambda s: m * np.power(s, m - 1) / (m - 1)),
            _vec(lambda s: m * np.power(s, m - 2)),
            m=m,
        )

    @classmethod
    def boltzmann(cls) -> "EnergyFamily":
        return cls(
            "boltzmann",
            _vec(lambda s: xlogy(s, s) - s),
            _vec(np.log),
            _vec(lambda s: 1.0 / s),
        )

    @classmethod
    def custom(cls, H: str, dH: str | None = None, d2H: str | None = None) -> "EnergyFamily":
        """Energy from expressions in ``s``; missing derivatives are differenced.

        Supplied derivatives are checked against differences of the level
        above (relative tolerance 1e-6) and ``H''`` must be positive on a
        sample grid.
        """
        h = parse_expression(H, "s")
        dh = parse_expression(dH, "s") if dH is not None else None
        d2h = parse_expression(d2H, "s") if d2H is not None else None
        f0 = _vec(h)
        f1 = _vec(dh) if dh is not None else _vec(lambda s: central_derivative(h, s, relative=True))
        if d2h is not None:
            f2 = _vec(d2h)
        elif dh is not None:
            f2 = _vec(lambda s: central_derivative(dh, s, relative=True))
        else:
            f2 = _vec(lambda s: central_derivative(h, s, order=2, relative=True))
        s = ENERGY_SAMPLES
        if dh is not None:
            _check_derivative(f1(s), central_derivative(h, s, relative=True), "dH", "H")
        if d2h is not None:
            _check_derivative(f2(s), central_derivative(f1, s, relative=True), "d2H", "dH")
        vals = f2(s)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            bad = s[~(np.isfinite(vals) & (vals > 0))][0]
            raise ConfigurationError(f"custom energy is not strictly convex: H''({bad:g}) = {f2(bad):g}")
        return cls("custom", f0, f1, f2, sources=(H, dH, d2H))

    @property
    def name(self) -> str:
        if self.kind == "porous_medium":
            return f"porous_medium(m={self.m:g})"
        return self.kind

    @property
    def requires_positivity(self) -> bool:
        return not math.isfinite(self.dH(0.0))

    def H_extended(self, s):
        """``H`` with its continuous extension at ``s = 0``."""
        s = np.asarray(s, dtype=float)
        out = np.asarray(self.H(s), dtype=float)
        if self.kind == "custom":
            zero = s == 0
            if np.any(zero) and not math.isfinite(self.H(0.0)):
                out = np.where(zero, self.H(1e-300), out)
        return float(out) if out.ndim == 0 else out

    def d2H_power(self) -> float:
        """Exponent ``p`` with ``H''(s) ~ s^p`` near the origin (estimated)."""
        if self.kind == "porous_medium":
            return self.m - 2
        if self.kind == "boltzmann":
            return -1.0
        a, b = 1e-8, 1e-6
        return math.log(self.d2H(b) / self.d2H(a)) / math.log(b / a)

    def needs_regularisation(self) -> bool:
        """True when ``H''(s)/s`` is not integrable at zero."""
        if self.kind == "porous_medium":
            return self.m < 2
        if self.kind == "boltzmann":
            return True
        return self.d2H_power() <= 0.02


def _check_derivative(given, numeric, name, base):
    scale = np.maximum(np.abs(numeric), 1.0)
    err = np.abs(given - numeric) / scale
    if not np.all(err <= 1e-6):
        k = int(np.nanargmax(err))
        raise ConfigurationError(
            f"{name} does not match the derivative of {base} at s={ENERGY_SAMPLES[k]:g} "
            f"(relative mismatch {err[k]:.2e})"
        )


# ------------------------------------------------------- auxiliary functional


@dataclass(frozen=True)
class AuxiliaryFunctional:
    """``K`` and ``K'`` with lower bound ``C_K`` and regularisation ``epsilon``.

    ``kind`` names the construction (closed form or tabulated).
    """

    K: Fn = field(repr=False)
    dK: Fn = field(repr=False)
    lower_bound: float
    epsilon: float
    kind: str

    @property
    def C_K(self) -> float:
        return self.lower_bound


def build_auxiliary(energy: EnergyFamily, epsilon: float = 0.0, upper: float = 1e4) -> AuxiliaryFunctional:
    """Auxiliary functional of ``energy`` with ``(s + eps) K'' = H''``.

    Closed forms are used for porous-medium energies (``eps = 0``, ``m >= 2``;
    ``m = 2`` with ``eps > 0``) and the Boltzmann energy (``eps > 0``).  All
    other cases are integrated numerically from the anchor ``K(1) = K'(1) = 0``
    and cached on a log-spaced table reaching ``upper``.  The anchored
    functionals are convex with minimum 0 at ``s = 1``, so no linear shift is
    needed to bound them below.
    """
    eps = float(epsilon)
    if not (eps >= 0 and math.isfinite(eps)):
        raise ConfigurationError(f"epsilon must be a nonnegative number, got {epsilon!r}")
    if eps == 0 and energy.needs_regularisation():
        if not (energy.kind == "porous_medium" and energy.m == 2):
            raise ConfigurationError(
                f"H''(s)/s is not integrable at 0 for {energy.name}; "
                "use the relaxed condition with a positive regularisation epsilon"
            )
    if energy.kind == "porous_medium":
        m = energy.m
        if eps == 0 and m > 2:
            return AuxiliaryFunctional(
                _vec(lambda s: m * np.power(s, m - 1) / ((m - 1) * (m - 2))),
                _vec(lambda s: m * np.power(s, m - 2) / (m - 2)),
                0.0,
                0.0,
                "closed",
            )
        if m == 2 and eps == 0:
            return AuxiliaryFunctional(
                _vec(lambda s: 2.0 * (xlogy(s, s) - s)),
                _vec(lambda s: 2.0 * np.log(s)),
                -2.0,
                0.0,
                "closed",
            )
        if m == 2:
            c = 1.0 + eps
            return AuxiliaryFunctional(
                _vec(lambda s: 2.0 * ((s + eps) * np.log((s + eps) / c) - (s - 1.0))),
                _vec(lambda s: 2.0 * np.log((s + eps) / c)),
                0.0,
                eps,
                "closed",
            )
    if energy.kind == "boltzmann":
        # K'(s) = (log(1+eps) - log(1+eps/s)) / eps, K(s) = s K'(s) - log((s+eps)/(1+eps)).
        def dK(s):
            return (math.log1p(eps) - np.log1p(eps / s)) / eps

        def K(s):
            # s K'(s) -> 0 as s -> 0 although K'(0) = -inf
            with np.errstate(divide="ignore", invalid="ignore"):
                sdk = np.where(s > 0, s * dK(s), 0.0)
            return sdk - np.log((s + eps) / (1.0 + eps))

        return AuxiliaryFunctional(_vec(K), _vec(dK), 0.0, eps, "closed")
    return _tabulated_auxiliary(energy, eps, upper)


def _tabulated_auxiliary(energy: EnergyFamily, eps: float, upper: float) -> AuxiliaryFunctional:
    lo = 1e-6 * eps if eps > 0 else 1e-12
    hi = max(float(upper), 10.0)
    per_decade = 200
    left = np.logspace(math.log10(lo), 0.0, max(2, int(per_decade * -math.log10(lo)) + 1))
    right = np.logspace(0.0, math.log10(hi), max(2, int(per_decade * math.log10(hi)) + 1))
    nodes = np.concatenate([left, right[1:]])
    anchor = len(left) - 1

    d2K = _vec(lambda s: energy.d2H(s) / (s + eps))
    # 5-point Gauss-Legendre per interval in u = log s.
    g, w = np.polynomial.legendre.leggauss(5)
    u = np.log(nodes)
    mid = 0.5 * (u[1:] + u[:-1])
    half = 0.5 * (u[1:] - u[:-1])
    su = np.exp(mid[:, None] + half[:, None] * g[None, :])
    k2 = d2K(su)
    dK_piece = np.sum(w * k2 * su, axis=1) * half
    J_piece = np.sum(w * su * k2 * su, axis=1) * half
    dK_nodes = _anchored_cumsum(dK_piece, anchor)
    J_nodes = _anchored_cumsum(J_piece, anchor)
    K_nodes = nodes * dK_nodes - J_nodes
    spl_dK = CubicHermiteSpline(nodes, dK_nodes, d2K(nodes))
    spl_K = CubicHermiteSpline(nodes, K_nodes, dK_nodes)
    dK_lo, K_lo = dK_nodes[0], K_nodes[0]
    p = energy.d2H_power()
    dH_lo = energy.dH(lo)

    def dK(s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        inside = (s >= lo) & (s <= hi)
        out[inside] = spl_dK(s[inside])
        below = s < lo
        if np.any(below):
            sb = s[below]
            if eps > 0:
                # below lo = 1e-6 eps, K'' = H''/eps to relative O(1e-6); fall back
                # to a flat K'' where H' cannot be evaluated (differenced custom H at 0)
                exact = dK_lo - (dH_lo - np.asarray(energy.dH(sb), dtype=float)) / eps
                flat = dK_lo - d2K(lo) * (lo - sb)
                out[below] = np.where(np.isfinite(exact), exact, flat)
            else:
                out[below] = dK_lo - d2K(lo) * lo / p * (1.0 - np.power(sb / lo, p))
        above = s > hi
        if np.any(above):
            out[above] = [spl_dK(hi) + _quad(d2K, hi, v) for v in s[above]]
        return out

    def K(s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        inside = (s >= lo) & (s <= hi)
        out[inside] = spl_K(s[inside])
        below = s < lo
        if np.any(below):
            out[below] = K_lo - dK_lo * (lo - s[below])
        above = s > hi
        if np.any(above):
            # K(s) = s K'(s) - J(s) with J' = t K''.
            J_hi = hi * spl_dK(hi) - spl_K(hi)
            out[above] = [
                v * dK(np.array([v]))[0] - (J_hi + _quad(lambda t: t * d2K(t), hi, v)) for v in s[above]
            ]
        return out

    return AuxiliaryFunctional(_vec(K), _vec(dK), 0.0, eps, "tabulated")


def _anchored_cumsum(pieces, anchor):
    """Cumulative integral over the nodes, zero at node ``anchor``."""
    total = np.concatenate([[0.0], np.cumsum(pieces)])
    return total - total[anchor]


def _quad(f, a, b):
    from scipy.integrate import quad

    return quad(lambda t: float(f(t)), a, b, limit=200)[0]


# ---------------------------------------------------------- entropic average

_GL8 = np.polynomial.legendre.leggauss(8)


def entropic_average(x: float, y: float, energy: EnergyFamily, aux: AuxiliaryFunctional) -> float:
    """Generalised entropic average ``(H'(y) - H'(x)) / (K'(y) - K'(x))``.

    For a regularised functional the quotient is a mean of ``s + eps``, so
    ``eps`` is subtracted to land between ``x`` and ``y``.  Close pairs use an
    8-point Gauss rule on ``int H'' / int H''/(s + eps)`` to avoid cancellation.
    """
    x, y = float(x), float(y)
    if x < 0 or y < 0 or not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"entropic average needs nonnegative finite arguments, got ({x}, {y})")
    if x > y:
        x, y = y, x
    if x == y:
        return x
    eps = aux.epsilon
    if x == 0 and not math.isfinite(aux.dK(0.0)):
        raise ValueError("K' is undefined at 0; the entropic average needs x > 0 or a regularised K")
    if y - x <= 0.1 * x:
        g, w = _GL8
        s = 0.5 * (x + y) + 0.5 * (y - x) * g
        h2 = np.asarray(energy.d2H(s), dtype=float)
        num = math.fsum(w * h2)
        den = math.fsum(w * h2 / (s + eps))
        return num / den - eps
    num = energy.dH(y) - energy.dH(x)
    den = aux.dK(y) - aux.dK(x)
    return num / den - eps


# --------------------------------------------------------------- potentials


@dataclass(frozen=True)
class Potential:
    """A ``C^2`` function with first and second derivatives."""

    name: str
    f: Fn = field(repr=False)
    df: Fn = field(repr=False)
    d2f: Fn = field(repr=False)
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.f(x)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


def _zero():
    z = _vec(lambda x: np.zeros_like(x))
    return Potential("zero", z, z, z)


def _quadratic(a=1.0):
    return Potential(
        "quadratic",
        _vec(lambda x: 0.5 * a * x * x),
        _vec(lambda x: a * x),
        _vec(lambda x: np.full_like(x, a)),
        {"a": a},
    )


def _double_well():
    return Potential(
        "double_well",
        _vec(lambda x: x**4 / 4 - x**2 / 2),
        _vec(lambda x: x**3 - x),
        _vec(lambda x: 3 * x**2 - 1),
    )


def _gaussian(a=1.0, sigma=1.0):
    if not sigma > 0:
        raise ConfigurationError("gaussian width sigma must be positive")
    s2 = sigma * sigma
    return Potential(
        "gaussian",
        _vec(lambda x: -a * np.exp(-x * x / (2 * s2))),
        _vec(lambda x: a * x / s2 * np.exp(-x * x / (2 * s2))),
        _vec(lambda x: a / s2 * (1 - x * x / s2) * np.exp(-x * x / (2 * s2))),
        {"a": a, "sigma": sigma},
    )


def _power_law(a=4.0, b=2.0):
    if a < 2 or b < 2:
        raise ConfigurationError(f"power_law exponents must be >= 2 for a C^2 potential, got a={a}, b={b}")

    def d1(x):
        ax = np.abs(x)
        return np.sign(x) * (np.power(ax, a - 1) - np.power(ax, b - 1))

    def d2(x):
        ax = np.abs(x)
        return (a - 1) * np.power(ax, a - 2) - (b - 1) * np.power(ax, b - 2)

    return Potential(
        "power_law",
        _vec(lambda x: np.power(np.abs(x), a) / a - np.power(np.abs(x), b) / b),
        _vec(d1),
        _vec(d2),
        {"a": a, "b": b},
    )


def _morse(Cr=0.5, lr=0.5, Ca=1.0, la=1.0):
    # Gaussian-profile variant: the exponential |x| profiles are not C^2 at 0.
    if not (lr > 0 and la > 0):
        raise ConfigurationError("morse length scales must be positive")

    def bump(x, C, l):
        return C * np.exp(-x * x / (l * l))

    def f(x):
        return bump(x, Cr, lr) - bump(x, Ca, la)

    def d1(x):
        return -2 * x / lr**2 * bump(x, Cr, lr) + 2 * x / la**2 * bump(x, Ca, la)

    def d2(x):
        return (4 * x * x / lr**4 - 2 / lr**2) * bump(x, Cr, lr) - (4 * x * x / la**4 - 2 / la**2) * bump(x, Ca, la)

    return Potential("morse", _vec(f), _vec(d1), _vec(d2), {"Cr": Cr, "lr": lr, "Ca": Ca, "la": la})


POTENTIALS = {
    "zero": _zero,
    "quadratic": _quadratic,
    "double_well": _double_well,
    "gaussian": _gaussian,
    "power_law": _power_law,
    "morse": _morse,
}


def expression_potential(src: str, d1: str | None = None, d2: str | None = None) -> Potential:
    """Potential from an expression in ``x``; missing derivatives are differenced."""
    e = parse_expression(src)
    e1 = parse_expression(d1) if d1 is not None else None
    e2 = parse_expression(d2) if d2 is not None else None
    f1 = _vec(e1) if e1 is not None else _vec(lambda x: central_derivative(e, x))
    if e2 is not None:
        f2 = _vec(e2)
    elif e1 is not None:
        f2 = _vec(lambda x: central_derivative(e1, x))
    else:
        f2 = _vec(lambda x: central_derivative(e, x, order=2))
    params = {"expr": src}
    if d1 is not None:
        params["d1"] = d1
    if d2 is not None:
        params["d2"] = d2
    return Potential("expression", _vec(e), f1, f2, params)


def make_potential(spec) -> Potential:
    """Build a potential from a builtin name, an expression, or a mapping.

    Mappings are ``{"kind": name, **params}`` or ``{"expr": src, "d1": ..., "d2": ...}``.
    """
    if spec is None:
        return _zero()
    if isinstance(spec, Potential):
        return spec
    if isinstance(spec, str):
        name = spec.strip()
        if name in POTENTIALS:
            return POTENTIALS[name]()
        return expression_potential(spec)
    if isinstance(spec, dict):
        spec = dict(spec)
        if "expr" in spec:
            extra = set(spec) - {"expr", "d1", "d2"}
            if extra:
                raise ConfigurationError(f"unknown keys for expression potential: {sorted(extra)}")
            return expression_potential(spec["expr"], spec.get("d1"), spec.get("d2"))
        kind = spec.pop("kind", None)
        if kind not in POTENTIALS:
            raise ConfigurationError(f"unknown potential {kind!r}; builtins are {sorted(POTENTIALS)}")
        try:
            return POTENTIALS[kind](**{k: float(v) for k, v in spec.items()})
        except TypeError as err:
            raise ConfigurationError(f"bad parameters for potential {kind!r}: {err}") from None
    raise ConfigurationError(f"cannot build a potential from {spec!r}")


def check_potential(pot: Potential, half_width: float, what: str, samples: int = 2049):
    """Sample ``pot`` and its derivatives on ``[-half_width, half_width]`` for finiteness."""
    x = np.linspace(-half_width, half_width, samples)
    for label, fn in (("", pot.f), ("'", pot.df), ("''", pot.d2f)):
        vals = np.asarray(fn(x))
        if not np.all(np.isfinite(vals)):
            bad = x[~np.isfinite(vals)][0]
            raise ConfigurationError(f"{what}{label} is not finite at x={bad:g}")


# ------------------------------------------------------------ initial data


@dataclass(frozen=True)
class InitialDatum:
    name: str
    f: Fn = field(repr=False)
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.f(x)

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


def _constant(c=1.0):
    return InitialDatum("constant", _vec(lambda x: np.full_like(x, c)), {"c": c})


def _gaussian_bump(amplitude=1.0, center=0.0, width=0.25, floor=0.0):
    return InitialDatum(
        "gaussian_bump",
        _vec(lambda x: floor + amplitude * np.exp(-((x - center) ** 2) / (2 * width**2))),
        {"amplitude": amplitude, "center": center, "width": width, "floor": floor},
    )


def _tent(height=1.0, center=0.0, halfwidth=1.0):
    return InitialDatum(
        "tent",
        _vec(lambda x: height * np.maximum(0.0, 1.0 - np.abs(x - center) / halfwidth)),
        {"height": height, "center": center, "halfwidth": halfwidth},
    )


def _cosine_mode(mean=1.0, amplitude=0.5, k=1.0, half_length=1.0):
    L = half_length
    return InitialDatum(
        "cosine_mode",
        _vec(lambda x: mean + amplitude * np.cos(k * np.pi * (x + L) / (2 * L))),
        {"mean": mean, "amplitude": amplitude, "k": k, "half_length": L},
    )


INITIAL_DATA = {
    "constant": _constant,
    "gaussian_bump": _gaussian_bump,
    "tent": _tent,
    "cosine_mode": _cosine_mode,
}


def make_initial_datum(spec, half_length: float | None = None) -> InitialDatum:
    """Initial datum from a builtin name, an expression in ``x`` or a mapping.

    ``cosine_mode`` takes the domain half-length from ``half_length`` unless
    given explicitly.
    """
    if isinstance(spec, InitialDatum):
        return spec
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return _constant(float(spec))
    params = {}
    if isinstance(spec, dict):
        params = dict(spec)
        if "expr" in params:
            if set(params) != {"expr"}:
                raise ConfigurationError("expression initial data take only the 'expr' key")
            e = parse_expression(params["expr"])
            return InitialDatum("expression", _vec(e), {"expr": params["expr"]})
        spec = params.pop("kind", None)
    if isinstance(spec, str):
        name = spec.strip()
        if name in INITIAL_DATA:
            if name == "cosine_mode" and "half_length" not in params and half_length is not None:
                params["half_length"] = half_length
            try:
                return INITIAL_DATA[name](**{k: float(v) for k, v in params.items()})
            except TypeError as err:
                raise ConfigurationError(f"bad parameters for initial datum {name!r}: {err}") from None
        if params:
            raise ConfigurationError(f"unknown initial datum {name!r}")
        e = parse_expression(spec)
        return InitialDatum("expression", _vec(e), {"expr": spec})
    raise ConfigurationError(f"cannot build an initial datum from {spec!r}")


# --------------------------------------------------------------- policy


class RhoPolicy(enum.Enum):
    """Density used inside the interaction term."""

    EXPLICIT = "explicit"
    IMPLICIT = "implicit"
    MIDPOINT = "midpoint"

    @property
    def weight(self) -> float:
        """Weight of the new density: ``rho** = (1 - c) rho^n + c rho^{n+1}``."""
        return {"explicit": 0.0, "implicit": 1.0, "midpoint": 0.5}[self.value]

    def combine(self, rho_old, rho_new):
        if self is RhoPolicy.EXPLICIT:
            return np.asarray(rho_old, dtype=float)
        if self is RhoPolicy.IMPLICIT:
            return np.asarray(rho_new, dtype=float)
        return 0.5 * (np.asarray(rho_old, dtype=float) + np.asarray(rho_new, dtype=float))

    @classmethod
    def parse(cls, value) -> "RhoPolicy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown density policy {value!r}; choose explicit, implicit or midpoint"
            ) from None


# ------------------------------------------------------------- model spec


@dataclass(frozen=True)
class ModelSpec:
    energy: EnergyFamily
    V: Potential = field(default_factory=_zero)
    W: Potential = field(default_factory=_zero)
    rho0: InitialDatum = field(default_factory=_constant)
    policy: RhoPolicy = RhoPolicy.MIDPOINT
    positivity_required: bool = False

    def __post_init__(self):
        object.__setattr__(self, "policy", RhoPolicy.parse(self.policy))
        if self.energy.requires_positivity:
            object.__setattr__(self, "positivity_required", True)

    def validate(self, half_length: float, samples: int = 2049):
        """Sample the data on the domain: potentials finite, datum admissible."""
        check_potential(self.V, half_length, "V")
        check_potential(self.W, 2 * half_length, "W")
        x = np.linspace(-half_length, half_length, samples)
        r = np.asarray(self.rho0(x), dtype=float)
        if not np.all(np.isfinite(r)):
            raise ConfigurationError("initial datum is not finite on the domain")
        if np.any(r < 0):
            raise ConfigurationError(f"initial datum is negative at x={x[np.argmax(r < 0)]:g}")
        if self.positivity_required and np.any(r <= 0):
            raise ConfigurationError(
                f"{self.energy.name} needs a strictly positive initial datum "
                f"(zero at x={x[np.argmax(r <= 0)]:g})"
            )
        return self
