"""JSON run configuration: schema, validation and dotted-path overrides.

Example::

    {
      "domain": {"L": 1.0, "M": 32},
      "time": {"T": 0.5, "dt": 0.01},
      "model": {
        "energy": {"kind": "porous_medium", "m": 2},
        "V": "x^2/2", "W": "zero", "rho0": "gaussian_bump",
        "policy": "midpoint"
      },
      "solver": {"tol": 1e-10},
      "diagnostics": {"enabled": true, "alpha": 0.5},
      "output": {"directory": "out", "snapshot_cadence": 1}
    }

``time`` takes exactly one of ``N`` (``N + 1`` intervals) and ``dt``.
"""

from __future__ import annotations

import copy
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .expr import ExpressionError
from .grid import Mesh, TimeGrid
from .model import (
    ConfigurationError,
    EnergyFamily,
    ModelSpec,
    RhoPolicy,
    make_initial_datum,
    make_potential,
)
from .solver import SolverConfig

OUTPUT_ENV = "AGGDIFF_OUTPUT_DIR"

CHECKS = (
    "energy",
    "potential_gradient",
    "linf_envelope",
    "flow_interchange",
    "grad_H_l2",
    "translates",
    "weak_residual",
)
FORMATS = ("csv", "json")
REFERENCES = ("heat_neumann", "gibbs_steady", "gibbs_discrete", "pme_barenblatt_steady")

DEFAULTS = {
    "solver": {"tol": 1e-10, "max_outer_iters": 200, "damping": 1.0, "method": "auto"},
    "diagnostics": {"enabled": True, "alpha": 0.5, "epsilon": None},
    "output": {"directory": "output", "snapshot_cadence": 1, "formats": ["csv", "json"], "faces": False},
}

_ALLOWED = {
    "": {"domain", "time", "model", "solver", "diagnostics", "output", "scenario"},
    "domain": {"L", "M"},
    "time": {"T", "N", "dt"},
    "model": {"energy", "V", "W", "rho0", "policy"},
    "solver": {"tol", "max_outer_iters", "damping", "method", "picard_budget"},
    "diagnostics": {"enabled", "alpha", "epsilon"},
    "output": {"directory", "snapshot_cadence", "formats", "faces"},
    "scenario": {"reference", "t_max", "residual_tol"},
}


def _err(path: str, msg: str) -> ConfigurationError:
    return ConfigurationError(f"{path}: {msg}" if path else msg)


def _section(raw: dict, key: str, required: bool = True) -> dict:
    if key not in raw:
        if required:
            raise _err(key, "missing section")
        return {}
    sec = raw[key]
    if not isinstance(sec, dict):
        raise _err(key, f"expected an object, got {type(sec).__name__}")
    extra = set(sec) - _ALLOWED[key]
    if extra:
        raise _err(f"{key}.{sorted(extra)[0]}", "unknown key")
    return sec


def _number(sec: dict, key: str, path: str, required: bool = True, default=None, integer=False, positive=True):
    if key not in sec or sec[key] is None:
        if required:
            raise _err(f"{path}.{key}", "missing")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _err(f"{path}.{key}", f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise _err(f"{path}.{key}", f"expected an integer, got {v!r}")
    if not math.isfinite(v) or (positive and v <= 0):
        raise _err(f"{path}.{key}", f"expected a positive finite number, got {v!r}")
    return int(v) if integer else float(v)


def build_energy(spec, path: str = "model.energy") -> EnergyFamily:
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise _err(path, "expected an object with a 'kind'")
    kind = spec["kind"]
    try:
        if kind == "porous_medium":
            return EnergyFamily.porous_medium(_number(spec, "m", path))
        if kind == "boltzmann":
            return EnergyFamily.boltzmann()
        if kind == "custom":
            if "H" not in spec:
                raise _err(f"{path}.H", "missing")
            return EnergyFamily.custom(spec["H"], spec.get("dH"), spec.get("d2H"))
    except (ConfigurationError, ExpressionError) as err:
        if str(err).startswith(path):
            raise
        raise _err(path, str(err)) from None
    raise _err(f"{path}.kind", f"unknown energy {kind!r}; choose porous_medium, boltzmann or custom")


@dataclass
class RunConfig:
    """Validated configuration with the built objects."""

    raw: dict
    mesh: Mesh
    timegrid: TimeGrid
    model: ModelSpec
    solver: SolverConfig
    checks: tuple
    alpha: float
    epsilon: float | None
    output_dir: Path
    snapshot_cadence: int
    formats: tuple
    faces: bool
    scenario: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def dt(self) -> float:
        return self.timegrid.dt

    def with_overrides(self, overrides) -> "RunConfig":
        return config_from_dict(apply_overrides(self.raw, overrides))

    def refined(self, factor: int) -> "RunConfig":
        """Same run with ``dx`` and ``dt`` both divided by ``factor``."""
        raw = copy.deepcopy(self.raw)
        raw["domain"]["M"] = self.mesh.M * factor
        raw["time"] = {"T": self.timegrid.T, "N": self.timegrid.intervals * factor - 1}
        return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    """Validate ``raw`` and build the run objects; errors name the key path."""
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration must be a JSON object")
    extra = set(raw) - _ALLOWED[""]
    if extra:
        raise _err(sorted(extra)[0], "unknown key")
    raw = copy.deepcopy(raw)
    for key, defaults in DEFAULTS.items():
        sec = raw.setdefault(key, {})
        if isinstance(sec, dict):
            for k, v in defaults.items():
                sec.setdefault(k, copy.deepcopy(v))

    dom = _section(raw, "domain")
    L = _number(dom, "L", "domain")
    M = _number(dom, "M", "domain", integer=True)
    mesh = Mesh(L, M)

    tim = _section(raw, "time")
    T = _number(tim, "T", "time")
    has_N, has_dt = tim.get("N") is not None, tim.get("dt") is not None
    if has_N == has_dt:
        raise _err("time", "give exactly one of N and dt")
    if has_N:
        N = _number(tim, "N", "time", integer=True, positive=False)
        if N < 0:
            raise _err("time.N", "must be >= 0")
        timegrid = TimeGrid.from_N(T, N)
    else:
        timegrid = TimeGrid.from_dt(T, _number(tim, "dt", "time"))

    mod = _section(raw, "model")
    energy = build_energy(mod.get("energy"))
    parts = {}
    for key, builder in (("V", make_potential), ("W", make_potential)):
        try:
            parts[key] = builder(mod.get(key, "zero"))
        except (ConfigurationError, ExpressionError) as err:
            raise _err(f"model.{key}", str(err)) from None
    if "rho0" not in mod:
        raise _err("model.rho0", "missing")
    try:
        rho0 = make_initial_datum(mod["rho0"], half_length=L)
    except (ConfigurationError, ExpressionError) as err:
        raise _err("model.rho0", str(err)) from None
    try:
        policy = RhoPolicy.parse(mod.get("policy", "midpoint"))
    except ConfigurationError as err:
        raise _err("model.policy", str(err)) from None
    model = ModelSpec(energy, parts["V"], parts["W"], rho0, policy)
    try:
        model.validate(L)
    except ConfigurationError as err:
        raise _err("model", str(err)) from None

    sol = _section(raw, "solver")
    try:
        solver = SolverConfig(
            tol=_number(sol, "tol", "solver"),
            max_outer_iters=_number(sol, "max_outer_iters", "solver", integer=True),
            damping=_number(sol, "damping", "solver"),
            method=str(sol.get("method", "auto")),
            picard_budget=_number(sol, "picard_budget", "solver", required=False, default=30, integer=True),
        )
    except ConfigurationError as err:
        if str(err).startswith("solver"):
            raise
        raise _err("solver", str(err)) from None

    diag = _section(raw, "diagnostics")
    enabled = diag.get("enabled", True)
    if enabled is True:
        checks = CHECKS
    elif enabled is False or enabled is None:
        checks = ()
    elif isinstance(enabled, list) and all(isinstance(c, str) for c in enabled):
        bad = [c for c in enabled if c not in CHECKS]
        if bad:
            raise _err("diagnostics.enabled", f"unknown check {bad[0]!r}; available: {', '.join(CHECKS)}")
        checks = tuple(enabled)
    else:
        raise _err("diagnostics.enabled", "expected true, false or a list of check names")
    alpha = _number(diag, "alpha", "diagnostics", required=False, default=0.5)
    if not 0 < alpha < 1:
        raise _err("diagnostics.alpha", "must lie in (0, 1)")
    eps = diag.get("epsilon")
    if eps is not None:
        if isinstance(eps, bool) or not isinstance(eps, (int, float)) or not (eps >= 0 and math.isfinite(eps)):
            raise _err("diagnostics.epsilon", f"expected a nonnegative number, got {eps!r}")
        eps = float(eps)

    out = _section(raw, "output")
    directory = os.environ.get(OUTPUT_ENV) or out.get("directory", "output")
    if not isinstance(directory, str):
        raise _err("output.directory", "expected a path string")
    cadence = _number(out, "snapshot_cadence", "output", integer=True)
    formats = out.get("formats", ["csv", "json"])
    if not isinstance(formats, list) or any(f not in FORMATS for f in formats):
        raise _err("output.formats", f"expected a list drawn from {FORMATS}")
    faces = out.get("faces", False)
    if not isinstance(faces, bool):
        raise _err("output.faces", "expected true or false")

    scen = _section(raw, "scenario", required=False)
    if "reference" in scen and scen["reference"] not in REFERENCES:
        raise _err("scenario.reference", f"unknown reference {scen['reference']!r}; choose from {REFERENCES}")
    for key in ("t_max", "residual_tol"):
        if key in scen:
            _number(scen, key, "scenario")

    notes = []
    if "linf_envelope" in checks:
        from .diagnostics import bound_constants
        from .discretize import discretize_initial

        mass = float(discretize_initial(rho0, mesh).sum() * mesh.dx)
        c2 = bound_constants(model, mesh, mass).C_V2
        if timegrid.dt * c2 >= 1:
            msg = f"dt*C_V2 = {timegrid.dt * c2:.3g} >= 1: the upper L-infinity envelope will not be checked"
            notes.append(msg)
            warnings.warn(msg, stacklevel=2)

    return RunConfig(
        raw=raw,
        mesh=mesh,
        timegrid=timegrid,
        model=model,
        solver=solver,
        checks=checks,
        alpha=alpha,
        epsilon=eps,
        output_dir=Path(directory),
        snapshot_cadence=cadence,
        formats=tuple(formats),
        faces=faces,
        scenario=dict(scen),
        warnings=notes,
    )


def load_config(path, overrides=()) -> RunConfig:
    """Read a JSON configuration file, apply ``a.b=value`` overrides and validate."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigurationError(f"configuration file not found: {path}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"{path}: invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from None
    return config_from_dict(apply_overrides(raw, overrides))


def parse_override(item: str):
    """``"a.b=value"`` to ``(["a", "b"], value)``; values are JSON when they parse."""
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} must look like key.path=value")
    key, text = item.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigurationError(f"override {item!r} has an empty key segment")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return parts, value


def apply_overrides(raw: dict, overrides) -> dict:
    """Copy of ``raw`` with dotted-path overrides applied.

    Setting ``time.dt`` drops ``time.N`` and vice versa, so a grid can be
    changed from the command line without editing the file.
    """
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        parts, value = parse_override(item)
        node = raw
        for p in parts[:-1]:
            nxt = node.setdefault(p, {})
            if not isinstance(nxt, dict):
                raise ConfigurationError(f"override {item!r}: {p} is not an object")
            node = nxt
        node[parts[-1]] = value
        if parts[0] == "time" and len(parts) == 2 and parts[1] in ("N", "dt"):
            node.pop("dt" if parts[1] == "N" else "N", None)
    return raw
