"""CSV and JSON artifacts of a run, and reading snapshots back."""

from __future__ import annotations

import csv
import json
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .grid import Mesh, TimeGrid, Trajectory, expected_levels

SNAPSHOT_COLUMNS = ("n", "t", "i", "x_i", "rho")
FACE_COLUMNS = ("n", "i_half", "u", "F")


class OutputError(OSError):
    """Failure to read or write an artifact; the message carries the path."""


def fmt(v) -> str:
    return format(float(v), ".17g")


def jsonable(obj):
    """Recursively replace non-finite floats by ``None`` and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _open(path: Path, mode="w"):
    try:
        return open(path, mode, newline="" if "b" not in mode else None)
    except OSError as err:
        raise OutputError(f"cannot open {path}: {err.strerror or err}") from None


def write_json(path: Path, data) -> None:
    with _open(path) as fh:
        try:
            json.dump(jsonable(data), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
        except OSError as err:
            raise OutputError(f"cannot write {path}: {err.strerror or err}") from None


def write_snapshots(path: Path, traj: Trajectory, cadence: int = 1) -> int:
    """Rows ``n, t, i, x_i, rho`` for every ``cadence``-th stored level plus the last.

    ``i`` is 1-based.  Returns the number of data rows.
    """
    wanted = set(expected_levels(traj.timegrid.intervals, cadence).tolist())
    x = traj.mesh.centers
    dt = traj.timegrid.dt
    rows = 0
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_COLUMNS)
        for n, rho in zip(traj.levels, traj.densities):
            if int(n) not in wanted:
                continue
            t = fmt(n * dt)
            for i, (xi, r) in enumerate(zip(x, rho), start=1):
                w.writerow((int(n), t, i, fmt(xi), fmt(r)))
                rows += 1
    return rows


def write_faces(path: Path, faces, mesh: Mesh, cadence: int = 1) -> None:
    """Velocity and flux on the interior faces; ``i_half = j + 1/2`` sits between cells ``j`` and ``j+1``."""
    steps = len(faces)
    wanted = set(expected_levels(steps, cadence).tolist())
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(FACE_COLUMNS)
        for k, (u, F) in enumerate(faces):
            n = k + 1
            if n not in wanted:
                continue
            for j, (uj, Fj) in enumerate(zip(u, F), start=1):
                w.writerow((n, f"{j}.5", fmt(uj), fmt(Fj)))


def versions() -> dict:
    return {
        "aggdiff": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def run_record(cfg, command: str, started: datetime, elapsed: float, extra: dict | None = None) -> dict:
    """Resolved configuration and versions; wall-clock fields live under ``timing``."""
    rec = {
        "command": command,
        "config": cfg.raw,
        "derived": {
            "dx": cfg.mesh.dx,
            "dt": cfg.timegrid.dt,
            "steps": cfg.timegrid.intervals,
            "cells": cfg.mesh.cell_count,
            "checks": list(cfg.checks),
        },
        "versions": versions(),
        "timing": {
            "started": started.isoformat(),
            "finished": datetime.now(timezone.utc).isoformat(),
            "elapsed_seconds": elapsed,
        },
    }
    if extra:
        rec.update(extra)
    return rec


def prepare_directory(directory: Path) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OutputError(f"cannot create output directory {directory}: {err.strerror or err}") from None
    return directory


def emit_outputs(artifacts, cfg, command: str = "run", started: datetime | None = None,
                 extra_diagnostics: dict | None = None) -> dict:
    """Write snapshots.csv, faces.csv (if recorded), diagnostics.json and run.json.

    Returns a map from artifact name to path.
    """
    started = started or datetime.now(timezone.utc)
    out = prepare_directory(cfg.output_dir)
    paths = {}
    traj = artifacts.result.trajectory
    if "csv" in cfg.formats:
        paths["snapshots"] = out / "snapshots.csv"
        write_snapshots(paths["snapshots"], traj, cfg.snapshot_cadence)
        if artifacts.result.faces is not None:
            paths["faces"] = out / "faces.csv"
            write_faces(paths["faces"], artifacts.result.faces, traj.mesh, cfg.snapshot_cadence)
    if "json" in cfg.formats:
        diag = dict(artifacts.diagnostics)
        if extra_diagnostics:
            diag.update(extra_diagnostics)
        paths["diagnostics"] = out / "diagnostics.json"
        write_json(paths["diagnostics"], diag)
        paths["run"] = out / "run.json"
        write_json(paths["run"], run_record(cfg, command, started, artifacts.elapsed))
    return paths


def read_snapshots(path, mesh: Mesh, timegrid: TimeGrid) -> Trajectory:
    """Rebuild a trajectory from snapshots.csv, checking it against the configured grids."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as err:
        raise OutputError(f"cannot read {path}: {err.strerror or err}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SNAPSHOT_COLUMNS:
            raise OutputError(f"{path}: expected header {','.join(SNAPSHOT_COLUMNS)}")
        levels: dict[int, np.ndarray] = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                n, i, rho = int(row[0]), int(row[2]), float(row[4])
            except (ValueError, IndexError):
                raise OutputError(f"{path}:{lineno}: malformed row") from None
            if not 1 <= i <= mesh.cell_count:
                raise OutputError(f"{path}:{lineno}: cell index {i} outside 1..{mesh.cell_count}")
            levels.setdefault(n, np.full(mesh.cell_count, np.nan))[i - 1] = rho
    if not levels:
        raise OutputError(f"{path}: no data rows")
    ns = sorted(levels)
    dens = np.array([levels[n] for n in ns])
    if np.isnan(dens).any():
        raise OutputError(f"{path}: some time level lacks cells for the configured mesh")
    cadence = ns[1] - ns[0] if len(ns) > 2 else max(ns[-1], 1)
    try:
        return Trajectory(mesh, timegrid, dens, np.array(ns), cadence)
    except ValueError as err:
        raise OutputError(f"{path}: {err}") from None


def print_json(data) -> None:
    json.dump(jsonable(data), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
