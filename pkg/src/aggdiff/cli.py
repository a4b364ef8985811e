"""Command line: ``aggdiff run|study|steady|check <config.json>``.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 I/O error.  ``--set key.path=value`` overrides configuration entries
(values are parsed as JSON when possible).  The output directory can be
redirected with the ``AGGDIFF_OUTPUT_DIR`` environment variable.
"""

from __future__ import annotations

import argparse
import sys
import time
from datetime import datetime, timezone

from . import harness
from .config import OUTPUT_ENV, load_config
from .discretize import discretize
from .expr import ExpressionError
from .model import ConfigurationError
from .output import OutputError, emit_outputs, prepare_directory, print_json, read_snapshots, run_record, write_json
from .solver import RunResult, SolverError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def _summary_line(name, rep) -> str:
    status = "ok" if rep["holds"] else "VIOLATED"
    return f"  {name:<32s} {status:<9s} slack={rep['slack']}"


def cmd_run(args, cfg) -> int:
    started = datetime.now(timezone.utc)
    art = harness.execute_run(cfg)
    paths = emit_outputs(art, cfg, "run", started)
    rep = art.result.reports
    print(f"{len(rep)} steps in {art.elapsed:.2f}s, mass drift "
          f"{abs(rep[-1].mass_after - rep[0].mass_before) if rep else 0.0:.3g}")
    for name, r in art.diagnostics.get("checks", {}).items():
        print(_summary_line(name, r))
    for note in art.diagnostics.get("notes", []):
        print(f"  note: {note}")
    for key, path in paths.items():
        print(f"wrote {key}: {path}")
    return EXIT_OK


def cmd_study(args, cfg) -> int:
    started = datetime.now(timezone.utc)
    study = harness.refinement_study(cfg, args.levels, args.reference)
    print(f"reference: {study.reference}" + (f" ({study.reference_name})" if study.reference_name else ""))
    print(f"{'M':>6s} {'dx':>11s} {'dt':>11s} {'err_L1':>11s} {'err_L2':>11s} {'eoc_L1':>7s} {'eoc_L2':>7s}")
    for r in study.rows:
        print(f"{r.M:6d} {r.dx:11.4e} {r.dt:11.4e} {r.error_L1:11.4e} {r.error_L2:11.4e} "
              f"{r.eoc_L1:7.3f} {r.eoc_L2:7.3f}" + ("  degenerate" if r.degenerate else ""))
    if "json" in cfg.formats:
        out = prepare_directory(cfg.output_dir)
        write_json(out / "diagnostics.json", {"study": study.to_dict()})
        write_json(out / "run.json", run_record(cfg, "study", started, study.elapsed,
                                                {"study": {"levels": args.levels, "reference": args.reference}}))
        print(f"wrote {out / 'diagnostics.json'}")
    return EXIT_OK


def cmd_steady(args, cfg) -> int:
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    res = harness.steady_state_run(cfg, args.t_max, args.residual_tol)
    elapsed = time.perf_counter() - t0
    state = "converged" if res.converged else "not converged"
    print(f"{state} after {res.steps} steps (t={res.t:.6g}); L1 distance to {res.reference_name}: {res.distance:.6e}")
    if "json" in cfg.formats:
        out = prepare_directory(cfg.output_dir)
        write_json(out / "diagnostics.json", {"steady": res.to_dict(), "final": res.rho,
                                              "steps": [r.to_dict() for r in res.reports]})
        write_json(out / "run.json", run_record(cfg, "steady", started, elapsed))
        print(f"wrote {out / 'diagnostics.json'}")
    return EXIT_OK


def cmd_check(args, cfg) -> int:
    path = args.snapshots or (cfg.output_dir / "snapshots.csv")
    traj = read_snapshots(path, cfg.mesh, cfg.timegrid)
    problem = discretize(cfg.model, cfg.mesh)
    diag = harness.run_diagnostics(cfg, problem, RunResult(traj, []))
    for name, r in diag.get("checks", {}).items():
        print(_summary_line(name, r))
    for note in diag.get("notes", []):
        print(f"  note: {note}")
    if args.json:
        print_json(diag)
    if "json" in cfg.formats:
        out = prepare_directory(cfg.output_dir)
        write_json(out / "check.json", diag)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aggdiff", description=__doc__.split("\n\n")[0],
                                epilog=f"Set {OUTPUT_ENV} to override output.directory.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="JSON configuration file")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration entry, e.g. time.dt=0.001 (repeatable)")

    common(sub.add_parser("run", help="march a configuration and write snapshots and diagnostics"))
    sp = sub.add_parser("study", help="coupled dx/dt refinement with observed orders")
    common(sp)
    sp.add_argument("--levels", type=int, default=3)
    sp.add_argument("--reference", choices=("analytic", "finest"), default="analytic")
    sp = sub.add_parser("steady", help="march to a steady state and compare with the reference")
    common(sp)
    sp.add_argument("--t-max", type=float, default=None)
    sp.add_argument("--residual-tol", type=float, default=None)
    sp = sub.add_parser("check", help="evaluate diagnostics on an existing snapshots.csv")
    common(sp)
    sp.add_argument("--snapshots", default=None, help="defaults to <output directory>/snapshots.csv")
    sp.add_argument("--json", action="store_true", help="print the full diagnostics as JSON")
    return p


COMMANDS = {"run": cmd_run, "study": cmd_study, "steady": cmd_steady, "check": cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        return COMMANDS[args.command](args, cfg)
    except (ConfigurationError, ExpressionError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except (OutputError, OSError) as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
