"""Command-line entry point (``leakyqkd``).

Exit codes: 0 success, 1 validation failure, 2 solver failure, 3 invalid
configuration.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .conic import SolverSettings
from .config import ConfigError, load_config
from .optics import PhaseProfile, fractional_phase_profile, profile_knots
from .scenario import ScenarioSolverError, emit, point_gram, run_scenario, sweep_points
from .security import InconsistentInputsError
from .validation import run_validation

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser, jobs: bool = True) -> None:
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--conservative", action="store_true",
                   help="report e_ph = 1/2 instead of failing when a phase-error solve fails")
    p.add_argument("--tol-gap", type=float, help="duality-gap tolerance")
    p.add_argument("--tol-feas", type=float, help="feasibility tolerance")
    if jobs:
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leakyqkd", description="MDI-QKD key rates with a leaky source")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keyrate", help="key rate for a single-point configuration")
    p.add_argument("config", help="config file or preset name")
    _common(p)

    p = sub.add_parser("sweep", help="run every sweep point and write CSV")
    p.add_argument("config", help="config file or preset name (fig2a ... fig6)")
    _common(p)

    p = sub.add_parser("phase-profile", help="fractional phase profile of the leakage light")
    p.add_argument("--L", type=float, default=150.0, dest="L", help="modulator transit time (ps)")
    p.add_argument("--w", type=float, default=200.0, dest="w", help="voltage pulse width (ps)")
    p.add_argument("--points", type=int, default=0, help="also tabulate f(t) on this many points")
    p.add_argument("--out", help="CSV path for the tabulated profile")

    p = sub.add_parser("validate", help="run the oracle suite")
    p.add_argument("--quick", action="store_true", help="fewer random instances")
    _common(p, jobs=False)

    p = sub.add_parser("dump-gram", help="write the joint signal Gram of a configuration")
    p.add_argument("config", help="config file or preset name")
    _common(p, jobs=False)
    return parser


def _load(args):
    return load_config(args.config, tol_gap=args.tol_gap, tol_feas=args.tol_feas,
                       conservative=True if args.conservative else None)


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def cmd_sweep(args) -> int:
    config = _load(args)
    rows = run_scenario(config, jobs=max(1, args.jobs))
    emit(rows, args.out or sys.stdout)
    return EXIT_OK


def cmd_keyrate(args) -> int:
    config = _load(args)
    if len(sweep_points(config)) != 1:
        raise ConfigError("keyrate needs a single sweep point; use sweep for lists")
    row = run_scenario(config)[0]
    if args.out:
        emit([row], args.out)
    for name in ("rate", "raw_rate", "e_ph_upper", "e_bit", "p_pass_key", "solver_status", "solver_gap",
                 "conservative"):
        v = getattr(row, name)
        print(f"{name} = {v:.15g}" if isinstance(v, float) else f"{name} = {v}")
    return EXIT_OK


def cmd_phase_profile(args) -> int:
    try:
        prof = PhaseProfile(args.L, args.w)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    knots = profile_knots(prof)
    print(f"peak = {prof.peak:.15g}")
    print(f"support_length = {prof.support_length:.15g}")
    print("knots = " + ", ".join(f"{k:.15g}" for k in knots))
    if args.points:
        if args.points < 2:
            raise ConfigError("--points must be at least 2")
        t = np.linspace(knots[0], knots[-1], args.points)
        f = fractional_phase_profile(t, prof)
        fh = _open_out(args.out)
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_ps", "fraction"])
            w.writerows([f"{a:.15g}", f"{b:.15g}"] for a, b in zip(t, f))
        finally:
            if fh is not sys.stdout:
                fh.close()
    return EXIT_OK


def cmd_validate(args) -> int:
    settings = None
    if args.tol_gap is not None or args.tol_feas is not None:
        defaults = SolverSettings()
        settings = SolverSettings(tol_gap=args.tol_gap or defaults.tol_gap, tol_feas=args.tol_feas or defaults.tol_feas)
    results = run_validation(settings, quick=args.quick)
    lines = [r.line() for r in results]
    fh = _open_out(args.out)
    try:
        fh.write("\n".join(lines) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def cmd_dump_gram(args) -> int:
    config = _load(args)
    keys = {(p.protocol, p.model, p.leak_param, p.test_phi) for p in sweep_points(config)}
    if len(keys) != 1:
        raise ConfigError("dump-gram needs a single protocol, model, leakage parameter and test angle")
    gram = point_gram(config, sweep_points(config)[0])
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "x", "y", "i2", "j2", "x2", "y2", "re", "im"])
        for a, la in enumerate(gram.labels):
            for b, lb in enumerate(gram.labels):
                g = gram.entries[a, b]
                w.writerow([*la, *lb, f"{g.real:.15g}", f"{g.imag:.15g}"])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


COMMANDS = {
    "keyrate": cmd_keyrate,
    "sweep": cmd_sweep,
    "phase-profile": cmd_phase_profile,
    "validate": cmd_validate,
    "dump-gram": cmd_dump_gram,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioSolverError, InconsistentInputsError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
