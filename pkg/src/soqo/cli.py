"""Command-line entry point: ``soqo <subcommand> ...``.

Exit status is 0 on success, 1 for configuration errors and 2 for runtime
failures; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bounds import bound_report
from .errors import ConfigError, SoqoError
from .experiments import load_config, parse_matrix, preset, preset_names, run_experiment, rows_to_csv
from .environments import read_trace_csv
from .montecarlo import offline_costs
from .schedules import KINDS, make_schedule

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def parse_a_spec(text: str):
    """``"0.3,1"`` (eigenvalues), a JSON array, or ``@file.json``."""
    text = text.strip()
    if text.startswith("@"):
        try:
            text = Path(text[1:]).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {text[1:]}: {exc.strerror}", "A") from None
    try:
        value = json.loads(text) if text.lstrip().startswith(("[", "{")) else [float(s) for s in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse {text!r}: {exc}", "A") from None
    return parse_matrix(value)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: $SOQO_SEED or config)")
    common.add_argument("--runs", type=int, default=None, help="override the number of replications")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo")

    p = argparse.ArgumentParser(prog="soqo", description="Smoothed online quadratic optimization experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("run", parents=[common], help="run an experiment from a TOML config")
    s.add_argument("config")
    s = sub.add_parser("preset", parents=[common], help="run a built-in preset")
    s.add_argument("name")
    s = sub.add_parser("bounds", parents=[common], help="print closed-form bounds as JSON")
    s.add_argument("A")
    s.add_argument("--gamma", type=float, default=None)
    s.add_argument("--T", type=int, default=None)
    s.add_argument("--sigma2", type=float, default=None, help="isotropic per-coordinate increment variance")
    s = sub.add_parser("offline", parents=[common], help="offline-optimal cost of a trace CSV")
    s.add_argument("trace")
    s.add_argument("--A", dest="A", default=None, help="A-spec (default: the sidecar's 'A')")
    s = sub.add_parser("dump-schedule", parents=[common], help="print a coefficient schedule as CSV")
    s.add_argument("A")
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--kind", choices=KINDS, required=True)
    s.add_argument("--gamma", type=float, default=None)
    s.add_argument("--c", default=None, help="FI eigenvalues, comma separated")
    sub.add_parser("list-presets", parents=[common], help="list built-in presets")
    return p


def _emit(text: str, out: str | None, filename: str):
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / filename).write_text(text)
    print(path / filename)


def _run(config, args) -> int:
    rows = run_experiment(config, workers=args.workers)
    sys.stdout.write(rows_to_csv(rows))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    overrides = {"seed": args.seed, "runs": args.runs, "out_dir": args.out}
    try:
        # configuration phase: anything raised here is a config error
        if args.command in ("list-presets",) or (args.command == "preset" and args.name == "list-presets"):
            print("\n".join(preset_names()))
            return EXIT_OK
        if args.command == "run":
            config = load_config(args.config, **overrides)
        elif args.command == "preset":
            config = preset(args.name, **overrides)
        elif args.command in ("bounds", "dump-schedule"):
            A = parse_a_spec(args.A)
        elif args.command == "offline":
            trace, meta = read_trace_csv(args.trace)
            if args.A is not None:
                A = parse_a_spec(args.A)
            elif "A" in meta:
                A = parse_matrix(meta["A"])
            else:
                raise ConfigError("no --A given and the trace sidecar has no 'A'", "A")
    except (SoqoError, ValueError, OSError) as exc:
        print(f"soqo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command in ("run", "preset"):
            return _run(config, args)
        if args.command == "bounds":
            Sigma = None if args.sigma2 is None else args.sigma2 * np.eye(A.dim)
            report = bound_report(A, Sigma=Sigma, T=args.T, gamma=args.gamma)
            _emit(report.to_json() + "\n", args.out, "bounds.json")
            return EXIT_OK
        if args.command == "dump-schedule":
            c = None if args.c is None else [float(s) for s in args.c.split(",")]
            sched = make_schedule(args.kind, A, args.T, gamma=args.gamma, C_eigvals=c)
            buf = _csv_schedule(sched)
            _emit(buf, args.out, f"schedule-{sched.label().replace(':', '-')}.csv")
            return EXIT_OK
        if args.command == "offline":
            if trace.dim != A.dim:
                raise ConfigError(f"trace dim {trace.dim} does not match A ({A.dim})", "A")
            cost, resid = offline_costs(A, trace.v, trace.x0)
            print(json.dumps({"offline_cost": float(cost), "kkt_residual": float(resid)}))
            return EXIT_OK
    except ConfigError as exc:
        print(f"soqo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SoqoError, ValueError, OSError, ArithmeticError) as exc:
        print(f"soqo: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


def _csv_schedule(sched) -> str:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "coord", "rho"])
    for t, i, rho in sched.rows():
        w.writerow([t, i, repr(rho)])
    return buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
