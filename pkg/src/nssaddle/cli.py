"""Command line: ``nssaddle {run,slope,plot,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench.acceptance import CHECKS, SMOKE, Grid, verify
from .bench.config import ConfigError, ExperimentConfig
from .bench.fit import SlopeUndefined, fit_slope
from .bench.plot import plot_emit
from .bench.runner import run_experiment


def _ints(text: str) -> tuple:
    """'0,1,2' or '0-7' (inclusive range)."""
    out = []
    for part in text.split(","):
        if "-" in part.strip("-"):
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required")
    cfg = ExperimentConfig.load(args.config)
    return cfg.override(out=args.out, seeds=args.seeds, horizons=args.horizons, solver=args.solver,
                        schedule=args.schedule, jobs=args.jobs, timing=args.timing or None)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    path = run_experiment(cfg)
    print(path)
    if args.plot:
        for p in plot_emit(path, Path(args.plot)):
            print(p)
    return 0


def cmd_slope(args) -> int:
    try:
        fit = fit_slope(args.csv, args.solver, args.schedule, args.kind)
    except SlopeUndefined as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    print(json.dumps(fit.to_dict(), indent=2))
    return 0


def cmd_plot(args) -> int:
    kinds = None if args.kind is None else [args.kind]
    for p in plot_emit(args.csv, Path(args.plot or "plots"), args.solver, args.schedule, kinds):
        print(p)
    return 0


def cmd_verify(args) -> int:
    grid = SMOKE if args.smoke else Grid()
    grid = Grid(args.horizons or grid.horizons, args.seeds or grid.seeds, args.jobs or 1)
    doc = verify(args.out or "verify-out", ids=args.only, grid=grid, timing=args.timing, echo=print)
    print(json.dumps({"passed": doc["passed"], "failed": [c["id"] for c in doc["checks"] if not c["passed"]]}))
    if args.plot:
        csv = Path(args.out or "verify-out") / "acceptance.csv"
        if csv.stat().st_size > len("solver") + 1:
            plot_emit(csv, Path(args.plot))
    return 0 if doc["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nssaddle", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config")
        sp.add_argument("--out")
        sp.add_argument("--seeds", type=_ints)
        sp.add_argument("--horizons", type=_ints)
        sp.add_argument("--solver")
        sp.add_argument("--schedule")
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--plot", metavar="DIR", help="also write log-log plots to DIR")
        sp.add_argument("--timing", action="store_true", help="record wall-clock times (breaks byte-identity)")

    sp = sub.add_parser("run", help="run a solver x schedule x horizon x seed grid to CSV")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("slope", help="fit the log-log exponent of mean regret")
    sp.add_argument("csv")
    sp.add_argument("--solver", required=True)
    sp.add_argument("--schedule", required=True)
    sp.add_argument("--kind", required=True, help="SSP, SPP, DSPP, DSPF, DSPM or DSP")
    sp.set_defaults(func=cmd_slope)

    sp = sub.add_parser("plot", help="render log-log regret curves")
    sp.add_argument("csv")
    sp.add_argument("--solver")
    sp.add_argument("--schedule")
    sp.add_argument("--kind")
    sp.add_argument("--plot", metavar="DIR")
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("verify", help="run the acceptance suite")
    common(sp)
    sp.add_argument("--only", type=_ints, help=f"subset of checks {min(CHECKS)}-{max(CHECKS)}")
    sp.add_argument("--smoke", action="store_true", help="tiny horizons and two seeds")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
