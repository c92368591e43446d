"""Command-line front end: ``twtoa {simulate,estimate,sweep,landscape}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_method, parse_time
from .estimators import (
    Method,
    ParameterEstimate,
    counter_based_estimate,
    mom_estimate,
    traditional_estimate,
)
from .likelihood import ScenarioConstants, landscape
from .model import MeasurementFormatError, read_measurements, synthesize_measurements, write_measurements
from .montecarlo import run_sweep, write_sweep
from .optimize import amle_estimate


class CommandError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def cmd_simulate(args) -> int:
    cfg = RunConfig.load(args.config)
    scenario = cfg.scenario()
    if args.samples is not None:
        scenario = scenario.replace(num_samples=args.samples)
    ms = synthesize_measurements(scenario, args.seed)
    try:
        paths = write_measurements(ms, args.out, version=__version__)
    except OSError as exc:
        raise CommandError(f"cannot write {exc.filename or args.out}: {exc.strerror}") from None
    for p in paths:
        print(p, file=sys.stderr)
    return 0


def _estimate(ms, method: Method, cfg: RunConfig, consts: ScenarioConstants) -> ParameterEstimate:
    if method in (Method.MOM_LINEARIZED, Method.MOM_QUARTIC):
        return mom_estimate(ms, consts.T0, consts.D, consts.c, quartic=method is Method.MOM_QUARTIC)
    if method is Method.TRADITIONAL:
        return traditional_estimate(ms, consts.T0, consts.D, consts.c)
    if method is Method.COUNTER_BASED:
        if ms.reported_counts is None:
            raise CommandError("counter-based estimation needs a reported-count file next to the measurements")
        return counter_based_estimate(ms, ms.reported_counts, consts.T0, consts.c)
    return amle_estimate(ms, cfg.search_box(), top=cfg.top_candidates, consts=consts)


def cmd_estimate(args) -> int:
    cfg = RunConfig.load(args.config)
    method = parse_method(args.method)
    try:
        ms = read_measurements(args.measurements)
    except MeasurementFormatError as exc:
        raise CommandError(str(exc)) from None
    except OSError as exc:
        raise CommandError(f"cannot read {args.measurements}: {exc.strerror}") from None
    # protocol constants come from the sidecar when present, otherwise from the config
    consts = ScenarioConstants.of(ms.scenario if ms.scenario is not None else cfg.scenario())
    try:
        est = _estimate(ms, method, cfg, consts)
    except ValueError as exc:
        raise CommandError(f"{method.value}: {exc}") from None
    writer = csv.writer(sys.stdout, lineterminator="\n")
    if not args.no_header:
        writer.writerow(ParameterEstimate.CSV_HEADER)
    writer.writerow(est.csv_row())
    if args.strict and est.flags:
        print(f"error: estimate flagged: {', '.join(est.flags)}", file=sys.stderr)
        return 3
    return 0


def cmd_sweep(args) -> int:
    cfg = RunConfig.load(args.config)
    spec = cfg.sweep_spec()
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if overrides:
        from dataclasses import replace

        spec = replace(spec, **overrides)
    workers = args.workers if args.workers is not None else cfg.workers
    result = run_sweep(spec, workers=workers)
    try:
        paths = write_sweep(result, args.out, name=args.name)
    except OSError as exc:
        raise CommandError(f"cannot write {exc.filename or args.out}: {exc.strerror}") from None
    for p in paths:
        print(p, file=sys.stderr)
    return 0


def cmd_landscape(args) -> int:
    cfg = RunConfig.load(args.config)
    scenario = cfg.scenario()
    if args.measurements:
        try:
            ms = read_measurements(args.measurements)
        except MeasurementFormatError as exc:
            raise CommandError(str(exc)) from None
    else:
        ms = synthesize_measurements(scenario, args.seed)
    consts = ScenarioConstants.of(ms.scenario if ms.scenario is not None else scenario)
    box = cfg.search_box()
    ranges = {"d": box.d_range_m, "w": box.w_range, "sigma": box.sigma_range_s}
    if args.fix not in ranges:
        raise CommandError(f"invalid axis {args.fix!r}; choose one of d, w, sigma")
    value = parse_time(args.value, consts.c) if args.fix == "sigma" else float(args.value)
    free = [ax for ax in ("d", "w", "sigma") if ax != args.fix]
    grids = [np.linspace(*ranges[ax], args.grid) for ax in free]
    name1, name2, rows = landscape(ms, consts, args.fix, value, *grids)
    out = Path(args.out)
    try:
        with out.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([name1, name2, "objective"])
            for p1, p2, obj in rows:
                writer.writerow([repr(float(p1)), repr(float(p2)), repr(float(obj))])
        meta = {"version": __version__, "fixed_axis": args.fix, "fixed_value": value,
                "grid": args.grid, "seed": ms.seed, "num_samples": len(ms)}
        out.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise CommandError(f"cannot write {exc.filename or out}: {exc.strerror}") from None
    print(out, file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twtoa", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration (defaults reproduce the reference setup)")

    p = sub.add_parser("simulate", help="synthesize a measurement set")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, help="override scenario.num_samples")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate (d, w, sigma^2) from a measurement CSV")
    common(p)
    p.add_argument("measurements")
    p.add_argument("--method", default="mom", choices=sorted(m for m in
                   ("amle", "mom", "mom-quartic", "traditional", "counter")))
    p.add_argument("--strict", action="store_true", help="exit nonzero if the estimate carries a flag")
    p.add_argument("--no-header", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="Monte Carlo sweep over noise level or sample count")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", default="sweep")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="override sweep.base_seed")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("landscape", help="AMLE objective over a 2-D grid with one parameter fixed")
    common(p)
    p.add_argument("--fix", required=True, help="axis held fixed: d, w or sigma")
    p.add_argument("--value", required=True, help="value of the fixed axis (sigma accepts an 'm' suffix)")
    p.add_argument("--grid", type=int, default=50, help="points per free axis")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--measurements", help="use this CSV instead of synthesizing")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_landscape)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CommandError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "code", 2)


if __name__ == "__main__":
    sys.exit(main())
