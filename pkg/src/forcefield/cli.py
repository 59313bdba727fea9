"""Command line driver.

Exit codes: 0 success, 1 quality gate failed (timestamp gaps), 2 usage or
configuration error, 3 I/O error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import load_pipeline, load_scenario
from .errors import ConfigError, EmptyLog, FormatError, NotPositiveDefinite
from .fieldmap import build_grid_from_points, export_csv, export_geojson, fit_force_field, render
from .fusion import fuse, read_fused_csv, write_fused_csv
from .gp import KINDS, kernel_kind
from .logio import export_kml, parse_log, write_log
from .pipeline import StageError, load_models, max_gaps, run_pipeline, save_models, training_points
from .simulate import simulate_run
from .sync import DEFAULT_SLOP, align

log = logging.getLogger("forcefield")

EXIT_OK, EXIT_GAP, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _kernel(name: str) -> str:
    try:
        return kernel_kind(name)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(v: str) -> float:
    x = float(v)
    if not x > 0.0:
        raise argparse.ArgumentTypeError(f"{v} is not positive")
    return x


def _read_log(path):
    try:
        return parse_log(path)
    except (EmptyLog, FormatError) as exc:
        raise _Fail(EXIT_USAGE, f"{path}: {exc}") from None
    except OSError as exc:
        raise _Fail(EXIT_IO, str(exc)) from None


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def cmd_simulate(args) -> int:
    try:
        spec = load_scenario(args.scenario)
    except OSError as exc:
        raise _Fail(EXIT_IO, str(exc)) from None
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    ml = simulate_run(spec)
    try:
        write_log(ml, args.out)
    except OSError as exc:
        raise _Fail(EXIT_IO, str(exc)) from None
    print(f"wrote {args.out}: {len(ml.pose)} pose, {len(ml.wind)} wind, "
          f"{len(ml.current)} current, {len(ml.depth)} depth samples")
    return EXIT_OK


def cmd_inspect(args) -> int:
    ml = _read_log(args.log)
    if args.out:
        try:
            export_kml(ml, args.out)
        except OSError as exc:
            raise _Fail(EXIT_IO, str(exc)) from None
    gaps = max_gaps(ml)
    code = EXIT_OK
    for name, samples in ml.streams().items():
        gap = gaps.get(name)
        line = f"{name}: {len(samples)} samples"
        if gap is not None:
            line += f", max gap {gap:.3f} s"
            if args.max_gap is not None and gap > args.max_gap:
                line += f"  GAP > {args.max_gap:g} s"
                code = EXIT_GAP
        print(line)
    if ml.skipped or ml.duplicates:
        print(f"skipped {ml.skipped} unparseable records, {ml.duplicates} duplicate timestamps")
    return code


def cmd_sync(args) -> int:
    ml = _read_log(args.log)
    tuples = align(ml, args.slop)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "wind_t", "current_t", "depth_t", "spread"])
            for tp in tuples:
                w.writerow([repr(v) for v in (tp.t, tp.wind.t, tp.current.t, tp.depth.t, tp.spread)])
    except OSError as exc:
        raise _Fail(EXIT_IO, str(exc)) from None
    print(f"{len(tuples)} aligned tuples from {len(ml.pose)} poses")
    return EXIT_OK


def cmd_fuse(args) -> int:
    ml = _read_log(args.log)
    samples = fuse(align(ml, args.slop), ml.origin)
    try:
        write_fused_csv(samples, ml.origin, args.out)
    except OSError as exc:
        raise _Fail(EXIT_IO, str(exc)) from None
    print(f"{len(samples)} fused samples")
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        origin, samples = read_fused_csv(args.fused)
    except OSError as exc:
        raise _Fail(EXIT_IO, str(exc)) from None
    except (KeyError, ValueError) as exc:
        raise _Fail(EXIT_USAGE, f"{args.fused}: bad fused file ({exc})") from None
    if not samples:
        raise _Fail(EXIT_USAGE, f"{args.fused}: no samples")
    model = fit_force_field(samples, args.kernel, args.budget, args.seed)
    save_models(model, origin, args.out)
    print(f"fitted {args.kernel} models on {len(samples)} samples into {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        model, origin = load_models(args.models)
    except OSError as exc:
        raise _Fail(EXIT_IO, str(exc)) from None
    grid = build_grid_from_points(origin, training_points(model), args.res, args.margin)
    layers = render(model, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_csv(grid, layers, out / "map.csv", args.met_convention)
    export_geojson(grid, layers, out / "map.geojson", args.met_convention)
    print(f"{grid.nx}x{grid.ny} grid written to {out}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    overrides = {
        "slop": args.slop, "kernel": args.kernel, "budget": args.budget, "seed": args.seed,
        "resolution": args.res, "margin": args.margin,
        "out_dir": Path(args.out) if args.out else None,
        "met_convention": True if args.met_convention else None,
    }
    try:
        cfg = load_pipeline(args.config, overrides)
    except OSError as exc:
        raise _Fail(EXIT_IO, str(exc)) from None
    try:
        result = run_pipeline(cfg)
    except StageError as exc:
        raise _Fail(exc.code, f"pipeline[{exc.stage}]: {exc}") from None
    for name, path in sorted(result.artifacts.items()):
        print(f"{name}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forcefield",
                                description="ASV wind/current/depth force-field mapping pipeline")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic mission log from a scenario file")
    s.add_argument("scenario")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("inspect", help="export the track as KML and report timestamp gaps")
    s.add_argument("log")
    s.add_argument("--out", help="KML output path")
    s.add_argument("--max-gap", type=_positive, help="fail (exit 1) if any stream gap exceeds this")
    s.set_defaults(func=cmd_inspect)

    for name, func, helptext in (("sync", cmd_sync, "write aligned tuple timestamps"),
                                 ("fuse", cmd_fuse, "write motion-corrected fused samples")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("log")
        s.add_argument("--out", required=True)
        s.add_argument("--slop", type=_positive, default=DEFAULT_SLOP)
        s.set_defaults(func=func)

    s = sub.add_parser("fit", help="fit depth/wind/current GPs to a fused CSV")
    s.add_argument("fused")
    s.add_argument("--out", required=True, help="model directory")
    s.add_argument("--kernel", type=_kernel, default="matern32", help=f"one of {', '.join(KINDS)}")
    s.add_argument("--budget", type=int, default=150)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", help="render map layers from a model directory")
    s.add_argument("models")
    s.add_argument("--out", required=True)
    s.add_argument("--res", type=_positive, default=2.0)
    s.add_argument("--margin", type=float, default=0.0)
    s.add_argument("--met-convention", action="store_true",
                   help="export directions as coming-from bearings")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("pipeline", help="run every stage from a pipeline config")
    s.add_argument("config")
    s.add_argument("--out")
    s.add_argument("--slop", type=_positive)
    s.add_argument("--kernel", type=_kernel)
    s.add_argument("--budget", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--res", type=_positive)
    s.add_argument("--margin", type=float)
    s.add_argument("--met-convention", action="store_true")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("FORCEFIELD_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"forcefield {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"forcefield {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotPositiveDefinite as exc:
        print(f"forcefield {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"forcefield {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
