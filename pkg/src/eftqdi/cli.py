"""Command-line entry point.

Exit codes: 0 success, 1 a modelling assumption failed validation,
2 the config could not be read or an output could not be written.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from pydantic import ValidationError

from .config import load_config
from .errors import ConfigInvalid
from .harness import format_value, run_experiment, validate, write_outputs
from .presets import CASES, HORIZON, REPS, example_config

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _window(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO:HI, e.g. 1000:100000") from None
    return lo, hi


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eftqdi", description="Distributed estimation with one-bit data and switching topologies.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo experiment from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=_seed, help="overrides the config's master seed")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--reps", type=int)
    run.add_argument("--horizon", type=int)
    run.add_argument("--baseline", action="store_true", default=None, help="also run the non-cooperative baseline")
    run.add_argument("--rate-window", type=_window, metavar="LO:HI")

    val = sub.add_parser("validate", help="check the modelling assumptions and print the constants report")
    val.add_argument("--config", required=True)

    ex = sub.add_parser("example-sec6", help="run a built-in six-sensor example case")
    ex.add_argument("--case", type=int, choices=sorted(CASES), required=True)
    ex.add_argument("--out", required=True)
    ex.add_argument("--seed", type=_seed, default=0)
    ex.add_argument("--reps", type=int, default=REPS)
    ex.add_argument("--horizon", type=int, default=HORIZON)
    return p


def _print_report(report) -> None:
    for k, v in report.lines():
        print(f"{k} = {format_value(v)}")


def _execute(cfg, out_dir) -> int:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", RuntimeWarning)
            res = run_experiment(cfg)
    except ConfigInvalid as e:
        for f in e.failed:
            print(f"error: {f}", file=sys.stderr)
        return EXIT_INVALID
    try:
        paths = write_outputs(res, out_dir)
    except OSError as e:
        print(f"error: cannot write outputs: {e}", file=sys.stderr)
        return EXIT_IO
    for name, fit in res.fits.items():
        print(f"{name}: slope {fit.slope:.4f} (r^2 {fit.r_squared:.4f}) on {fit.window[0]}..{fit.window[1]}")
    print(f"wrote {paths['csv']}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "example-sec6":
            cfg = example_config(args.case, horizon=args.horizon, reps=args.reps, seed=args.seed)
        else:
            cfg = load_config(args.config)
            if args.command == "run":
                over = {"seed": args.seed, "reps": args.reps, "horizon": args.horizon, "baseline": args.baseline}
                if args.rate_window is not None:
                    over["rate_window"] = args.rate_window
                cfg = cfg.with_overrides(**over)
    except (OSError, json.JSONDecodeError, ValidationError, ValueError) as e:
        print(f"error: cannot load config: {e}", file=sys.stderr)
        return EXIT_IO

    if args.command == "validate":
        report = validate(cfg)
        _print_report(report)
        for f in report.failures:
            print(f"error: {f}", file=sys.stderr)
        return EXIT_OK if report.ok else EXIT_INVALID

    return _execute(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
