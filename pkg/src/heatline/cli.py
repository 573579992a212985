"""Command line entry point: ``heatline run | validate | sweep``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import ConfigurationError, NumericalError, ValidationError
from .scenario import emit, fmt, parse_scenario, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
SEED_ENV = "HEATLINE_SEED"

log = logging.getLogger("heatline")


def _json_scalar(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_set(items: Sequence[str]) -> dict[str, Any]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"--set expects path=value, got {item!r}")
        out[key] = _json_scalar(value)
    return out


def overrides_from_args(args: argparse.Namespace, environ=os.environ) -> dict[str, Any]:
    """Field overrides in precedence order: explicit flags > environment > file."""
    overrides = _parse_set(args.set or [])
    if getattr(args, "shots", None) is not None:
        overrides["shots"] = args.shots
    if args.seed is not None:
        overrides["seed"] = args.seed
    elif environ.get(SEED_ENV):
        try:
            overrides["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigurationError(f"{SEED_ENV} must be an integer, got {environ[SEED_ENV]!r}") from None
    return overrides


def _cmd_validate(args) -> int:
    config = parse_scenario(args.scenario, overrides_from_args(args))
    msg = f"{args.scenario}: ok (mode={config.mode}, outputs={','.join(config.outputs)})"
    if config.adiabaticity_ratio is not None:
        msg += f", adiabaticity ratio {config.adiabaticity_ratio:.3g}"
    print(msg)
    return EXIT_OK


def _cmd_run(args) -> int:
    config = parse_scenario(args.scenario, overrides_from_args(args))
    bundle = run_scenario(config)
    for path in emit(bundle, args.out):
        print(path)
    return EXIT_OK


SWEEP_HEADER = ["index", "value", "average_heat", "beta_q", "entropy_decrease", "slack",
                "m1", "m2", "m3", "m4", "out_dir"]


def _cmd_sweep(args) -> int:
    values = [_json_scalar(v.strip()) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigurationError("--values is empty")
    base = overrides_from_args(args)
    configs = [parse_scenario(args.scenario, {**base, args.param: v}) for v in values]
    out = Path(args.out)
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        bundles = list(pool.map(run_scenario, configs))
    rows = []
    for i, (value, bundle) in enumerate(zip(values, bundles)):
        point_dir = out / f"point_{i:03d}"
        emit(bundle, point_dir)
        lr = bundle.landauer
        m = bundle.moments["oracle"]
        rows.append([i, value, fmt(bundle.extras["average_heat"]), fmt(lr.beta_q),
                     fmt(lr.entropy_decrease), fmt(lr.slack), *map(fmt, m), point_dir.name])
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        writer.writerows(rows)
    print(out / "sweep.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatline", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"heatline {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, shots=True):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--set", action="append", metavar="PATH=VALUE",
                       help="override a scenario field, e.g. reservoir.beta=0.5 (repeatable)")
        p.add_argument("--seed", type=int, help=f"override the seed (takes precedence over ${SEED_ENV})")
        if shots:
            p.add_argument("--shots", type=int, help="override shots per readout phase")

    p = sub.add_parser("run", help="run a scenario and write its tables")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a scenario without running it")
    common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sweep", help="run a scenario over a list of values for one field")
    common(p)
    p.add_argument("--param", required=True, help="dotted field path, e.g. reservoir.beta")
    p.add_argument("--values", required=True, help="comma-separated values (parsed as JSON)")
    p.add_argument("--out", required=True, help="output directory (one subdirectory per point)")
    p.add_argument("--workers", type=int, default=None, help="concurrent sweep points")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ValidationError) as exc:
        print(f"heatline: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"heatline: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"heatline: I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
