"""Command-line entry point.

Subcommands: run, depth-study, fmap-study, plots.  Configuration is
resolved in layers: dataclass defaults, then a JSON config file
(--config), then HQCNET_* environment variables, then explicit flags.
Exit codes: 0 success, 1 I/O or usage failure, 2 training divergence
(or any failed run inside a study).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .circuits import FEATURE_MAP_NAMES
from .experiments import (
    ExperimentConfig,
    config_from_mapping,
    emit_plot_data,
    run_depth_study,
    run_feature_map_study,
    run_single,
)
from .training import DivergenceError

ENV_PREFIX = "HQCNET_"

_CONFIG_KEYS = tuple(ExperimentConfig.__dataclass_fields__)


def _env_overrides(environ) -> dict:
    found = {}
    for key in _CONFIG_KEYS:
        value = environ.get(ENV_PREFIX + key.upper())
        if value is not None:
            found[key] = value
    return found


def resolve_config(config_path, environ, overrides) -> ExperimentConfig:
    """Merge defaults < config file < environment < explicit flags."""
    mapping: dict = {}
    if config_path:
        loaded = json.loads(Path(config_path).read_text())
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        mapping.update(loaded)
    mapping.update(_env_overrides(environ))
    mapping.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_mapping(mapping)


def _parse_args(argv):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="override the run seed")
    common.add_argument("--out", help="override the output directory")
    common.add_argument(
        "--workers", type=int, default=1, help="parallel runs inside a study"
    )

    parser = argparse.ArgumentParser(
        prog="hqcnet", description="hybrid quantum-classical experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="train one configuration")
    depth = sub.add_parser("depth-study", parents=[common], help="sweep ansatz depths")
    depth.add_argument("--depths", default="1,2,3", help="comma-separated depths")
    fmap = sub.add_parser("fmap-study", parents=[common], help="sweep feature maps")
    fmap.add_argument(
        "--maps", default="all", help="comma-separated names, or 'all'"
    )
    sub.add_parser(
        "plots", parents=[common], help="emit plot CSVs for a finished run (--out)"
    )
    return parser.parse_args(argv)


def _report_failures(failures) -> None:
    for line in failures:
        print(f"run failed: {line}", file=sys.stderr)


def main(argv=None) -> int:
    args = _parse_args(argv)

    if args.command == "plots":
        if not args.out:
            print("plots needs --out pointing at a run directory", file=sys.stderr)
            return 1
        try:
            for path in emit_plot_data(args.out):
                print(path)
        except (FileNotFoundError, OSError) as err:
            print(err, file=sys.stderr)
            return 1
        return 0

    try:
        config = resolve_config(
            args.config, os.environ, {"seed": args.seed, "out_dir": args.out}
        )
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"bad configuration: {err}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            print(run_single(config))
            return 0
        if args.command == "depth-study":
            depths = [int(d) for d in args.depths.split(",") if d.strip()]
            _, failures = run_depth_study(config, depths, workers=args.workers)
        else:
            names = (
                list(FEATURE_MAP_NAMES)
                if args.maps == "all"
                else [m.strip() for m in args.maps.split(",") if m.strip()]
            )
            _, failures = run_feature_map_study(config, names, workers=args.workers)
    except DivergenceError as err:
        print(f"training diverged: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(err, file=sys.stderr)
        return 1
    except OSError as err:
        print(err, file=sys.stderr)
        return 1

    print(config.out_dir)
    if failures:
        _report_failures(failures)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
