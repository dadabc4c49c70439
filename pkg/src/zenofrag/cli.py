"""Command-line entry point.

Subcommands:

* ``run CONFIG [--out DIR] [--seed N] [--threads K]`` — execute the
  experiment in CONFIG (a config file or a previously written manifest).
  Configs with a measurement tau list run as a sweep.
* ``scan CONFIG --tau LIST [--out DIR] [--seed N] [--threads K]`` — tau sweep
  with the given comma- or space-separated tau values (fs).
* ``validate CONFIG`` — parse and echo the resolved configuration.
* ``presets [--show NAME]`` — list or dump the built-in presets.

Exit codes: 0 success, 1 runtime failure, 2 configuration error,
3 completed with analysis warnings.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import PRESET_NOTES, PRESETS, ConfigError, load_config
from .runner import run_experiment, sweep_tau
from .units import FS_TO_AU


def _parse_tau_values(raw: list[str]) -> list[float]:
    values = []
    for chunk in raw:
        for piece in chunk.split(","):
            piece = piece.strip()
            if not piece:
                continue
            tau = float(piece)
            if tau <= 0:
                raise ValueError(f"tau must be positive, got {piece}")
            values.append(tau)
    if not values:
        raise ValueError("no tau values given")
    return values


def _apply_flags(config, args):
    if getattr(args, "out", None):
        config = config.with_overrides(out_dir=args.out)
    if getattr(args, "seed", None) is not None:
        config = config.with_overrides(seed=args.seed)
    return config


def _cmd_run(args) -> int:
    config = _apply_flags(load_config(args.config), args)
    if config.tau_list:
        result = sweep_tau(config, threads=args.threads)
        print(f"sweep: {len(result.rows)} rows -> {result.rates_path}")
        if result.gamma_free_cm1 is not None:
            print(f"free gamma: {result.gamma_free_cm1:.6g} cm^-1")
        return 3 if result.warnings else 0
    bundle = run_experiment(config)
    if bundle.fit is not None:
        print(f"gamma = {bundle.fit.gamma_cm1:.6g} cm^-1, "
              f"lifetime = {bundle.fit.lifetime_ps:.6g} ps, "
              f"fit rmse = {bundle.fit.rmse:.3g}")
    print(f"outputs in {bundle.out_dir}")
    for note in bundle.warnings:
        print(f"warning: {note}", file=sys.stderr)
    return 3 if bundle.warnings else 0


def _cmd_scan(args) -> int:
    config = _apply_flags(load_config(args.config), args)
    taus_au = [t * FS_TO_AU for t in _parse_tau_values(args.tau)]
    result = sweep_tau(config, tau_list=taus_au, threads=args.threads)
    print(f"sweep: {len(result.rows)} rows -> {result.rates_path}")
    if result.gamma_free_cm1 is not None:
        print(f"free gamma: {result.gamma_free_cm1:.6g} cm^-1")
    for note in result.warnings:
        print(f"warning: {note}", file=sys.stderr)
    return 3 if result.warnings else 0


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    print("OK")
    print(json.dumps(config.resolved, indent=2, sort_keys=True))
    return 0


def _cmd_presets(args) -> int:
    if args.show:
        if args.show not in PRESETS:
            print(f"unknown preset {args.show!r}", file=sys.stderr)
            return 2
        print(json.dumps(PRESETS[args.show], indent=2, sort_keys=True))
        return 0
    for name in sorted(PRESETS):
        print(f"{name}: {PRESET_NOTES.get(name, '')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zenofrag",
        description="Measurement-controlled fragmentation dynamics runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one experiment (or a configured sweep)")
    run.add_argument("config")
    run.add_argument("--out", help="output directory override")
    run.add_argument("--seed", type=int, help="measurement seed override")
    run.add_argument("--threads", type=int, default=1,
                     help="parallel workers for sweeps")
    run.set_defaults(func=_cmd_run)

    scan = sub.add_parser("scan", help="sweep measurement intervals")
    scan.add_argument("config")
    scan.add_argument("--tau", nargs="+", required=True,
                      help="tau values in fs (comma- or space-separated)")
    scan.add_argument("--out", help="output directory override")
    scan.add_argument("--seed", type=int, help="measurement seed override")
    scan.add_argument("--threads", type=int, default=1)
    scan.set_defaults(func=_cmd_scan)

    validate = sub.add_parser("validate", help="check a config and echo the resolution")
    validate.add_argument("config")
    validate.set_defaults(func=_cmd_validate)

    presets = sub.add_parser("presets", help="list built-in presets")
    presets.add_argument("--show", help="dump one preset as JSON")
    presets.set_defaults(func=_cmd_presets)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
