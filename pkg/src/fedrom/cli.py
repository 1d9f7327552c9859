"""Command line entry point: ``fedrom run|validate CONFIG``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config, validate_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="fedrom", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("config")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("--threads", type=int, help="parallel client updates per round")
    run.add_argument("--regen", action="store_true", help="regenerate cached datasets")
    run.add_argument("-v", "--verbose", action="store_true")
    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("config")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "validate":
        try:
            errors, warnings = validate_config(args.config)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        if errors:
            return EXIT_CONFIG
        print(f"{args.config}: ok")
        return EXIT_OK

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.output = args.out
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError(["run.threads: must be >= 1"])
            cfg.run.threads = args.threads
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .experiments import run_experiment

    try:
        manifest = run_experiment(cfg, regen=args.regen)
    except Exception as exc:
        logging.getLogger("fedrom").exception("run failed")
        print(f"error: {cfg.experiment} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(manifest['files'])} files to {cfg.output}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
