"""Command line entry point: ``simulate <config-file> [options]``."""
from __future__ import annotations

import argparse
import sys
import warnings

from .config import MODES, parse_config
from .errors import ConfigError, DomainError, IntegrationError, TruncationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_TRUNCATION = 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Run a collision-model scenario and write CSV series, "
                    "a bound report and a run manifest.")
    p.add_argument("config", help="config file with 'key = value' lines ('-' for stdin)")
    p.add_argument("--preset", help="named parameter set applied under the file's keys")
    p.add_argument("--mode", choices=MODES, help="override the configured mode")
    p.add_argument("--out", help="output directory (default: output.dir or ./runs)")
    p.add_argument("--workers", type=int, help="parallel workers for sweeps")
    return p


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def main(argv=None) -> int:
    from .runner import run_scenario, run_sweep

    args = build_parser().parse_args(argv)
    try:
        text = _read(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.workers is not None:
        overrides["run.workers"] = args.workers
    try:
        config = parse_config(text, preset=args.preset, overrides=overrides)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if config.sweep_param is not None:
                res = run_sweep(config, args.out)
                where = res.run_dir
            else:
                res = run_scenario(config, args.out)
                where = res.run_dir
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TruncationError as exc:
        print(f"truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except (IntegrationError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(where)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
