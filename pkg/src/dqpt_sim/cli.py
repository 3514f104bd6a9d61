"""Command-line entry point: ``dqpt-sim <scenario|config-path> [options]``."""

import argparse
import logging
import sys
from pathlib import Path

from .config import SCENARIO_ALIASES, ConfigError, alias_config, load_config
from .scenarios import run_scenario

log = logging.getLogger("dqpt_sim")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dqpt-sim",
        description="Dynamical quantum phase transitions of 13C spins around an NV centre.",
    )
    p.add_argument("target", help=f"scenario alias ({', '.join(sorted(SCENARIO_ALIASES))}) or a JSON config path")
    p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    p.add_argument("--threads", type=int, default=None, help="worker processes for sweeps (default: all CPUs)")
    p.add_argument("--svg", action="store_true", help="also write SVG figures")
    p.add_argument("--seedless", action="store_true",
                   help="accepted for compatibility; every run is deterministic and uses no random numbers")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.target in SCENARIO_ALIASES and not Path(args.target).is_file():
            cfg = alias_config(args.target)
        else:
            cfg = load_config(args.target)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"dqpt-sim: configuration error: {exc}", file=sys.stderr)
        return 2
    if args.threads is not None and args.threads < 1:
        print("dqpt-sim: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        manifest = run_scenario(cfg, out_dir=args.out, threads=args.threads, svg=True if args.svg else None)
    except Exception as exc:  # any failure means outputs are incomplete
        print(f"dqpt-sim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for name in manifest.outputs:
        log.info("wrote %s", name)
    checks = manifest.summary.get("checks", {})
    for key, ok in checks.items():
        log.info("%-45s %s", key, "PASS" if ok else "FAIL")
    return 0


if __name__ == "__main__":
    sys.exit(main())
