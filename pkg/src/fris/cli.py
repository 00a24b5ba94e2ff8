"""``fris`` command line: fit-pattern, power-analysis, sweep, solve, export-pattern."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .config import ScenarioConfig

COMMANDS = ("fit-pattern", "power-analysis", "sweep", "solve", "export-pattern")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fris", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="scenario config (.json or .toml); defaults if omitted")
    p.add_argument("--axis", choices=("M", "Nt", "I"), help="sweep axis (sweep only)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seeds", type=int, help="number of seeds (overrides config n_seeds)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for solve/sweep")
    p.add_argument("--result", type=Path, help="banks.json from a previous solve (export-pattern)")
    p.add_argument("--element", type=int, help="element id to export (default: all)")
    p.add_argument("--seed", type=int, help="scenario seed to export (default: base_seed)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> ScenarioConfig:
    config = ScenarioConfig() if args.config is None else ScenarioConfig.load(args.config)
    if args.seeds is not None:
        if args.seeds < 1:
            raise ValueError("--seeds must be at least 1")
        config = config.replace(n_seeds=args.seeds)
    return config


def run(args) -> list[Path]:
    config = load_config(args)
    if args.threads < 1:
        raise ValueError("--threads must be at least 1")
    if args.command == "fit-pattern":
        return ex.run_fit_pattern(config, args.out)
    if args.command == "power-analysis":
        return ex.run_power_analysis(config, args.out)
    if args.command == "sweep":
        if args.axis is None:
            raise ValueError("sweep needs --axis M|Nt|I")
        return ex.run_sweep(config, args.axis, args.out, threads=args.threads)
    if args.command == "solve":
        return ex.run_solve(config, args.out, threads=args.threads)
    return ex.run_export_pattern(config, args.out, result=args.result, element=args.element,
                                 seed=args.seed)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        files = run(args)
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"fris {args.command}: error: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
