"""Outer-iteration rate traces of FRIS+MMSE on seeded scenarios.

Writes one row per (seed, iteration).  ``--max-outer`` and ``--beam-rounds``
override the config so the slow tail of the alternation can be inspected.

    python scripts/convergence_traces.py --seeds 5 --max-outer 500 --out traces.csv
"""
from __future__ import annotations

import argparse
import csv
from pathlib import Path

from fris.config import ScenarioConfig
from fris.experiments import solve_scheme


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--beam-rounds", type=int)
    p.add_argument("--out", type=Path, default=Path("convergence_traces.csv"))
    args = p.parse_args(argv)
    config = ScenarioConfig() if args.config is None else ScenarioConfig.load(args.config)
    changes = {"n_seeds": args.seeds}
    if args.max_outer is not None:
        changes["max_outer"] = args.max_outer
    if args.beam_rounds is not None:
        changes["beam_rounds"] = args.beam_rounds
    config = config.replace(**changes)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "iteration", "rate", "converged"])
        for seed in config.seeds():
            res = solve_scheme(config, seed, "fris_mmse")
            for it, rate in enumerate(res.rate_trace):
                w.writerow([seed, it, f"{rate:.12g}", int(res.converged)])
            print(f"seed {seed}: {res.iterations} iterations, rate {res.rate:.4f}, "
                  f"converged={res.converged}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
