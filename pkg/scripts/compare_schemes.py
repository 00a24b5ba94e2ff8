"""Median weighted sum rate of the four schemes on one scenario.

    python scripts/compare_schemes.py --seeds 20 [--config c.toml] [--threads 4]
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from fris.config import ScenarioConfig
from fris.experiments import run_cells
from fris.solver import SCHEMES


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args(argv)
    config = ScenarioConfig() if args.config is None else ScenarioConfig.load(args.config)
    config = config.replace(n_seeds=args.seeds)
    jobs = [(config, s, scheme) for scheme in SCHEMES for s in config.seeds()]
    cells = run_cells(jobs, args.threads)
    rates = {s: np.array([c.rate for c in cells if c.scheme == s and c.status == "ok"])
             for s in SCHEMES}
    iso = rates["ris_isotropic"]
    print(f"M={config.M} N_t={config.N_t} K={config.K} I={config.I}, {args.seeds} seeds")
    for s in SCHEMES:
        r = rates[s]
        line = f"{s:14s} median {np.median(r):8.4f}  ok {r.size}/{args.seeds}"
        if s != "ris_isotropic" and r.size == iso.size and r.size:
            line += f"  median gain over isotropic {100 * np.median(r / iso - 1):6.1f}%"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
