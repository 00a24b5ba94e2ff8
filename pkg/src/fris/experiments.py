"""Desk-scale experiment drivers behind the ``fris`` command line.

Every driver writes CSV tables (header row, UTF-8) plus ``manifest.json``
with the config digest into its output directory.  Apart from the
``wall_time`` columns, outputs are byte-identical across runs for the same
config and seeds.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .channel import assemble, sample_realization
from .config import ScenarioConfig
from .pattern_rcg import PatternBank
from .power_analysis import (line_grid, optimal_reflection_phase, pattern_upper_bound,
                             position_bound_feasibility, random_link, received_power)
from .solver import SCHEMES, SolveResult, alternating_optimize, passive_beamforming_baseline
from .sph_harmonics import fit_pattern, gpp38901_pattern, quadrature_grid, write_pattern_csv

log = logging.getLogger(__name__)

AXES = {"M": "M", "Nt": "N_t", "N_t": "N_t", "I": "I"}


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_manifest(out: Path, command: str, config: ScenarioConfig, files, **extra) -> Path:
    data = {
        "command": command,
        "version": __version__,
        "config_sha256": config.digest(),
        "config": config.to_dict(),
        "files": sorted(Path(f).name for f in files),
        **extra,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=list) + "\n", encoding="utf-8")
    return path


def scheme_config(config: ScenarioConfig, scheme: str) -> ScenarioConfig:
    """Per-scheme overrides: the passive baselines may use their own ``N_t``."""
    if scheme.startswith("ris_") and config.baseline_Nt is not None:
        return config.replace(N_t=config.baseline_Nt)
    return config


def solve_scheme(config: ScenarioConfig, seed: int, scheme: str) -> SolveResult:
    """One scheme on the scenario drawn from ``seed``."""
    cfg = scheme_config(config, scheme)
    realization = sample_realization(cfg, seed)
    if scheme in ("fris_mmse", "fris_zf"):
        assembled = assemble(realization, cfg.I, cfg.noise)
        return alternating_optimize(assembled, cfg, seed=seed, beam_rule=scheme[5:])
    if scheme == "ris_38901":
        return passive_beamforming_baseline(realization, "gpp38901", cfg)
    if scheme == "ris_isotropic":
        return passive_beamforming_baseline(realization, "isotropic", cfg)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


@dataclass
class CellOutcome:
    """Result of one (config, seed, scheme) cell; ``error`` is set on failure."""
    seed: int
    scheme: str
    M: int
    N_t: int
    I: int  # noqa: E741
    K: int
    rate: float = float("nan")
    iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    trace: tuple = ()
    bank: np.ndarray | None = None
    error: str = ""

    @property
    def status(self) -> str:
        return "error" if self.error else "ok"


def run_cell(config: ScenarioConfig, seed: int, scheme: str) -> CellOutcome:
    cfg = scheme_config(config, scheme)
    out = CellOutcome(seed, scheme, cfg.M, cfg.N_t, cfg.I, cfg.K)
    t0 = time.perf_counter()
    try:
        res = solve_scheme(config, seed, scheme)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        out.error = f"{type(exc).__name__}: {exc}"
        log.warning("seed %d scheme %s failed: %s", seed, scheme, out.error)
    else:
        out.rate, out.iterations, out.converged = res.rate, res.iterations, res.converged
        out.trace = tuple(res.rate_trace)
        out.bank = None if res.bank is None else res.bank.omega
    out.wall_time = time.perf_counter() - t0
    return out


def _run_cell_args(args):
    return run_cell(*args)


def run_cells(jobs, threads: int = 1) -> list[CellOutcome]:
    """Evaluate ``(config, seed, scheme)`` jobs, in order, optionally in a process pool."""
    jobs = list(jobs)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_run_cell_args, jobs, chunksize=1))
    return [run_cell(*job) for job in jobs]


def _result_row(c: CellOutcome):
    return [c.seed, c.scheme, c.M, c.N_t, c.I, c.K, _fmt(c.rate), c.iterations,
            int(c.converged), c.status, c.error, f"{c.wall_time:.3f}"]


RESULT_HEADER = ["seed", "scheme", "M", "N_t", "I", "K", "rate", "iterations", "converged",
                 "status", "error", "wall_time"]


def bank_to_json(omega: np.ndarray) -> dict:
    return {"M": int(omega.shape[0]), "I": int(omega.shape[1]),
            "re": np.real(omega).tolist(), "im": np.imag(omega).tolist()}


def bank_from_json(data: dict) -> PatternBank:
    return PatternBank(np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float))


def run_solve(config: ScenarioConfig, out, schemes=SCHEMES, seeds=None, threads: int = 1) -> list[Path]:
    """All schemes on every seed: ``results.csv``, ``traces.csv`` and ``banks.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = config.seeds() if seeds is None else list(seeds)
    cells = run_cells([(config, s, sch) for s in seeds for sch in schemes], threads)
    files = [_write_csv(out / "results.csv", RESULT_HEADER, [_result_row(c) for c in cells])]
    trace_rows = [[c.seed, c.scheme, t, _fmt(r)] for c in cells for t, r in enumerate(c.trace)]
    files.append(_write_csv(out / "traces.csv", ["seed", "scheme", "iteration", "rate"], trace_rows))
    banks = {f"{c.seed}:{c.scheme}": bank_to_json(c.bank) for c in cells if c.bank is not None}
    path = out / "banks.json"
    path.write_text(json.dumps(banks, sort_keys=True) + "\n", encoding="utf-8")
    files.append(path)
    files.append(write_manifest(out, "solve", config, files, seeds=seeds, schemes=list(schemes)))
    return files


def run_sweep(config: ScenarioConfig, axis: str, out, schemes=SCHEMES, seeds=None,
              threads: int = 1) -> list[Path]:
    """Every scheme at every grid value and seed; failures are recorded, not fatal."""
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected M, Nt or I")
    field = AXES[axis]
    values = {"M": config.sweep_M, "N_t": config.sweep_Nt, "I": config.sweep_I}[field]
    if not values:
        raise ValueError(f"sweep grid for {axis} is empty")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = config.seeds() if seeds is None else list(seeds)
    jobs, keys = [], []
    for v in values:
        cfg = config.replace(**{field: int(v)})
        for sch in schemes:
            for s in seeds:
                jobs.append((cfg, s, sch))
                keys.append(v)
    cells = run_cells(jobs, threads)
    rows = [[axis, v] + _result_row(c) for v, c in zip(keys, cells)]
    files = [_write_csv(out / f"sweep_{axis}.csv", ["axis", "value"] + RESULT_HEADER, rows)]
    summary = []
    for v in values:
        for sch in schemes:
            sel = [c for k, c in zip(keys, cells) if k == v and c.scheme == sch]
            ok = [c.rate for c in sel if not c.error]
            med = float(np.median(ok)) if ok else float("nan")
            summary.append([axis, v, sch, len(sel), len(ok), _fmt(med),
                            sum(c.converged for c in sel)])
    files.append(_write_csv(out / f"summary_{axis}.csv",
                            ["axis", "value", "scheme", "n_seeds", "n_ok", "median_rate",
                             "n_converged"], summary))
    files.append(write_manifest(out, "sweep", config, files, axis=axis, seeds=seeds,
                                schemes=list(schemes)))
    return files


def run_fit_pattern(config: ScenarioConfig, out, n_theta: int = 91, n_phi: int = 181) -> list[Path]:
    """Fit the 38.901 element pattern for every ``I`` in ``config.fit_I``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    terms = sorted(set(int(i) for i in config.fit_I))
    if not terms:
        raise ValueError("fit_I is empty")
    grid = quadrature_grid(64, 128)
    target = gpp38901_pattern(grid.theta, grid.phi)
    rows, files = [], []
    for n in terms:
        coeffs, nmse = fit_pattern(target, n, grid)
        rows.append([n, _fmt(nmse)])
        path = out / f"pattern_I{n}.csv"
        write_pattern_csv(path, coeffs.coeffs, n_theta, n_phi)
        files.append(path)
    files.insert(0, _write_csv(out / "fit_nmse.csv", ["I", "nmse"], rows))
    files.append(_write_target_csv(out / "pattern_target.csv", n_theta, n_phi))
    files.append(write_manifest(out, "fit-pattern", config, files))
    return files


def _write_target_csv(path: Path, n_theta: int, n_phi: int) -> Path:
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.linspace(-np.pi, np.pi, n_phi)
    gain = gpp38901_pattern(theta[:, None], phi[None, :])
    rows = [[_fmt(np.degrees(t)), _fmt(np.degrees(p)), _fmt(gain[a, b])]
            for a, t in enumerate(theta) for b, p in enumerate(phi)]
    return _write_csv(path, ["theta_deg", "phi_deg", "abs"], rows)


def run_power_analysis(config: ScenarioConfig, out) -> list[Path]:
    """Passive, position-grid and pattern powers on random point-to-point links."""
    if config.power_instances < 1:
        raise ValueError("power_instances must be at least 1")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    grid = line_grid(config.position_grid_points, config.position_grid_step)
    rows, ratios = [], []
    for i in range(config.power_instances):
        seed = config.base_seed + i
        link = random_link(np.random.default_rng(seed), config.power_M, config.power_L,
                           config.power_Z)
        random_phase = received_power(link)
        passive = optimal_reflection_phase(link).power
        position = position_bound_feasibility(link, grid)
        pattern = pattern_upper_bound(link).power
        rows.append([seed, _fmt(random_phase), _fmt(passive), _fmt(position.best_grid_power),
                     _fmt(position.bound), _fmt(pattern)])
        ratios.append((passive / pattern, position.best_grid_power / pattern))
    files = [_write_csv(out / "power_analysis.csv",
                        ["seed", "random_phase", "passive", "position_grid_best",
                         "position_bound", "pattern_bound"], rows)]
    r = np.asarray(ratios)
    files.append(_write_csv(out / "power_summary.csv", ["quantity", "mean_ratio_to_pattern_bound"],
                            [["passive", _fmt(r[:, 0].mean())],
                             ["position_grid_best", _fmt(r[:, 1].mean())]]))
    files.append(write_manifest(out, "power-analysis", config, files))
    return files


def run_export_pattern(config: ScenarioConfig, out, result=None, element=None, seed=None,
                       n_theta: int = 91, n_phi: int = 181) -> list[Path]:
    """Write the gain grid of one element (or all) of a solved FRIS bank.

    ``result`` points at a ``banks.json`` written by :func:`run_solve`; when it
    is omitted the FRIS+MMSE problem for ``seed`` (default: first seed) is
    solved first.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.base_seed if seed is None else int(seed)
    if result is not None:
        banks = json.loads(Path(result).read_text(encoding="utf-8"))
        key = f"{seed}:fris_mmse"
        if key not in banks:
            raise ValueError(f"{result} has no FRIS+MMSE bank for seed {seed}")
        bank = bank_from_json(banks[key])
    else:
        res = solve_scheme(config, seed, "fris_mmse")
        bank = res.bank
    elements = range(bank.M) if element is None else [int(element)]
    files = []
    for m in elements:
        if not 0 <= m < bank.M:
            raise ValueError(f"element id {m} outside 0..{bank.M - 1}")
        path = out / f"element_{m}.csv"
        write_pattern_csv(path, bank.omega[m], n_theta, n_phi)
        files.append(path)
    files.append(write_manifest(out, "export-pattern", config, files, seed=seed))
    return files
