"""Acceptance criteria 1-10, each at its stated tolerance and time budget.

Every criterion prints exactly one ``PASS``/``FAIL`` line (shown even without
``-s``).  Run standalone with ``python tests/test_acceptance.py`` for the
summary alone.
"""
from __future__ import annotations

import functools
import math
import sys
import time

import numpy as np
import pytest

from fris import beamforming as bf
from fris.channel import assemble, direct_channels, effective_channels, sample_realization
from fris.config import ScenarioConfig
from fris.experiments import solve_scheme
from fris.pattern_rcg import PatternBank, euclidean_grad, objective
from fris.power_analysis import (apply_pattern_phase, line_grid, optimal_reflection_phase,
                                 pattern_upper_bound, position_bound_feasibility, random_link,
                                 received_power)
from fris.solver import water_filling, zf_beamformers
from fris.sph_harmonics import (FOUR_PI, fit_pattern, gpp38901_pattern, gram_matrix, pattern_gain,
                                quadrature_grid)

SCENARIO = ScenarioConfig(M_y=4, M_z=4, N_t=4, K=3, I=16)
SEEDS = range(20)


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def report(number, ok, detail, elapsed, budget):
    ok = ok and elapsed < budget
    line = (f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail} "
            f"[{elapsed:.1f}s of {budget:.0f}s]")
    return ok, line


@functools.lru_cache(maxsize=None)
def scheme_runs():
    """Scheme results on the 20 seeded scenarios, with the time spent on each scheme."""
    out, spent = {}, {}
    for scheme in ("fris_mmse", "fris_zf", "ris_38901", "ris_isotropic"):
        t0 = time.perf_counter()
        out[scheme] = [solve_scheme(SCENARIO, s, scheme) for s in SEEDS]
        spent[scheme] = time.perf_counter() - t0
    return out, spent


def criterion_1():
    t0 = time.perf_counter()
    dev = float(np.max(np.abs(gram_matrix(25, quadrature_grid(64, 128)) - np.eye(25))))
    return report(1, dev < 1e-8, f"Gram max deviation {dev:.2e} (< 1e-8)",
                  time.perf_counter() - t0, 5)


def criterion_2():
    t0 = time.perf_counter()
    g = quadrature_grid()
    target = gpp38901_pattern(g.theta, g.phi)
    nmse = [fit_pattern(target, n, g)[1] for n in (15, 25, 50)]
    ok = nmse[0] > nmse[1] > nmse[2] and nmse[2] < nmse[0] / 2
    detail = "NMSE " + ", ".join(f"I={n}: {v:.3e}" for n, v in zip((15, 25, 50), nmse))
    return report(2, ok, detail, time.perf_counter() - t0, 30)


def _fd_grad(fun, x, step=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        for unit in (1.0, 1j):
            e = np.zeros_like(x)
            e[idx] = unit * step
            g[idx] += unit * (fun(x + e) - fun(x - e)) / (2 * step)
    return g


def criterion_3():
    t0 = time.perf_counter()
    cfg = ScenarioConfig(M_y=2, M_z=2, N_t=2, K=2, I=9)
    worst = 0.0
    for seed in range(10):
        asm = assemble(sample_realization(cfg, seed), cfg.I, cfg.noise).noise_normalized()
        bank = PatternBank.initial(asm.M, asm.I, seed, perturbation=0.3)
        W = cn(np.random.default_rng(seed), asm.N_t, asm.K)
        W *= math.sqrt(cfg.p_tmax / np.sum(np.abs(W) ** 2))
        g = euclidean_grad(bank, asm, W, cfg.eps)
        ref = _fd_grad(lambda x: objective(x, asm, W, cfg.eps), bank.omega)
        worst = max(worst, float(np.linalg.norm(g - ref) / np.linalg.norm(ref)))
    return report(3, worst < 1e-5, f"worst relative FD error {worst:.2e} (< 1e-5)",
                  time.perf_counter() - t0, 60)


def criterion_4():
    t0 = time.perf_counter()
    rs = np.random.default_rng(4)
    grid = np.concatenate([[0.0], np.logspace(-3, 3, 19)])
    violations = 0
    for _ in range(100):
        H, h, W = cn(rs, 6, 4), cn(rs, 3, 6), cn(rs, 4, 3)
        noise = rs.uniform(0.1, 1.0, 3)
        aux = bf.mmse_update(H, h, W, noise)
        model = bf.build_quadratic(H, h, aux, rs.dirichlet(np.ones(3)), noise)
        violations += int(np.sum(np.diff(bf.power_curve(model, grid)) > 1e-12))
    return report(4, violations == 0, f"{violations} violations over 100 models x 20 points",
                  time.perf_counter() - t0, 10)


def criterion_5():
    runs, spent = scheme_runs()
    res = runs["fris_mmse"]
    worst_drop = min(float(np.min(np.diff(r.rate_trace))) for r in res)
    monotone = worst_drop >= -1e-9
    # converged: the final gap fell under 1e-4 within the 50 allowed outer iterations
    conv = [r.converged and r.iterations <= 50 for r in res]
    gaps = [abs(r.rate_trace[-1] - r.rate_trace[-2]) for r in res]
    detail = (f"monotone={monotone} (min step {worst_drop:.2e}); converged {sum(conv)}/20 "
              f"within 50 outer iterations (median final gap {np.median(gaps):.1e})")
    return report(5, monotone and all(conv), detail, spent["fris_mmse"], 600)


def criterion_6():
    t0 = time.perf_counter()
    rs = np.random.default_rng(6)
    grid = line_grid(512, 1 / 64)
    order_bad = attain_bad = strict = 0
    n = 200
    for i in range(n):
        M = (1, 2, 4)[i % 3]
        L, Z = ((2, 2), (2, 1), (1, 3), (3, 2))[i % 4]
        link = random_link(rs, M, L, Z, noise=float(rs.uniform(0, 0.1)))
        rand = received_power(link)
        opt = optimal_reflection_phase(link).power
        bound = pattern_upper_bound(link)
        if not (rand <= opt + 1e-12 and opt <= bound.power + 1e-12):
            order_bad += 1
        achieved = received_power(apply_pattern_phase(link, bound.pattern_phase))
        if abs(achieved - bound.power) > 1e-12 * bound.power:
            attain_bad += 1
        pos = position_bound_feasibility(link, grid)
        strict += pos.best_grid_power < pos.bound * (1 - 1e-12)
    ok = order_bad == 0 and attain_bad == 0 and strict >= 0.95 * n
    detail = (f"ordering violations {order_bad}, attainment misses {attain_bad}, "
              f"grid strictly below bound {strict}/{n}")
    return report(6, ok, detail, time.perf_counter() - t0, 60)


def criterion_7():
    runs, spent = scheme_runs()
    fris = np.array([r.rate for r in runs["fris_mmse"]])
    g38 = np.array([r.rate for r in runs["ris_38901"]])
    iso = np.array([r.rate for r in runs["ris_isotropic"]])
    gain = float(np.median(fris / iso - 1.0))
    ok = np.median(fris) > np.median(g38) and np.median(fris) > np.median(iso) and gain >= 0.25
    detail = (f"median rates FRIS+MMSE {np.median(fris):.3f}, 38.901 {np.median(g38):.3f}, "
              f"isotropic {np.median(iso):.3f}; median gain over isotropic {100 * gain:.1f}% "
              f"(>= 25%)")
    elapsed = spent["fris_mmse"] + spent["ris_38901"] + spent["ris_isotropic"]
    return report(7, ok, detail, elapsed, 900)


def criterion_8():
    runs, spent = scheme_runs()
    t0 = time.perf_counter()
    bad = 0
    total = 0
    for results in runs.values():
        for r in results:
            total += 1
            ok = r.beams.total_power <= SCENARIO.p_tmax + 1e-9
            if r.bank is not None:
                ok &= bool(np.all(np.abs(r.bank.energies() - FOUR_PI) < 1e-8))
            if r.phases is not None:
                ok &= bool(np.all(np.abs(np.abs(r.phases) - 1) < 1e-12))
            bad += not ok
    return report(8, bad == 0, f"{bad} infeasible of {total} solves (all four schemes)",
                  time.perf_counter() - t0, 60)


def criterion_9():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        rs = np.random.default_rng(seed)
        cfg = ScenarioConfig(M_y=int(rs.integers(1, 4)), M_z=int(rs.integers(1, 3)),
                             N_t=int(rs.integers(1, 4)), I=int(rs.integers(1, 10)))
        r = sample_realization(cfg, seed)
        omega = cn(rs, r.M, cfg.I)
        H, h = effective_channels(omega, assemble(r, cfg.I))
        H0, h0 = direct_channels(r, lambda t, p: np.array([pattern_gain(w, t, p) for w in omega]))
        worst = max(worst, float(np.max(np.abs(H - H0)) / np.max(np.abs(H0))),
                    float(np.max(np.abs(h - h0)) / np.max(np.abs(h0))))
    return report(9, worst < 1e-10, f"worst relative mismatch {worst:.2e} (< 1e-10)",
                  time.perf_counter() - t0, 10)


def criterion_10():
    t0 = time.perf_counter()
    worst, draws = 0.0, 0
    rs = np.random.default_rng(10)
    cfg = ScenarioConfig()
    for seed in range(50):
        if seed < 25:
            H, h = cn(rs, 8, 4), cn(rs, 3, 8)
        else:
            asm = assemble(sample_realization(cfg, seed), cfg.I, cfg.noise).noise_normalized()
            H, h = effective_channels(PatternBank.initial(asm.M, asm.I, seed), asm)
        beams = zf_beamformers(H, h, 1.0, [1 / 3] * 3, 1.0)
        X = np.conj(h) @ H
        S = X @ beams.W
        for k in range(3):
            for j in range(3):
                wn = np.linalg.norm(beams.W[:, j])
                if j != k and wn > 0:
                    worst = max(worst, abs(S[k, j]) / (np.linalg.norm(X[k]) * wn))
        draws += 1
    sym = water_filling([2.0, 2.0, 2.0], 3.0, [1 / 3] * 3)
    sym_ok = bool(np.all(sym == 1.0))
    return report(10, worst < 1e-9 and sym_ok,
                  f"worst ZF leakage {worst:.2e} over {draws} draws (< 1e-9); "
                  f"water-filling symmetry exact={sym_ok}", time.perf_counter() - t0, 5)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA, ids=[c.__name__ for c in CRITERIA])
def test_acceptance(criterion, capsys):
    ok, line = criterion()
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
