"""Alternating beamforming / pattern co-design and the benchmark schemes.

Every scheme runs on noise-normalized channels (``b_k`` or ``h_k`` divided by
``sigma_k``), which leaves rates and beamformers unchanged but keeps the
numbers the optimizers see of order one.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import beamforming as bf
from .beamforming import BeamformerSet
from .channel import AssembledChannel, ChannelRealization, direct_channels, effective_channels
from .pattern_rcg import LN2, OptimizationError, PatternBank, rcg_maximize, rcg_optimize
from .sph_harmonics import gpp38901_pattern

SCHEMES = ("fris_mmse", "fris_zf", "ris_38901", "ris_isotropic")


class RankDeficientError(ValueError):
    pass


@dataclass
class SolveResult:
    scheme: str
    beams: BeamformerSet
    rate_trace: list
    converged: bool
    iterations: int
    bank: PatternBank | None = None
    phases: np.ndarray | None = None
    inner_iterations: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def rate(self) -> float:
        return self.rate_trace[-1]


def water_filling(gains, p_tmax: float, eps) -> np.ndarray:
    """Maximize ``sum eps_k log2(1 + P_k g_k)`` subject to ``sum P_k <= p_tmax``.

    KKT gives ``P_k = max(0, eps_k mu - 1/g_k)``; the active set is found by
    sorting the thresholds ``1/(eps_k g_k)`` and the level ``mu`` is then exact.
    """
    gains = np.asarray(gains, dtype=float)
    eps = np.asarray(eps, dtype=float)
    P = np.zeros_like(gains)
    ok = (gains > 0) & (eps > 0)
    if not np.any(ok):
        return P
    idx = np.flatnonzero(ok)
    thresh = 1.0 / (eps[idx] * gains[idx])
    order = idx[np.argsort(thresh)]
    for n in range(len(order), 0, -1):
        act = order[:n]
        mu = (p_tmax + np.sum(1.0 / gains[act])) / np.sum(eps[act])
        if eps[act[-1]] * mu - 1.0 / gains[act[-1]] > 0:
            P[act] = eps[act] * mu - 1.0 / gains[act]
            break
    return P


def zf_beamformers(H, h, p_tmax: float, eps, noise) -> BeamformerSet:
    """Zero-forcing directions ``X^H (X X^H)^-1`` with weighted water-filling powers."""
    X = np.conj(h) @ H  # (K, N_t), row k is h_k^H H
    K, N_t = X.shape
    if K > N_t:
        raise RankDeficientError(f"zero-forcing needs K <= N_t, got K={K}, N_t={N_t}")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficientError("effective channel is rank deficient")
    C = X.conj().T @ np.linalg.inv(X @ X.conj().T)
    norms = np.linalg.norm(C, axis=0)
    sig = np.broadcast_to(np.asarray(noise, dtype=float), (K,))
    gains = 1.0 / (norms ** 2 * sig)
    P = water_filling(gains, p_tmax, eps)
    return BeamformerSet(C / norms * np.sqrt(P))


def _initial_beams(H, h, p_tmax, eps, noise) -> BeamformerSet:
    candidates = [bf.mrt_init(H, h, p_tmax)]
    try:
        candidates.append(zf_beamformers(H, h, p_tmax, eps, noise))
    except RankDeficientError:
        pass
    return max(candidates, key=lambda b: bf.weighted_sum_rate(H, h, b.W, eps, noise))


def _mmse_beam_step(H, h, beams: BeamformerSet, eps, noise, p_tmax, config) -> BeamformerSet:
    """Up to ``config.beam_rounds`` MMSE/dual rounds for the current channels.

    Each round is one pass of auxiliaries plus dual bisection.  Rounds stop
    once the rate gain falls to ``config.beam_tol``; a round that lowers the
    rate is discarded.
    """
    rate = bf.weighted_sum_rate(H, h, beams.W, eps, noise)
    for _ in range(config.beam_rounds):
        cand, _ = bf.beamforming_round(H, h, beams.W, eps, noise, p_tmax, config.bisection_tol)
        new = bf.weighted_sum_rate(H, h, cand.W, eps, noise)
        if new < rate:
            break
        beams, gain, rate = cand, new - rate, new
        if gain <= config.beam_tol:
            break
    return beams


def alternating_optimize(assembled: AssembledChannel, config, bank0: PatternBank | None = None,
                         seed: int = 0, beam_rule: str = "mmse",
                         beams0: BeamformerSet | None = None) -> SolveResult:
    """Alternate beamforming (MMSE/dual bisection or ZF) with RCG pattern updates.

    Stops when consecutive outer rates differ by at most ``config.outer_tol``
    or after ``config.max_outer`` iterations.  A beam update that would lower
    the rate (rounding, or ZF, which is not an ascent step) is rejected, so
    the ZF scheme's final beams zero-force the last bank at which a ZF
    update was accepted.  The ZF rule raises :class:`RankDeficientError`
    when the initial effective channel cannot be zero-forced.  ``bank0`` and
    ``beams0`` override the seeded starting point.
    """
    t0 = time.perf_counter()
    asm = assembled.noise_normalized()
    eps, p_tmax, noise = config.eps, config.p_tmax, asm.noise
    if bank0 is None:
        bank0 = PatternBank.initial(asm.M, asm.I, seed, config.init_perturbation)
    bank = bank0
    if beam_rule not in ("mmse", "zf"):
        raise ValueError(f"unknown beam rule {beam_rule!r}")
    H, h = effective_channels(bank, asm)
    if beams0 is not None:
        beams = beams0
    elif beam_rule == "zf":
        beams = zf_beamformers(H, h, p_tmax, eps, noise)
    else:
        beams = _initial_beams(H, h, p_tmax, eps, noise)
    rate = bf.weighted_sum_rate(H, h, beams.W, eps, noise)
    trace, inner = [rate], []
    converged = False
    it = 0
    for it in range(1, config.max_outer + 1):
        if beam_rule == "mmse":
            try:
                cand = _mmse_beam_step(H, h, beams, eps, noise, p_tmax, config)
            except ValueError as exc:
                raise OptimizationError(f"beam step failed at outer iteration {it}: {exc}") from exc
        else:
            try:
                cand = zf_beamformers(H, h, p_tmax, eps, noise)
            except RankDeficientError:
                cand = beams
        if bf.weighted_sum_rate(H, h, cand.W, eps, noise) >= bf.weighted_sum_rate(H, h, beams.W, eps, noise):
            beams = cand
        try:
            bank, rtrace = rcg_optimize(bank, asm, beams.W, eps, noise,
                                        tol=config.rcg_tol, max_iters=config.rcg_max_iters)
        except OptimizationError as exc:
            raise OptimizationError(f"pattern step failed at outer iteration {it}: {exc}") from exc
        inner.append(rtrace.iterations)
        H, h = effective_channels(bank, asm)
        new_rate = bf.weighted_sum_rate(H, h, beams.W, eps, noise)
        trace.append(new_rate)
        if abs(new_rate - rate) <= config.outer_tol:
            converged = True
            rate = new_rate
            break
        rate = new_rate
    return SolveResult(f"fris_{beam_rule}", beams, trace, converged, it, bank=bank,
                       inner_iterations=inner, wall_time=time.perf_counter() - t0)


def fixed_pattern_fn(name: str, M: int):
    if name == "isotropic":
        return lambda theta, phi: np.ones(M)
    if name == "gpp38901":
        return lambda theta, phi: np.full(M, float(gpp38901_pattern(theta, phi)))
    raise ValueError(f"unknown fixed pattern {name!r}")


def _phase_grad(H0, h0, v, W, eps, noise):
    """Ascent gradient of the rate w.r.t. the reflection coefficients, shape (M, 1)."""
    H = v[:, 0:1] * H0
    S = bf.link_matrix(H, h0, W)
    K = S.shape[0]
    S2 = np.abs(S) ** 2
    sig = np.broadcast_to(np.asarray(noise, dtype=float), (K,))
    total = S2.sum(axis=1) + sig
    interf = total - np.diag(S2)
    c = (2.0 * np.asarray(eps) / LN2)[:, None] * (1.0 / total[:, None] - (1.0 - np.eye(K)) / interf[:, None])
    G0 = H0 @ W  # (M, K)
    return np.einsum("kj,km,mj->m", c * S, h0, np.conj(G0))[:, None]


def passive_beamforming_baseline(realization: ChannelRealization, fixed_pattern: str,
                                 config) -> SolveResult:
    """Conventional RIS: fixed element pattern, unit-modulus phases by circle-manifold RCG.

    The outer loop mirrors :func:`alternating_optimize` with the reflection
    vector in place of the harmonic coefficients.
    """
    t0 = time.perf_counter()
    M = realization.M
    H0, h0 = direct_channels(realization, fixed_pattern_fn(fixed_pattern, M))
    sig = np.broadcast_to(np.asarray(config.noise, dtype=float), (realization.K,))
    h0 = h0 / np.sqrt(sig)[:, None]
    noise = np.ones(realization.K)
    eps, p_tmax = config.eps, config.p_tmax
    v = np.ones((M, 1), dtype=complex)

    def rate_of(v_, W_):
        return bf.weighted_sum_rate(v_[:, 0:1] * H0, h0, W_, eps, noise)

    H = v[:, 0:1] * H0
    beams = _initial_beams(H, h0, p_tmax, eps, noise)
    rate = rate_of(v, beams.W)
    trace, inner = [rate], []
    converged = False
    it = 0
    for it in range(1, config.max_outer + 1):
        H = v[:, 0:1] * H0
        try:
            beams = _mmse_beam_step(H, h0, beams, eps, noise, p_tmax, config)
        except ValueError as exc:
            raise OptimizationError(f"beam step failed at outer iteration {it}: {exc}") from exc
        W = beams.W
        try:
            v, rtrace = rcg_maximize(v, lambda x: rate_of(x, W),
                                     lambda x: _phase_grad(H0, h0, x, W, eps, noise), 1.0,
                                     tol=config.rcg_tol, max_iters=config.rcg_max_iters)
        except OptimizationError as exc:
            raise OptimizationError(f"phase step failed at outer iteration {it}: {exc}") from exc
        inner.append(rtrace.iterations)
        new_rate = rate_of(v, W)
        trace.append(new_rate)
        if abs(new_rate - rate) <= config.outer_tol:
            converged = True
            rate = new_rate
            break
        rate = new_rate
    scheme = "ris_38901" if fixed_pattern == "gpp38901" else "ris_isotropic"
    return SolveResult(scheme, beams, trace, converged, it, phases=v[:, 0],
                       inner_iterations=inner, wall_time=time.perf_counter() - t0)
