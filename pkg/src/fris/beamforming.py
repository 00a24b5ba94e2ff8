"""Active beamforming for fixed patterns via the MMSE rate transform.

Shapes used throughout: ``H`` is the effective BS -> RIS channel (M, N_t),
``h`` stacks the RIS -> UE channels as rows (K, M) and ``W`` holds the
beamformers as columns (N_t, K).  ``noise`` is a scalar or a length-K array.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LN2 = np.log(2.0)
E_FLOOR = 1e-300
EIG_CUTOFF = 1e-12


@dataclass(frozen=True)
class BeamformerSet:
    W: np.ndarray  # (N_t, K)

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.W) ** 2))

    @property
    def powers(self) -> np.ndarray:
        return np.sum(np.abs(self.W) ** 2, axis=0)


@dataclass(frozen=True)
class MmseAuxiliaries:
    D: np.ndarray  # (K,) positive
    u: np.ndarray  # (K,) complex
    E: np.ndarray  # (K,) MSE at the update point


@dataclass(frozen=True)
class QuadraticModel:
    f: np.ndarray  # (N_t, K), column k is f_k
    F: np.ndarray  # (N_t, N_t) Hermitian PSD
    G: np.ndarray  # (K,)


@dataclass
class DualDiagnostics:
    upsilon_trace: list = field(default_factory=list)
    power_trace: list = field(default_factory=list)
    upsilon_up: float = 0.0
    iterations: int = 0


def _noise(noise, K: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(noise, dtype=float), (K,))


def link_matrix(H: np.ndarray, h: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``S[k, j] = h_k^H H w_j``."""
    return np.conj(h) @ H @ W


def sinr(H, h, W, noise) -> np.ndarray:
    S2 = np.abs(link_matrix(H, h, W)) ** 2
    K = S2.shape[0]
    signal = np.diag(S2)
    interference = S2.sum(axis=1) - signal
    return signal / (interference + _noise(noise, K))


def user_rates(H, h, W, noise) -> np.ndarray:
    return np.log2(1.0 + sinr(H, h, W, noise))


def weighted_sum_rate(H, h, W, eps, noise) -> float:
    return float(np.dot(eps, user_rates(H, h, W, noise)))


def mmse_update(H, h, W, noise) -> MmseAuxiliaries:
    S = link_matrix(H, h, W)
    K = S.shape[0]
    total = np.sum(np.abs(S) ** 2, axis=1) + _noise(noise, K)
    s_kk = np.diag(S)
    u = s_kk / total
    E = mse(S, u, noise)
    D = 1.0 / np.maximum(E, E_FLOOR)
    return MmseAuxiliaries(D, u, E)


def mse(S: np.ndarray, u: np.ndarray, noise) -> np.ndarray:
    K = S.shape[0]
    S2 = np.abs(S) ** 2
    interference = S2.sum(axis=1) - np.diag(S2)
    return (np.abs(u) ** 2 * (interference + _noise(noise, K))
            + np.abs(np.conj(u) * np.diag(S) - 1.0) ** 2)


def surrogate_rates(H, h, W, aux: MmseAuxiliaries, noise) -> np.ndarray:
    """Per-UE lower bound ``(ln D - D E + 1) / ln 2``; tight at the MMSE point."""
    E = mse(link_matrix(H, h, W), aux.u, noise)
    return (np.log(aux.D) - aux.D * E + 1.0) / LN2


def build_quadratic(H, h, aux: MmseAuxiliaries, eps, noise) -> QuadraticModel:
    """Quadratic model of the weighted surrogate rate in the beams.

    ``G_k = eps_k (ln D_k - D_k (1 + sigma_k^2 |u_k|^2)) / ln 2`` omits the
    constant ``eps_k / ln 2`` of the surrogate, so :func:`quadratic_objective`
    sits ``sum_k eps_k / ln 2`` below it; the maximizer is unaffected.
    """
    K = h.shape[0]
    eps = np.asarray(eps, dtype=float)
    scale = eps * aux.D / LN2
    g = H.conj().T @ h.T  # column k is H^H h_k
    f = g * (scale * aux.u)[None, :]
    F = np.zeros((H.shape[1], H.shape[1]), dtype=complex)
    for k in range(K):
        if scale[k] > 0:
            F += np.outer(f[:, k], np.conj(f[:, k])) / scale[k]
    F = 0.5 * (F + F.conj().T)
    G = eps * (np.log(aux.D) - aux.D * (1.0 + _noise(noise, K) * np.abs(aux.u) ** 2)) / LN2
    return QuadraticModel(f, F, G)


def quadratic_objective(model: QuadraticModel, W) -> float:
    """``sum_k [ -sum_j w_j^H F_k w_j + 2 Re(f_k^H w_k) + G_k ]``."""
    quad = np.real(np.einsum("nk,nm,mk->", np.conj(W), model.F, W))
    lin = 2.0 * np.real(np.sum(np.conj(model.f) * W))
    return float(-quad + lin + model.G.sum())


def solve_w(F: np.ndarray, f: np.ndarray, upsilon: float) -> np.ndarray:
    """``(F + upsilon I)^dagger f`` through the eigendecomposition of ``F``."""
    if upsilon < 0:
        raise ValueError("dual variable must be nonnegative")
    lam, U = np.linalg.eigh(F)
    lam = np.clip(lam, 0.0, None)
    denom = lam + upsilon
    cutoff = EIG_CUTOFF * max(lam.max(initial=0.0), upsilon)
    inv = np.where(denom > cutoff, 1.0 / np.where(denom > cutoff, denom, 1.0), 0.0)
    c = U.conj().T @ f
    return U @ (inv.reshape((-1,) + (1,) * (c.ndim - 1)) * c)


class _Spectral:
    """Eigen-representation of ``P(upsilon)`` restricted to the range of F."""

    def __init__(self, model: QuadraticModel):
        lam, U = np.linalg.eigh(model.F)
        lam = np.clip(lam, 0.0, None)
        keep = lam > EIG_CUTOFF * lam.max(initial=0.0)
        self.lam, self.U = lam[keep], U[:, keep]
        self.c = self.U.conj().T @ model.f
        self.a = np.sum(np.abs(self.c) ** 2, axis=1)

    def power(self, upsilon: float) -> float:
        return float(np.sum(self.a / (self.lam + upsilon) ** 2))

    def dpower(self, upsilon: float) -> float:
        return float(-2.0 * np.sum(self.a / (self.lam + upsilon) ** 3))

    def beams(self, upsilon: float) -> np.ndarray:
        return self.U @ (self.c / (self.lam + upsilon)[:, None])


def power_curve(model: QuadraticModel, upsilons) -> np.ndarray:
    spec = _Spectral(model)
    return np.array([spec.power(float(v)) for v in np.atleast_1d(upsilons)])


def dual_bisection(model: QuadraticModel, p_tmax: float, tol: float = 1e-8,
                   max_iter: int = 200):
    """Bisection on the dual variable for the power-constrained quadratic.

    The bracket is closed when ``up - low <= tol * max(up, 1)``; the root is
    then polished with Newton steps from the infeasible side (``P`` is convex
    and decreasing), and the beams are scaled down if rounding leaves them a
    hair above the budget.  Returns ``(upsilon, BeamformerSet, diagnostics)``.
    """
    if p_tmax <= 0:
        raise ValueError("power budget must be positive")
    if not (np.all(np.isfinite(model.F)) and np.all(np.isfinite(model.f))):
        raise ValueError("quadratic model has non-finite entries")
    spec = _Spectral(model)
    diag = DualDiagnostics()
    p0 = spec.power(0.0)
    diag.upsilon_trace.append(0.0)
    diag.power_trace.append(p0)
    if spec.lam.size == 0 or p0 <= p_tmax:
        W = spec.beams(0.0) if spec.lam.size else np.zeros_like(model.f)
        return 0.0, BeamformerSet(W), diag

    low, up = 0.0, 1.0
    while spec.power(up) >= p_tmax:
        low, up = up, 2.0 * up
    while up - low > tol * max(up, 1.0) and diag.iterations < max_iter:
        mid = 0.5 * (up + low)
        p_mid = spec.power(mid)
        diag.upsilon_trace.append(mid)
        diag.power_trace.append(p_mid)
        if p_mid >= p_tmax:
            low = mid
        else:
            up = mid
        diag.iterations += 1
    diag.upsilon_up = up

    ups = low
    for _ in range(20):
        step = (spec.power(ups) - p_tmax) / spec.dpower(ups)
        nxt = min(max(ups - step, low), up)
        if abs(nxt - ups) <= 1e-15 * max(nxt, 1e-300):
            ups = nxt
            break
        ups = nxt
    W = spec.beams(ups)
    p = float(np.sum(np.abs(W) ** 2))
    if p > p_tmax:
        W = W * np.sqrt(p_tmax / p)
    return ups, BeamformerSet(W), diag


def beamforming_round(H, h, W, eps, noise, p_tmax, tol: float = 1e-8):
    """One block-ascent pass: MMSE auxiliaries, quadratic model, dual solve."""
    aux = mmse_update(H, h, W, noise)
    model = build_quadratic(H, h, aux, eps, noise)
    _, beams, _ = dual_bisection(model, p_tmax, tol)
    return beams, aux


def mrt_init(H, h, p_tmax: float) -> BeamformerSet:
    """Matched-filter beams ``H^H h_k`` with equal power split."""
    G = H.conj().T @ h.T
    norms = np.linalg.norm(G, axis=0)
    K = G.shape[1]
    safe = np.where(norms > 0, norms, 1.0)
    W = G / safe * np.sqrt(p_tmax / K)
    W[:, norms == 0] = np.sqrt(p_tmax / (K * G.shape[0]))
    return BeamformerSet(W)
