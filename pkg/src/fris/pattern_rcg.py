"""Pattern design on the oblique manifold by Riemannian conjugate gradient.

A bank is stored as an (M, I) array whose row ``m`` is ``omega_m``; the
feasible set is ``{||omega_m||^2 = 4 pi for all m}``.  Complex gradients are
"ascent" gradients ``g = 2 df/d(conj x)``, so that
``f(x + t d) ~ f(x) + t Re<g, d>`` and ``x + t g`` increases ``f``.

The optimizer itself (:func:`rcg_maximize`) works on any product of complex
spheres, which the passive-RIS baseline reuses with radius 1 and ``I = 1``.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .beamforming import LN2, link_matrix, weighted_sum_rate
from .channel import AssembledChannel, effective_channels
from .sph_harmonics import FOUR_PI, isotropic_coefficients


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PatternBank:
    omega: np.ndarray  # (M, I)

    @property
    def M(self) -> int:
        return self.omega.shape[0]

    @property
    def I(self) -> int:  # noqa: E743
        return self.omega.shape[1]

    def energies(self) -> np.ndarray:
        return np.sum(np.abs(self.omega) ** 2, axis=1)

    def on_manifold(self, tol: float = 1e-8) -> bool:
        return bool(np.all(np.abs(self.energies() - FOUR_PI) <= tol))

    @classmethod
    def isotropic(cls, M: int, I: int) -> "PatternBank":  # noqa: E741
        return cls(np.tile(isotropic_coefficients(I), (M, 1)))

    @classmethod
    def initial(cls, M: int, I: int, seed: int = 0, perturbation: float = 1e-2) -> "PatternBank":  # noqa: E741
        """Isotropic bank plus a seeded complex perturbation, renormalized."""
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal((M, I)) + 1j * rng.standard_normal((M, I))
        omega = cls.isotropic(M, I).omega + perturbation * noise
        return cls(retract(omega, 0.0, np.zeros_like(omega)))


@dataclass
class RcgTrace:
    objective: list = field(default_factory=list)
    step: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    backtracks: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.step)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective", "step", "grad_norm"])
            for e, f in enumerate(self.objective):
                step = self.step[e - 1] if e > 0 else 0.0
                gn = self.grad_norm[e] if e < len(self.grad_norm) else ""
                w.writerow([e, f"{f:.15g}", f"{step:.15g}", gn if gn == "" else f"{gn:.15g}"])


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


def objective(bank, assembled: AssembledChannel, W, eps, noise=None) -> float:
    H, h = effective_channels(bank, assembled)
    noise = assembled.noise if noise is None else noise
    return weighted_sum_rate(H, h, W, eps, noise)


def euclidean_grad(bank, assembled: AssembledChannel, W, eps, noise=None) -> np.ndarray:
    """Gradient of the weighted sum rate w.r.t. every ``omega_m``, shape (M, I).

    Uses the effective channels: for UE k and beam j, the block of element m
    collects ``conj(S_kj) conj(h_k[m]) A_m w_j + S_kj b_k,m conj((H w_j)[m])``.
    """
    omega = np.asarray(getattr(bank, "omega", bank))
    noise = assembled.noise if noise is None else noise
    H, h = effective_channels(omega, assembled)
    S = link_matrix(H, h, W)
    K = S.shape[0]
    S2 = np.abs(S) ** 2
    sig = np.broadcast_to(np.asarray(noise, dtype=float), (K,))
    total = S2.sum(axis=1) + sig
    interf = total - np.diag(S2)
    eps = np.asarray(eps, dtype=float)
    c = (2.0 * eps / LN2)[:, None] * (1.0 / total[:, None] - (1.0 - np.eye(K)) / interf[:, None])
    AW = np.einsum("min,nj->mij", assembled.A_blocks, W)
    G = H @ W
    grad = np.einsum("kj,km,mij->mi", c * np.conj(S), np.conj(h), AW)
    grad += np.einsum("kj,kmi,mj->mi", c * S, assembled.b_blocks, np.conj(G))
    return grad


def riemannian_grad(egrad: np.ndarray, omega: np.ndarray, radius2: float = FOUR_PI) -> np.ndarray:
    """Project onto the tangent space: remove ``Re<omega_m, g_m>`` per block."""
    omega = np.asarray(getattr(omega, "omega", omega))
    normal = np.real(np.sum(np.conj(omega) * egrad, axis=1, keepdims=True))
    return egrad - omega * normal / radius2


def polak_ribiere(g_new: np.ndarray, g_old_moved: np.ndarray, g_old: np.ndarray) -> float:
    """PR+ coefficient ``max(0, Re<g+, g+ - P g> / <g, g>)``."""
    denom = _inner(g_old, g_old)
    if denom <= 0.0:
        return 0.0
    return max(0.0, _inner(g_new, g_new - g_old_moved) / denom)


def retract(omega: np.ndarray, step: float, direction: np.ndarray,
            radius2: float = FOUR_PI) -> np.ndarray:
    """Step along ``direction`` and rescale every block back to norm ``sqrt(radius2)``.

    A block whose updated norm is zero is left unchanged and reported with
    a ``RuntimeWarning``.
    """
    if step < 0:
        raise ValueError("step must be nonnegative")
    omega = np.asarray(getattr(omega, "omega", omega))
    y = omega + step * direction
    norms = np.linalg.norm(y, axis=1, keepdims=True)
    bad = norms[:, 0] == 0
    out = y * (np.sqrt(radius2) / np.where(norms > 0, norms, 1.0))
    if np.any(bad):
        warnings.warn(f"retraction hit {int(bad.sum())} zero-norm block(s); kept unchanged",
                      RuntimeWarning, stacklevel=2)
        out[bad] = omega[bad]
    return out


def _line_search(fun, x, f, d, slope, radius2, t0, c1, contraction, max_backtracks,
                 max_expansions=30):
    """Armijo search along ``retract(x, t, d)`` from the trial step ``t0``.

    A trial that already satisfies the sufficient-increase test is expanded
    by 1/contraction while the objective keeps improving; otherwise it is
    contracted.  The accepted bracket is refined once by fitting a parabola
    through ``f``, the slope and the accepted value.  Returns
    ``(t, x_new, f_new, n_evals)`` or ``None`` when no step is acceptable.
    """
    def trial(t):
        x_t = retract(x, t, d, radius2)
        f_t = fun(x_t)
        if not np.isfinite(f_t):
            raise OptimizationError(f"non-finite objective {f_t} at step {t}")
        return x_t, f_t

    def armijo(t, f_t):
        return f_t >= f + c1 * t * slope

    t = t0
    x_t, f_t = trial(t)
    evals = 1
    if armijo(t, f_t):
        for _ in range(max_expansions):
            t_big = t / contraction
            x_b, f_b = trial(t_big)
            evals += 1
            if not (armijo(t_big, f_b) and f_b > f_t):
                break
            t, x_t, f_t = t_big, x_b, f_b
    else:
        for _ in range(max_backtracks):
            t *= contraction
            x_t, f_t = trial(t)
            evals += 1
            if armijo(t, f_t):
                break
        else:
            return None
    curv = f + slope * t - f_t  # > 0 when the parabola opens downward
    if curv > 0:
        t_star = slope * t * t / (2.0 * curv)
        if t_star > 0 and abs(t_star - t) > 1e-3 * t:
            x_s, f_s = trial(t_star)
            evals += 1
            if f_s > f_t and armijo(t_star, f_s):
                t, x_t, f_t = t_star, x_s, f_s
    return t, x_t, f_t, evals


def rcg_maximize(x0: np.ndarray, fun: Callable, egrad: Callable, radius2: float,
                 tol: float = 1e-6, max_iters: int = 100, c1: float = 1e-4,
                 contraction: float = 0.5, max_backtracks: int = 30):
    """Maximize ``fun`` over rows of fixed norm with PR+ conjugate directions.

    The first trial step is ``1/||D||``; later iterations start from the
    previously accepted step length.  Stops when an accepted step changes
    ``fun`` by at most ``tol``, when no Armijo step exists, or after
    ``max_iters`` iterations.
    """
    x = np.array(x0, dtype=complex)
    f = fun(x)
    if not np.isfinite(f):
        raise OptimizationError(f"non-finite objective at start: {f}")
    trace = RcgTrace(objective=[f])
    g = riemannian_grad(egrad(x), x, radius2)
    d = g.copy()
    trace.grad_norm.append(float(np.linalg.norm(g)))
    move = None  # length of the last accepted displacement t * ||d||
    for _ in range(max_iters):
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        slope = _inner(g, d)
        if slope <= 0.0:
            d, slope = g.copy(), gn * gn
        dn = np.linalg.norm(d)
        t0 = 1.0 / dn if move is None else move / dn
        found = _line_search(fun, x, f, d, slope, radius2, t0, c1, contraction, max_backtracks)
        if found is None:
            break
        t, x_new, f_new, evals = found
        move = t * dn
        trace.step.append(t)
        trace.backtracks.append(evals)
        trace.objective.append(f_new)
        g_new = riemannian_grad(egrad(x_new), x_new, radius2)
        trace.grad_norm.append(float(np.linalg.norm(g_new)))
        g_moved = riemannian_grad(g, x_new, radius2)
        d_moved = riemannian_grad(d, x_new, radius2)
        beta = polak_ribiere(g_new, g_moved, g)
        d = g_new + beta * d_moved
        done = abs(f_new - f) <= tol
        x, f, g = x_new, f_new, g_new
        if done:
            break
    return x, trace


def rcg_optimize(bank0: PatternBank, assembled: AssembledChannel, W, eps, noise=None,
                 tol: float = 1e-6, max_iters: int = 100, **kwargs):
    """Pattern subproblem for fixed beams; returns ``(PatternBank, RcgTrace)``."""
    noise = assembled.noise if noise is None else noise
    omega, trace = rcg_maximize(
        bank0.omega,
        lambda x: objective(x, assembled, W, eps, noise),
        lambda x: euclidean_grad(x, assembled, W, eps, noise),
        FOUR_PI, tol=tol, max_iters=max_iters, **kwargs)
    return PatternBank(omega), trace
