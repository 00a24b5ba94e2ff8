"""Point-to-point received power with passive, position and pattern control.

A link is described term by term: for element ``m``, BS-side path ``l`` and
UE-side path ``z`` the cascaded coefficient is

    g[m, l, z] * f[m, l, z] * exp(j 2 pi / lambda * kdiff[m, l, z] . p[m])

and the received power is ``|sqrt(1/LZ) sum_m theta_m sum_{l,z} (...)|^2 + sigma^2``.
With ``L = Z = 1`` the normalizer is 1, so a single evaluator covers every
case.  Three levers are compared: the reflection phases ``theta_m`` (passive
beamforming), the positions ``p_m`` and the per-term pattern phases.
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

UNIT_TOL = 1e-12


def wave_vector(theta, phi) -> np.ndarray:
    """Unit propagation direction ``[sin t sin p, sin t cos p, cos t]`` (last axis)."""
    theta, phi = np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
    return np.stack([np.sin(theta) * np.sin(phi), np.sin(theta) * np.cos(phi), np.cos(theta)],
                    axis=-1)


@dataclass(frozen=True)
class LinkGeometry:
    g: np.ndarray  # (M, L, Z) complex path gains
    f: np.ndarray  # (M, L, Z) complex pattern products
    kdiff: np.ndarray  # (M, L, Z, 3) wave-vector differences k_r - k_t
    positions: np.ndarray  # (M, 3) meters
    reflection: np.ndarray  # (M,) unit modulus
    noise: float = 0.0
    wavelength: float = 1.0

    def __post_init__(self):
        for name, dtype in (("g", complex), ("f", complex), ("kdiff", float),
                            ("positions", float), ("reflection", complex)):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=dtype))
        if self.g.ndim != 3 or self.g.size == 0:
            raise ValueError("need a non-empty (M, L, Z) array of path gains")
        M = self.g.shape[0]
        if self.f.shape != self.g.shape or self.kdiff.shape != self.g.shape + (3,):
            raise ValueError("g, f and kdiff must share the (M, L, Z) layout")
        if self.positions.shape != (M, 3) or self.reflection.shape != (M,):
            raise ValueError("need one position and one reflection coefficient per element")
        if np.any(np.abs(np.abs(self.reflection) - 1.0) > UNIT_TOL):
            raise ValueError("reflection coefficients must have unit modulus")
        if self.noise < 0 or self.wavelength <= 0:
            raise ValueError("noise must be nonnegative and wavelength positive")

    @property
    def M(self) -> int:
        return self.g.shape[0]

    @property
    def L(self) -> int:
        return self.g.shape[1]

    @property
    def Z(self) -> int:
        return self.g.shape[2]

    @property
    def case(self) -> int:
        """1: one element, one path; 2: one element, multipath; 3: many elements,
        one path; 4: many elements, multipath."""
        multipath = self.L * self.Z > 1
        if self.M == 1:
            return 2 if multipath else 1
        return 4 if multipath else 3

    def replace(self, **changes) -> "LinkGeometry":
        return dataclasses.replace(self, **changes)


def terms(link: LinkGeometry, positions=None) -> np.ndarray:
    """Per-term cascaded coefficients without the reflection, shape (M, L, Z)."""
    p = link.positions if positions is None else np.asarray(positions, dtype=float)
    geo = np.einsum("mlzc,mc->mlz", link.kdiff, p)
    return link.g * link.f * np.exp(2j * np.pi / link.wavelength * geo)


def _scale(link: LinkGeometry) -> float:
    return 1.0 / (link.L * link.Z)


def received_power(link: LinkGeometry, case: int | None = None) -> float:
    """``|sqrt(1/LZ) sum_m theta_m sum_{l,z} g f e^{...}|^2 + sigma^2``.

    ``case`` is optional; when given it must match the link's dimensions.
    """
    if case is not None and case != link.case:
        raise ValueError(f"link has the shape of case {link.case}, not case {case}")
    amp = np.sum(link.reflection * terms(link).sum(axis=(1, 2)))
    return float(_scale(link) * abs(amp) ** 2 + link.noise)


class ReflectionDesign(NamedTuple):
    phase: np.ndarray  # (M,) radians in [0, 2 pi)
    power: float
    degenerate: np.ndarray  # (M,) bool, inner sum was zero


def optimal_reflection_phase(link: LinkGeometry) -> ReflectionDesign:
    """Co-phase the per-element inner sums: ``angle theta_m = -angle(sum_{l,z} ...)``.

    An element whose inner sum vanishes has no defined phase; it gets 0 and
    is flagged.  The power returned is the closed form
    ``(1/LZ) (sum_m |inner_m|)^2 + sigma^2``.
    """
    inner = terms(link).sum(axis=(1, 2))
    degenerate = inner == 0
    phase = np.mod(-np.angle(inner), 2.0 * np.pi)
    phase[degenerate] = 0.0
    power = _scale(link) * np.sum(np.abs(inner)) ** 2 + link.noise
    return ReflectionDesign(phase, float(power), degenerate)


def _active(link: LinkGeometry) -> np.ndarray:
    """Mask of nonzero ``g f`` terms; zero terms are dropped with a warning."""
    active = np.abs(link.g * link.f) > 0
    if not np.all(active):
        warnings.warn(f"dropping {int(np.sum(~active))} zero-gain path term(s)", RuntimeWarning,
                      stacklevel=3)
    return active


def position_bound(link: LinkGeometry) -> float:
    """Power if every term could be co-phased by moving the elements."""
    mag = np.abs(link.g * link.f)
    return float(_scale(link) * mag.sum() ** 2 + link.noise)


class PatternDesign(NamedTuple):
    power: float
    pattern_phase: np.ndarray  # (M, L, Z) radians, angle of each f[m, l, z]


def pattern_upper_bound(link: LinkGeometry) -> PatternDesign:
    """Pattern-phase bound ``(1/LZ)(sum |g f|)^2 + sigma^2`` with its phases.

    Each term's pattern phase is set to ``-angle(theta_m g e^{...})`` so all
    terms add coherently with zero total phase; ``|f|`` is kept.
    """
    active = _active(link)
    geo = np.einsum("mlzc,mc->mlz", link.kdiff, link.positions)
    rest = link.reflection[:, None, None] * link.g * np.exp(2j * np.pi / link.wavelength * geo)
    phase = np.where(active, np.mod(-np.angle(rest), 2.0 * np.pi), 0.0)
    return PatternDesign(position_bound(link), phase)


def apply_pattern_phase(link: LinkGeometry, phase: np.ndarray) -> LinkGeometry:
    """Same link with ``f`` replaced by ``|f| e^{j phase}``."""
    return link.replace(f=np.abs(link.f) * np.exp(1j * np.asarray(phase, dtype=float)))


def line_grid(n_points: int = 512, step: float = 1.0 / 64.0, wavelength: float = 1.0,
              axis=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Position offsets ``k * step * lambda`` along ``axis``, shape (n_points, 3)."""
    if n_points < 1:
        raise ValueError("position grid must be non-empty")
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.arange(n_points)[:, None] * (step * wavelength) * axis[None, :]


class PositionSearch(NamedTuple):
    bound: float
    best_grid_power: float
    gap: float
    best_positions: np.ndarray  # (M, 3)


def position_bound_feasibility(link: LinkGeometry, grid, max_sweeps: int = 50) -> PositionSearch:
    """Best power over element positions ``p_m + grid`` versus the position bound.

    One element is searched exhaustively.  With several elements the grid is
    swept one element at a time (coordinate ascent) until a full sweep no
    longer improves the power, so the result is a lower estimate of the true
    grid optimum.  Reflection and pattern are held fixed.
    """
    grid = np.asarray(grid, dtype=float).reshape(-1, 3)
    if grid.shape[0] == 0:
        raise ValueError("position grid must be non-empty")
    _active(link)
    scale = _scale(link)
    k = 2.0 * np.pi / link.wavelength
    base = link.positions
    coef = link.reflection[:, None, None] * link.g * link.f  # (M, L, Z)

    # contrib[m, n]: element m's inner sum when it sits at base[m] + grid[n]
    geo = np.einsum("mlzc,mnc->mnlz", link.kdiff, base[:, None, :] + grid[None, :, :])
    contrib = np.einsum("mlz,mnlz->mn", coef, np.exp(1j * k * geo))
    choice = np.zeros(link.M, dtype=int)
    if link.M == 1:
        choice[0] = int(np.argmax(np.abs(contrib[0])))
    else:
        idx = np.arange(link.M)
        total = contrib[idx, choice].sum()
        for _ in range(max_sweeps):
            improved = False
            for m in range(link.M):
                others = total - contrib[m, choice[m]]
                n = int(np.argmax(np.abs(others + contrib[m])))
                if abs(others + contrib[m, n]) > abs(total) * (1.0 + 1e-15):
                    choice[m], total, improved = n, others + contrib[m, n], True
            if not improved:
                break
    amp = contrib[np.arange(link.M), choice].sum()
    best = float(scale * abs(amp) ** 2 + link.noise)
    bound = position_bound(link)
    return PositionSearch(bound, best, bound - best, base + grid[choice])


def case3_attainment(link: LinkGeometry) -> tuple[float, np.ndarray]:
    """Single-path design: co-phase the elements with ``theta_m``.

    Returns ``(power, phase)`` where the power, evaluated by plugging the
    phases back in, equals ``(sum_m |g_m f_m|)^2 + sigma^2``.
    """
    if link.L != 1 or link.Z != 1:
        raise ValueError("case 3 needs a single path on each side")
    design = optimal_reflection_phase(link)
    tuned = link.replace(reflection=np.exp(1j * design.phase))
    return received_power(tuned), design.phase


def random_link(rng: np.random.Generator, M: int = 1, L: int = 2, Z: int = 2, noise: float = 0.0,
                wavelength: float = 1.0, spacing: float = 0.5) -> LinkGeometry:
    """Random instance: CN(0,1) gains and pattern values, uniform path directions.

    Elements sit on a square-ish y-z grid with ``spacing`` wavelengths.  Gains
    factor as ``conj(g_ru,z) g_br,l`` and the pattern product as
    ``conj(f_m(t_z)) f_m(r_l)``; reflection phases are uniform.
    """
    def cn(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)

    g_br, g_ru = cn(L), cn(Z)
    g = np.broadcast_to(np.conj(g_ru)[None, None, :] * g_br[None, :, None], (M, L, Z)).copy()
    f_r, f_t = cn(M, L), cn(M, Z)
    f = np.conj(f_t)[:, None, :] * f_r[:, :, None]
    k_r = wave_vector(rng.uniform(0, np.pi, L), rng.uniform(-np.pi, np.pi, L))
    k_t = wave_vector(rng.uniform(0, np.pi, Z), rng.uniform(-np.pi, np.pi, Z))
    kdiff = np.broadcast_to(k_r[:, None, :] - k_t[None, :, :], (M, L, Z, 3)).copy()
    n_y = int(np.ceil(np.sqrt(M)))
    idx = np.arange(M)
    positions = np.stack([np.zeros(M), idx // n_y, idx % n_y], axis=1) * spacing * wavelength
    reflection = np.exp(1j * rng.uniform(0, 2 * np.pi, M))
    return LinkGeometry(g, f, kdiff, positions, reflection, noise, wavelength)
