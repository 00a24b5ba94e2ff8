"""Complex spherical harmonics and energy-constrained radiation patterns.

Harmonics are indexed linearly by ``i = v**2 + v + h + 1`` (1-based).  A
pattern is described by a coefficient vector ``omega`` of length ``I`` and
evaluated as ``omega^H eta(theta, phi)``, where ``eta`` stacks the first
``I`` harmonics.  Angles are in radians: ``theta`` is the elevation measured
from the +z axis and ``phi`` the azimuth.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class HarmonicIndex:
    v: int
    h: int

    @property
    def i(self) -> int:
        return index_of(self.v, self.h)


@dataclass(frozen=True)
class HarmonicCoefficients:
    """Coefficient vector ``omega_m`` of a single element."""

    coeffs: np.ndarray
    element_id: int = 0

    @property
    def energy(self) -> float:
        return float(np.vdot(self.coeffs, self.coeffs).real)

    def normalized(self) -> "HarmonicCoefficients":
        return HarmonicCoefficients(normalize_energy(self.coeffs), self.element_id)


@dataclass(frozen=True)
class BasisVector:
    values: np.ndarray
    direction: tuple[float, float]


class QuadratureGrid(NamedTuple):
    """Flattened tensor grid; ``weights`` already include the sin(theta) factor."""

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    n_theta: int
    n_phi: int

    def integrate(self, values: np.ndarray) -> complex | float:
        return np.sum(self.weights * values)


def index_of(v: int, h: int) -> int:
    if v < 0 or abs(h) > v:
        raise ValueError(f"invalid harmonic (v={v}, h={h})")
    return v * v + v + h + 1


def degree_order_of(i: int) -> tuple[int, int]:
    if i < 1:
        raise ValueError(f"linear index must be >= 1, got {i}")
    v = math.isqrt(i - 1)
    return v, i - 1 - v * v - v


def degree_of_truncation(n_terms: int) -> int:
    """Highest degree touched by the first ``n_terms`` harmonics."""
    return degree_order_of(n_terms)[0]


def assoc_legendre(v: int, h: int, x):
    """Associated Legendre function P_v^h(x) without the Condon-Shortley sign.

    Uses the upward recurrence in the degree starting from
    ``P_h^h = (2h-1)!! (1-x^2)^(h/2)``.
    """
    if h < 0 or h > v:
        raise ValueError(f"need 0 <= h <= v, got v={v}, h={h}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("x must lie in [-1, 1]")
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    p_hh = np.ones_like(x)
    for k in range(1, h + 1):
        p_hh = p_hh * (2 * k - 1) * s
    if v == h:
        return p_hh
    p_prev, p_cur = p_hh, x * (2 * h + 1) * p_hh
    for n in range(h + 2, v + 1):
        p_prev, p_cur = p_cur, ((2 * n - 1) * x * p_cur - (n + h - 1) * p_prev) / (n - h)
    return p_cur


def _norm_factor(v: int, h: int) -> float:
    a = abs(h)
    # ratio (v-a)!/(v+a)! accumulated as a product to avoid huge factorials
    ratio = 1.0
    for k in range(v - a + 1, v + a + 1):
        ratio /= k
    return math.sqrt((2 * v + 1) * ratio / FOUR_PI)


def sph_harmonic(v: int, h: int, theta, phi):
    """Y_v^h(theta, phi) = (-1)^h N_v^h P_v^|h|(cos theta) e^{j h phi}."""
    if v < 0 or abs(h) > v:
        raise ValueError(f"invalid harmonic (v={v}, h={h})")
    theta = np.asarray(theta, dtype=float)
    if np.any((theta < -1e-12) | (theta > np.pi + 1e-12)):
        raise ValueError("theta must lie in [0, pi]")
    phi = np.asarray(phi, dtype=float)
    x = np.clip(np.cos(theta), -1.0, 1.0)
    sign = -1.0 if h % 2 else 1.0
    return sign * _norm_factor(v, h) * assoc_legendre(v, abs(h), x) * np.exp(1j * h * phi)


def basis_matrix(theta, phi, n_terms: int) -> np.ndarray:
    """Harmonics Y_1..Y_I at every direction, shape ``theta.shape + (I,)``.

    Shares one Legendre recurrence per order ``h`` across all degrees.
    """
    if n_terms < 1:
        raise ValueError("truncation length must be >= 1")
    theta = np.asarray(theta, dtype=float)
    phi = np.broadcast_to(np.asarray(phi, dtype=float), theta.shape)
    x = np.clip(np.cos(theta), -1.0, 1.0)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    V = degree_of_truncation(n_terms)
    out = np.zeros(theta.shape + (n_terms,), dtype=complex)
    p_hh = np.ones_like(x)
    for h in range(V + 1):
        if h > 0:
            p_hh = p_hh * (2 * h - 1) * s
        phase = np.exp(1j * h * phi)
        sign = -1.0 if h % 2 else 1.0
        p_prev, p_cur = None, p_hh
        for v in range(h, V + 1):
            if v == h + 1:
                p_prev, p_cur = p_cur, x * (2 * h + 1) * p_hh
            elif v > h + 1:
                p_prev, p_cur = p_cur, ((2 * v - 1) * x * p_cur - (v + h - 1) * p_prev) / (v - h)
            y = sign * _norm_factor(v, h) * p_cur * phase
            i_pos = index_of(v, h)
            if i_pos <= n_terms:
                out[..., i_pos - 1] = y
            if h > 0:
                i_neg = index_of(v, -h)
                if i_neg <= n_terms:
                    out[..., i_neg - 1] = np.conj(y)
    return out


def basis_vector(theta: float, phi: float, n_terms: int) -> BasisVector:
    values = basis_matrix(np.array(theta), np.array(phi), n_terms)
    return BasisVector(values, (float(theta), float(phi)))


def pattern_gain(omega, theta, phi):
    """Complex gain ``omega^H eta(theta, phi)``; broadcasts over directions."""
    coeffs = omega.coeffs if isinstance(omega, HarmonicCoefficients) else np.asarray(omega)
    eta = basis_matrix(theta, phi, coeffs.shape[-1])
    return eta @ np.conj(coeffs)


def normalize_energy(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=complex)
    norm = np.linalg.norm(coeffs, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot normalize a zero coefficient vector")
    return coeffs * (np.sqrt(FOUR_PI) / norm)


def isotropic_coefficients(n_terms: int) -> np.ndarray:
    c = np.zeros(n_terms, dtype=complex)
    c[0] = np.sqrt(FOUR_PI)
    return c


def quadrature_grid(n_theta: int = 64, n_phi: int = 128) -> QuadratureGrid:
    """Gauss-Legendre in cos(theta) times the uniform trapezoid rule in phi."""
    if n_theta < 2 or n_phi < 2:
        raise ValueError("need n_theta >= 2 and n_phi >= 2")
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    ww = np.outer(wx, np.full(n_phi, 2.0 * np.pi / n_phi))
    return QuadratureGrid(tt.ravel(), pp.ravel(), ww.ravel(), n_theta, n_phi)


def gram_matrix(n_terms: int, grid: QuadratureGrid | None = None) -> np.ndarray:
    grid = grid or quadrature_grid()
    Y = basis_matrix(grid.theta, grid.phi, n_terms)
    return (Y * grid.weights[:, None]).T @ np.conj(Y)


def pattern_energy(omega, grid: QuadratureGrid | None = None) -> float:
    grid = grid or quadrature_grid()
    g = pattern_gain(omega, grid.theta, grid.phi)
    return float(grid.integrate(np.abs(g) ** 2))


def fit_pattern(target, n_terms: int, grid: QuadratureGrid | None = None,
                element_id: int = 0) -> tuple[HarmonicCoefficients, float]:
    """Project sampled gains onto Y_1..Y_I and rescale to energy 4*pi.

    ``target`` holds the pattern at the grid nodes.  The returned NMSE is the
    relative squared error of the unscaled projection.
    """
    grid = grid or quadrature_grid()
    V = degree_of_truncation(n_terms)
    if grid.n_theta < V + 1 or grid.n_phi < 2 * V + 1:
        raise ValueError(
            f"grid {grid.n_theta}x{grid.n_phi} too coarse for degree {V}")
    target = np.asarray(target, dtype=complex).ravel()
    if target.shape != grid.weights.shape:
        raise ValueError("target must be sampled on the grid nodes")
    Y = basis_matrix(grid.theta, grid.phi, n_terms)
    proj = (grid.weights * target) @ np.conj(Y)  # integral of p * conj(Y_i)
    omega = np.conj(proj)  # stored so that gain = omega^H eta
    approx = Y @ proj
    err = grid.integrate(np.abs(target - approx) ** 2)
    ref = grid.integrate(np.abs(target) ** 2)
    nmse = float(err / ref) if ref > 0 else 0.0
    return HarmonicCoefficients(normalize_energy(omega), element_id), nmse


def _gpp38901_db(theta, phi):
    theta_deg = np.degrees(np.asarray(theta, dtype=float))
    phi_deg = (np.degrees(np.asarray(phi, dtype=float)) + 180.0) % 360.0 - 180.0
    a_vert = -np.minimum(12.0 * ((theta_deg - 90.0) / 65.0) ** 2, 30.0)
    a_horz = -np.minimum(12.0 * (phi_deg / 65.0) ** 2, 30.0)
    return -np.minimum(-(a_vert + a_horz), 30.0) + 8.0


@lru_cache(maxsize=None)
def _gpp38901_scale(n_theta: int, n_phi: int) -> float:
    grid = quadrature_grid(n_theta, n_phi)
    amp = 10.0 ** (_gpp38901_db(grid.theta, grid.phi) / 20.0)
    return float(np.sqrt(FOUR_PI / grid.integrate(amp ** 2)))


def gpp38901_pattern(theta, phi, normalize: bool = True):
    """Single-element 3GPP TR 38.901 amplitude pattern (boresight theta=pi/2, phi=0).

    With ``normalize`` the amplitude is scaled so that its energy on the
    default 64x128 quadrature grid equals 4*pi; otherwise the raw 8 dBi-peak
    amplitude is returned.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any((theta < -1e-12) | (theta > np.pi + 1e-12)):
        raise ValueError("theta must lie in [0, pi]")
    amp = 10.0 ** (_gpp38901_db(theta, phi) / 20.0)
    return amp * _gpp38901_scale(64, 128) if normalize else amp


def write_pattern_csv(path, omega, n_theta: int = 91, n_phi: int = 181) -> int:
    """Sample a pattern on a regular degree grid and write one CSV row per node.

    Columns: theta_deg, phi_deg, re, im, abs, phase_rad.  Returns the row count.
    """
    theta_deg = np.linspace(0.0, 180.0, n_theta)
    phi_deg = np.linspace(-180.0, 180.0, n_phi)
    tt, pp = np.meshgrid(theta_deg, phi_deg, indexing="ij")
    gain = pattern_gain(omega, np.radians(tt), np.radians(pp))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta_deg", "phi_deg", "re", "im", "abs", "phase_rad"])
        for t, p, g in zip(tt.ravel(), pp.ravel(), gain.ravel()):
            writer.writerow([f"{t:.6g}", f"{p:.6g}", f"{g.real:.12g}", f"{g.imag:.12g}",
                             f"{abs(g):.12g}", f"{np.angle(g):.12g}"])
    return tt.size
