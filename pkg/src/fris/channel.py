"""Multipath BS -> FRIS -> UE channels.

RIS elements are numbered z-fastest: element ``m = t_y * M_z + t_z`` sits at
``(y, z) = (t_y d, t_z d)`` with ``d = lambda / 2``.  The same ordering is used
by the steering vectors, the assembled tensors and every pattern bank.

Two constructions are provided.  :func:`direct_channels` applies a per-element
pattern function to every path (``P_RIS`` diagonal form).  :func:`assemble`
builds the pattern-independent tensors ``A`` and ``b_k`` so that
``H_BR = Omega^H A`` and ``h_rk = Omega^H b_k`` for any coefficient bank.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .sph_harmonics import basis_matrix


@dataclass(frozen=True)
class PathComponent:
    gain: complex
    distance: float
    ris_theta: float  # direction at the RIS (AoA for BS paths, AoD for UE paths)
    ris_phi: float
    bs_theta: float | None = None  # AoD at the BS, only for BS -> RIS paths
    bs_phi: float | None = None
    is_los: bool = False


@dataclass(frozen=True)
class ChannelRealization:
    bs_ris_paths: tuple[PathComponent, ...]
    ris_ue_paths: tuple[tuple[PathComponent, ...], ...]
    M_y: int
    M_z: int
    N_t: int
    rho0: float
    alpha: float

    @property
    def M(self) -> int:
        return self.M_y * self.M_z

    @property
    def K(self) -> int:
        return len(self.ris_ue_paths)

    @property
    def gamma1(self) -> float:
        return np.sqrt(1.0 / len(self.bs_ris_paths))

    def gamma2(self, k: int) -> float:
        return np.sqrt(1.0 / len(self.ris_ue_paths[k]))


@dataclass(frozen=True)
class AssembledChannel:
    """Pattern-free channel tensors.

    ``A_blocks[m]`` is the ``I x N_t`` block of ``A`` belonging to element ``m``
    and ``b_blocks[k, m]`` the length-``I`` block of ``b_k``.
    """

    A_blocks: np.ndarray  # (M, I, N_t)
    b_blocks: np.ndarray  # (K, M, I)
    noise: np.ndarray = field(default_factory=lambda: np.ones(1))

    @property
    def M(self) -> int:
        return self.A_blocks.shape[0]

    @property
    def I(self) -> int:  # noqa: E743
        return self.A_blocks.shape[1]

    @property
    def N_t(self) -> int:
        return self.A_blocks.shape[2]

    @property
    def K(self) -> int:
        return self.b_blocks.shape[0]

    @property
    def A(self) -> np.ndarray:
        return self.A_blocks.reshape(self.M * self.I, self.N_t)

    def b(self, k: int) -> np.ndarray:
        return self.b_blocks[k].reshape(-1)

    def noise_normalized(self) -> "AssembledChannel":
        """Equivalent channel with unit noise (``b_k`` scaled by 1/sigma_k)."""
        sigma = np.sqrt(np.broadcast_to(self.noise, (self.K,)))
        return AssembledChannel(self.A_blocks, self.b_blocks / sigma[:, None, None],
                                np.ones(self.K))


def path_loss_amplitude(d, rho0: float, alpha: float):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if rho0 <= 0:
        raise ValueError("reference gain must be positive")
    return np.sqrt(rho0 / d ** alpha)


def steering_ris(theta: float, phi: float, M_y: int, M_z: int) -> np.ndarray:
    a_y = np.exp(-1j * np.pi * np.arange(M_y) * np.sin(theta) * np.sin(phi))
    a_z = np.exp(-1j * np.pi * np.arange(M_z) * np.cos(theta))
    return np.kron(a_y, a_z)


def steering_bs(theta: float, phi: float, N_t: int) -> np.ndarray:
    return np.exp(-1j * np.pi * np.arange(N_t) * np.sin(theta) * np.cos(phi))


def _cn(rng: np.random.Generator) -> complex:
    return complex(rng.standard_normal(), rng.standard_normal()) / np.sqrt(2.0)


def _uniform_deg(rng: np.random.Generator, support: Sequence[float]) -> float:
    lo, hi = support
    if not lo <= hi:
        raise ValueError(f"invalid angle support {support}")
    return float(np.radians(rng.uniform(lo, hi)))


def sample_realization(config, seed: int) -> ChannelRealization:
    """Draw one multipath geometry; deterministic in ``seed``.

    ``config`` is a :class:`fris.config.ScenarioConfig` (duck-typed).
    """
    rng = np.random.default_rng(seed)
    ang = config.angles
    excess = config.nlos_excess
    L = int(rng.integers(config.L_bounds[0], config.L_bounds[1] + 1))
    bs_paths = [PathComponent(
        gain=_cn(rng), distance=config.d_br,
        ris_theta=np.radians(ang["bs_ris_los_aoa"][0]), ris_phi=np.radians(ang["bs_ris_los_aoa"][1]),
        bs_theta=np.radians(ang["bs_ris_los_aod"][0]), bs_phi=np.radians(ang["bs_ris_los_aod"][1]),
        is_los=True)]
    for _ in range(L):
        bs_paths.append(PathComponent(
            gain=_cn(rng), distance=config.d_br * (1.0 + rng.uniform(0.0, excess)),
            ris_theta=_uniform_deg(rng, ang["ris_aoa_theta"]),
            ris_phi=_uniform_deg(rng, ang["ris_aoa_phi"]),
            bs_theta=_uniform_deg(rng, ang["bs_aod_theta"]),
            bs_phi=_uniform_deg(rng, ang["bs_aod_phi"])))
    ue_paths = []
    for _ in range(config.K):
        Z = int(rng.integers(config.Z_bounds[0], config.Z_bounds[1] + 1))
        d_los = rng.uniform(*config.ue_distance)
        paths = [PathComponent(
            gain=_cn(rng), distance=d_los,
            ris_theta=_uniform_deg(rng, ang["ue_los_theta"]),
            ris_phi=_uniform_deg(rng, ang["ue_los_phi"]), is_los=True)]
        for _ in range(Z):
            paths.append(PathComponent(
                gain=_cn(rng), distance=d_los * (1.0 + rng.uniform(0.0, excess)),
                ris_theta=_uniform_deg(rng, ang["ue_nlos_theta"]),
                ris_phi=_uniform_deg(rng, ang["ue_nlos_phi"])))
        ue_paths.append(tuple(paths))
    return ChannelRealization(tuple(bs_paths), tuple(ue_paths), config.M_y, config.M_z,
                              config.N_t, config.rho0, config.alpha)


def _ris_angles(paths) -> tuple[np.ndarray, np.ndarray]:
    return (np.array([p.ris_theta for p in paths]), np.array([p.ris_phi for p in paths]))


def assemble(realization: ChannelRealization, n_terms: int, noise=1.0) -> AssembledChannel:
    """Build ``A`` and ``b_k``: per path, a_R[m] * eta(direction) per element."""
    r = realization
    M = r.M
    A = np.zeros((M, n_terms, r.N_t), dtype=complex)
    th, ph = _ris_angles(r.bs_ris_paths)
    eta = basis_matrix(th, ph, n_terms)  # (P, I)
    for p, path in enumerate(r.bs_ris_paths):
        c = r.gamma1 * path_loss_amplitude(path.distance, r.rho0, r.alpha) * path.gain
        a_r = steering_ris(path.ris_theta, path.ris_phi, r.M_y, r.M_z)
        a_b = steering_bs(path.bs_theta, path.bs_phi, r.N_t)
        A += c * np.einsum("m,i,n->min", a_r, eta[p], np.conj(a_b))
    b = np.zeros((r.K, M, n_terms), dtype=complex)
    for k, paths in enumerate(r.ris_ue_paths):
        th, ph = _ris_angles(paths)
        eta = basis_matrix(th, ph, n_terms)
        for p, path in enumerate(paths):
            c = r.gamma2(k) * path_loss_amplitude(path.distance, r.rho0, r.alpha) * path.gain
            a_r = steering_ris(path.ris_theta, path.ris_phi, r.M_y, r.M_z)
            b[k] += c * np.outer(a_r, eta[p])
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (r.K,)).copy()
    return AssembledChannel(A, b, noise)


def effective_channels(omega: np.ndarray, assembled: AssembledChannel):
    """``H_BR = Omega^H A`` (M x N_t) and ``h_rk = Omega^H b_k`` stacked as (K, M).

    ``omega`` is the (M, I) array of per-element coefficient vectors; only the
    nonzero blocks of the block-diagonal ``Omega`` are touched.
    """
    omega = np.asarray(getattr(omega, "omega", omega))
    if omega.shape != assembled.A_blocks.shape[:2]:
        raise ValueError(f"bank shape {omega.shape} does not match channel "
                         f"{assembled.A_blocks.shape[:2]}")
    oc = np.conj(omega)
    H = np.einsum("mi,min->mn", oc, assembled.A_blocks)
    h = np.einsum("mi,kmi->km", oc, assembled.b_blocks)
    return H, h


PatternFn = Callable[[float, float], np.ndarray]


def direct_channels(realization: ChannelRealization, pattern: PatternFn):
    """Channels with ``P_RIS = diag(p_m(theta, phi))`` applied path by path.

    ``pattern(theta, phi)`` returns the length-M vector of element gains in
    that direction.  Returns ``(H_BR, h)`` with ``h`` of shape (K, M).
    """
    r = realization
    H = np.zeros((r.M, r.N_t), dtype=complex)
    for path in r.bs_ris_paths:
        c = r.gamma1 * path_loss_amplitude(path.distance, r.rho0, r.alpha) * path.gain
        p = pattern(path.ris_theta, path.ris_phi)
        a_r = steering_ris(path.ris_theta, path.ris_phi, r.M_y, r.M_z)
        a_b = steering_bs(path.bs_theta, path.bs_phi, r.N_t)
        H += c * np.outer(p * a_r, np.conj(a_b))
    h = np.zeros((r.K, r.M), dtype=complex)
    for k, paths in enumerate(r.ris_ue_paths):
        for path in paths:
            c = r.gamma2(k) * path_loss_amplitude(path.distance, r.rho0, r.alpha) * path.gain
            p = pattern(path.ris_theta, path.ris_phi)
            h[k] += c * p * steering_ris(path.ris_theta, path.ris_phi, r.M_y, r.M_z)
    return H, h


def write_paths_csv(path, realization: ChannelRealization) -> None:
    """Dump the path table (angles in degrees) for debugging."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["link", "ue", "is_los", "gain_re", "gain_im", "distance_m",
                    "ris_theta_deg", "ris_phi_deg", "bs_theta_deg", "bs_phi_deg"])

        def row(link, ue, p):
            bs = ["", ""] if p.bs_theta is None else [
                f"{np.degrees(p.bs_theta):.10g}", f"{np.degrees(p.bs_phi):.10g}"]
            w.writerow([link, ue, int(p.is_los), f"{p.gain.real:.17g}", f"{p.gain.imag:.17g}",
                        f"{p.distance:.17g}", f"{np.degrees(p.ris_theta):.10g}",
                        f"{np.degrees(p.ris_phi):.10g}", *bs])

        for p in realization.bs_ris_paths:
            row("bs_ris", "", p)
        for k, paths in enumerate(realization.ris_ue_paths):
            for p in paths:
                row("ris_ue", k, p)
