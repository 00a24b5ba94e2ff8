"""Scenario configuration.

Physical inputs are given in the units people quote (dBm, dB, degrees) and
converted to linear values exactly once, as properties.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watt(x_dbm):
    return db_to_linear(np.asarray(x_dbm, dtype=float) - 30.0)


def watt_to_dbm(x):
    return linear_to_db(x) + 30.0


def default_angles() -> dict[str, tuple[float, float]]:
    # degrees; (theta, phi) pairs for fixed LoS directions, (lo, hi) otherwise
    return {
        "bs_ris_los_aod": (70.0, 150.0),
        "bs_ris_los_aoa": (110.0, -30.0),
        "bs_aod_theta": (10.0, 70.0),
        "bs_aod_phi": (90.0, 150.0),
        "ris_aoa_theta": (90.0, 180.0),
        "ris_aoa_phi": (-90.0, -30.0),
        "ue_los_theta": (100.0, 110.0),
        "ue_los_phi": (-20.0, 80.0),
        "ue_nlos_theta": (50.0, 160.0),
        "ue_nlos_phi": (-70.0, 130.0),
    }


def square_factors(M: int) -> tuple[int, int]:
    """Most square (M_y, M_z) with M_y * M_z == M and M_y >= M_z."""
    z = int(math.isqrt(M))
    while M % z:
        z -= 1
    return M // z, z


@dataclass
class ScenarioConfig:
    carrier_freq: float = 5e9
    d_br: float = 200.0
    noise_dbm: float = -110.0
    alpha: float = 2.6
    p_tmax_dbm: float = 30.0
    rho0_db: float = -20.0
    K: int = 3
    weights: list[float] | None = None
    M_y: int = 4
    M_z: int = 4
    N_t: int = 4
    I: int = 16  # noqa: E741
    angles: dict = field(default_factory=default_angles)
    L_bounds: tuple[int, int] = (3, 8)
    Z_bounds: tuple[int, int] = (3, 8)
    ue_distance: tuple[float, float] = (20.0, 50.0)
    nlos_excess: float = 0.2

    n_seeds: int = 20
    base_seed: int = 0

    outer_tol: float = 1e-4
    max_outer: int = 50
    beam_rounds: int = 1  # MMSE rounds per outer iteration
    beam_tol: float = 1e-9
    rcg_tol: float = 1e-6
    rcg_max_iters: int = 100
    bisection_tol: float = 1e-8
    init_perturbation: float = 1e-2

    sweep_M: list[int] = field(default_factory=lambda: [9, 16, 25])
    sweep_Nt: list[int] = field(default_factory=lambda: [2, 4, 6])
    sweep_I: list[int] = field(default_factory=lambda: [4, 9, 16, 25])
    fit_I: list[int] = field(default_factory=lambda: [15, 25, 50])
    baseline_Nt: int | None = None

    power_instances: int = 200
    power_M: int = 1
    power_L: int = 2
    power_Z: int = 2
    position_grid_points: int = 512
    position_grid_step: float = 1.0 / 64.0  # in wavelengths

    def __post_init__(self):
        self.L_bounds = tuple(self.L_bounds)
        self.Z_bounds = tuple(self.Z_bounds)
        self.ue_distance = tuple(self.ue_distance)
        self.angles = {**default_angles(), **{k: tuple(v) for k, v in self.angles.items()}}
        if self.K <= 0:
            raise ValueError("K must be positive")
        if self.weights is None:
            self.weights = [1.0 / self.K] * self.K
        self.validate()

    def validate(self) -> None:
        if len(self.weights) != self.K:
            raise ValueError("need one weight per UE")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("UE weights must sum to 1")
        for name in ("carrier_freq", "d_br", "alpha", "K", "M_y", "M_z", "N_t", "I",
                     "max_outer", "beam_rounds"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 1 <= self.L_bounds[0] <= self.L_bounds[1]:
            raise ValueError("invalid L bounds")
        if not 1 <= self.Z_bounds[0] <= self.Z_bounds[1]:
            raise ValueError("invalid Z bounds")
        if not 0 < self.ue_distance[0] <= self.ue_distance[1]:
            raise ValueError("invalid UE distance range")
        for key, (lo, hi) in self.angles.items():
            if key.endswith("_los_aod") or key.endswith("_los_aoa"):
                continue
            if lo > hi:
                raise ValueError(f"invalid angle support {key}={lo, hi}")

    @property
    def M(self) -> int:
        return self.M_y * self.M_z

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def noise(self) -> float:
        return float(dbm_to_watt(self.noise_dbm))

    @property
    def p_tmax(self) -> float:
        return float(dbm_to_watt(self.p_tmax_dbm))

    @property
    def rho0(self) -> float:
        return float(db_to_linear(self.rho0_db))

    @property
    def eps(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def seeds(self) -> list[int]:
        return [self.base_seed + s for s in range(self.n_seeds)]

    def replace(self, **changes) -> "ScenarioConfig":
        if "M" in changes:
            changes["M_y"], changes["M_z"] = square_factors(changes.pop("M"))
        if "K" in changes and "weights" not in changes:
            changes["weights"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        if "M" in data:
            data["M_y"], data["M_z"] = square_factors(int(data.pop("M")))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib

            data = tomllib.loads(text)
        else:
            data = json.loads(text)
        return cls.from_dict(data)
