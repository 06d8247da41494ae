"""Shared domain types: species, particles, chamber geometry, background gas."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .constants import AMU, E_CHARGE, EV, K_BOLTZMANN, M_ELECTRON


class Kind(str, Enum):
    ELECTRON = "electron"
    ION = "ion"
    NEUTRAL = "neutral"
    SPUTTERED = "sputtered-atom"


class State(str, Enum):
    ACTIVE = "active"
    ABSORBED = "absorbed"
    THERMALIZED = "thermalized"
    ESCAPED = "escaped"


# Allowed transitions; absorbed/escaped are terminal, thermalized particles
# keep moving until they land somewhere.
_TRANSITIONS = {
    State.ACTIVE: {State.ABSORBED, State.THERMALIZED, State.ESCAPED},
    State.THERMALIZED: {State.ABSORBED, State.ESCAPED},
    State.ABSORBED: set(),
    State.ESCAPED: set(),
}


@dataclass(frozen=True)
class Species:
    """A particle species; mass in kg, charge in C, atomic_number for
    screened-Coulomb potentials (0 if irrelevant)."""

    name: str
    mass: float
    charge: float
    kind: Kind
    atomic_number: int = 0

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ValueError(f"species {self.name}: mass must be > 0, got {self.mass}")
        if self.kind == Kind.ELECTRON and not np.isclose(self.charge, -E_CHARGE, rtol=1e-9):
            raise ValueError(f"species {self.name}: electrons carry charge -e")
        if self.kind in (Kind.NEUTRAL, Kind.SPUTTERED) and self.charge != 0.0:
            raise ValueError(f"species {self.name}: neutral species carry zero charge")


def electron() -> Species:
    return Species("e-", M_ELECTRON, -E_CHARGE, Kind.ELECTRON)


def argon_ion() -> Species:
    return Species("Ar+", 39.948 * AMU, E_CHARGE, Kind.ION, atomic_number=18)


def argon() -> Species:
    return Species("Ar", 39.948 * AMU, 0.0, Kind.NEUTRAL, atomic_number=18)


@dataclass
class Particle:
    """One macro-particle.

    Position is cylindrical (r, z, theta) [m, m, rad]; velocity is Cartesian
    (vx, vy, vz) [m/s] with x aligned to theta=0.  weight is the number of
    physical particles represented.
    """

    species: Species
    r: float
    z: float
    theta: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    weight: float = 1.0
    state: State = State.ACTIVE

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=float)
        if self.r < 0.0:
            raise ValueError(f"particle radius must be >= 0, got {self.r}")
        if self.weight <= 0.0:
            raise ValueError(f"particle weight must be > 0, got {self.weight}")

    def transition(self, new_state: State) -> None:
        """Apply a monotone state transition; raises on any backward move."""
        if new_state == self.state:
            return
        if new_state not in _TRANSITIONS[self.state]:
            raise ValueError(f"illegal state transition {self.state.value} -> {new_state.value}")
        self.state = new_state

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))

    def kinetic_energy_ev(self) -> float:
        v2 = float(self.velocity @ self.velocity)
        return 0.5 * self.species.mass * v2 / EV

    def xyz(self) -> np.ndarray:
        return np.array([self.r * np.cos(self.theta), self.r * np.sin(self.theta), self.z])

    @classmethod
    def from_xyz(cls, species: Species, xyz, velocity, weight: float = 1.0, state: State = State.ACTIVE) -> "Particle":
        x, y, z = (float(c) for c in xyz)
        return cls(species, r=float(np.hypot(x, y)), z=z, theta=float(np.arctan2(y, x)),
                   velocity=np.asarray(velocity, dtype=float), weight=weight, state=state)


@dataclass(frozen=True)
class ChamberGeometry:
    """Cylindrical process chamber; target plane at target_z, substrate plane
    at substrate_z, grounded side wall at radius."""

    radius: float            # [m]
    height: float            # [m]
    target_z: float = 0.0    # [m]
    substrate_z: float | None = None   # [m]; defaults to height
    target_radius: float | None = None     # [m]; defaults to radius
    substrate_radius: float | None = None  # [m]; defaults to radius

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ValueError("chamber radius and height must be > 0")
        if self.substrate_z is None:
            object.__setattr__(self, "substrate_z", self.height)
        if self.target_radius is None:
            object.__setattr__(self, "target_radius", self.radius)
        if self.substrate_radius is None:
            object.__setattr__(self, "substrate_radius", self.radius)

    def contains(self, r: float, z: float) -> bool:
        return 0.0 <= r <= self.radius and 0.0 <= z <= self.height


class TemperatureField:
    """Uniform scalar temperature or a bilinearly interpolated r-z map [K]."""

    def __init__(self, value: float | None = None, *, r_nodes=None, z_nodes=None, values=None):
        if value is not None:
            if value <= 0:
                raise ValueError(f"temperature must be > 0 K, got {value}")
            self._scalar = float(value)
            self._grid = None
        else:
            vals = np.asarray(values, dtype=float)
            if np.any(vals <= 0):
                raise ValueError("temperature map entries must be > 0 K")
            self._scalar = None
            self._grid = (np.asarray(r_nodes, float), np.asarray(z_nodes, float), vals)

    @property
    def uniform(self) -> bool:
        return self._grid is None

    def at(self, r: float, z: float) -> float:
        if self._grid is None:
            return self._scalar
        rn, zn, vals = self._grid
        i = np.clip(np.searchsorted(rn, r) - 1, 0, len(rn) - 2)
        j = np.clip(np.searchsorted(zn, z) - 1, 0, len(zn) - 2)
        tr = np.clip((r - rn[i]) / (rn[i + 1] - rn[i]), 0.0, 1.0)
        tz = np.clip((z - zn[j]) / (zn[j + 1] - zn[j]), 0.0, 1.0)
        return float((1 - tr) * (1 - tz) * vals[i, j] + tr * (1 - tz) * vals[i + 1, j]
                     + (1 - tr) * tz * vals[i, j + 1] + tr * tz * vals[i + 1, j + 1])


@dataclass
class GasState:
    """Background neutral gas: pressure, temperature field, ideal-gas density."""

    species: Species
    pressure: float                    # [Pa]
    temperature: TemperatureField
    chamber: ChamberGeometry

    def __post_init__(self):
        if self.pressure <= 0:
            raise ValueError(f"gas pressure must be > 0 Pa, got {self.pressure}")

    @classmethod
    def uniform(cls, species: Species, pressure: float, temperature_K: float,
                chamber: ChamberGeometry) -> "GasState":
        return cls(species, pressure, TemperatureField(temperature_K), chamber)


def gas_density(gas: GasState, r: float, z: float) -> float:
    """Neutral number density n = p / (k_B T) at a point [m^-3]."""
    if not gas.chamber.contains(r, z):
        raise ValueError(f"point (r={r}, z={z}) lies outside the chamber")
    return gas.pressure / (K_BOLTZMANN * gas.temperature.at(r, z))
