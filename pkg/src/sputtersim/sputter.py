"""Target emission: sputtering-yield lookup and samplers for the energy and
direction of ejected atoms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import Particle, Species, State
from .rng import RngStream
from .tables import Curve


class SputterError(ValueError):
    pass


def mass_transfer_factor(m_ion: float, m_atom: float) -> float:
    """Maximum fractional kinetic-energy transfer 4 M1 M2 / (M1 + M2)^2."""
    if m_ion <= 0 or m_atom <= 0:
        raise SputterError("masses must be > 0")
    return 4.0 * m_ion * m_atom / (m_ion + m_atom) ** 2


@dataclass(frozen=True)
class EmissionModel:
    """Target-material emission model.

    binding_energy is the surface binding energy E_b [eV]; yield_curve maps
    normal-incidence ion energy [eV] to expected sputtered atoms per ion;
    angle_curve optionally multiplies the yield as a function of incidence
    angle [rad].  kappa is the maximum energy-transfer fraction for the
    configured ion/target pair.  norm_energy/norm_angle carry the density
    normalization constants (the spectral shapes are defined up to C and D).
    """

    target: Species
    ion: Species
    binding_energy: float          # E_b [eV]
    yield_curve: Curve
    angle_curve: Curve | None = None
    norm_energy: float = 1.0       # C of the energy spectrum
    norm_angle: float = 1.0        # D of the angular spectrum

    def __post_init__(self):
        if self.binding_energy <= 0:
            raise SputterError(f"binding energy must be > 0, got {self.binding_energy}")
        if np.any(self.yield_curve.y < 0):
            raise SputterError("yields must be >= 0")

    @property
    def kappa(self) -> float:
        return mass_transfer_factor(self.ion.mass, self.target.mass)


def yield_lookup(model: EmissionModel, ion_energy_ev: float, incidence_angle: float = 0.0) -> float:
    """Expected sputtered atoms per ion: Y(E) times the angular multiplier."""
    y = float(model.yield_curve(ion_energy_ev))
    if model.angle_curve is not None:
        y *= float(model.angle_curve(math.degrees(incidence_angle)))
    return y


def thompson_density(model: EmissionModel, energy_ev) -> np.ndarray | float:
    """Relative emission-energy density C E/(E + E_b)^2 (peak at E = E_b)."""
    e = np.asarray(energy_ev, float)
    out = model.norm_energy * e / (e + model.binding_energy) ** 2
    out = np.where(e < 0, 0.0, out)
    return out if out.ndim else float(out)


def sample_emission_energy(model: EmissionModel, e_bombard_ev: float, xi: float) -> float:
    """Ejected-atom energy from the transfer-limited spectrum [eV].

    E0 = sqrt(xi) E_b / ((kappa E_bom + E_b)/(kappa E_bom) - sqrt(xi));
    xi -> 1 yields the maximum transferable energy kappa E_bom.  The implied
    density is proportional to E E_b/(E + E_b)^3 with mode E_b/2.
    """
    if e_bombard_ev <= 0:
        raise SputterError(f"bombardment energy must be > 0, got {e_bombard_ev}")
    root = math.sqrt(xi)
    ke = model.kappa * e_bombard_ev
    return root * model.binding_energy / ((ke + model.binding_energy) / ke - root)


def transfer_limited_cdf(model: EmissionModel, e_bombard_ev: float, energy_ev) -> np.ndarray:
    """CDF of the transfer-limited spectrum (the sampler's inverse)."""
    ke = model.kappa * e_bombard_ev
    a = (ke + model.binding_energy) / ke
    e = np.asarray(energy_ev, float)
    u = a * e / (e + model.binding_energy)
    return np.clip(u * u, 0.0, 1.0)


def sample_thompson_energy(model: EmissionModel, e_max_ev: float, xi: float) -> float:
    """Inverse-CDF sample of the C E/(E+E_b)^2 spectrum truncated at e_max."""
    b = model.binding_energy

    def cdf_un(e):  # unnormalized integral of E/(E+b)^2
        return math.log((e + b) / b) + b / (e + b) - 1.0

    total = cdf_un(e_max_ev)
    target = xi * total
    return brentq(lambda e: cdf_un(e) - target, 0.0, e_max_ev, xtol=1e-12 * max(b, 1.0))


def sample_emission_angles(rng: RngStream) -> tuple[float, float]:
    """(zenith, azimuth) with zenith = arcsin(xi): the marginal zenith density
    is proportional to cos(theta); azimuth uniform on [0, 2 pi)."""
    return math.asin(rng.uniform()), 2.0 * math.pi * rng.uniform()


def sample_emission_angles_lambertian(rng: RngStream) -> tuple[float, float]:
    """(zenith, azimuth) of a Lambertian (cosine-per-solid-angle) emitter:
    zenith = arcsin(sqrt(xi)).  This is the variant that reproduces the
    line-of-sight cos^4 thickness profile on a parallel plane."""
    return math.asin(math.sqrt(rng.uniform())), 2.0 * math.pi * rng.uniform()


def direction_from_angles(zenith: float, azimuth: float, normal=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Unit emission direction at (zenith, azimuth) off the outward normal."""
    n = np.asarray(normal, float)
    n = n / np.linalg.norm(n)
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    s = math.sin(zenith)
    return math.cos(zenith) * n + s * (math.cos(azimuth) * e1 + math.sin(azimuth) * e2)


def spawn_count(y: float, rng: RngStream) -> int:
    """Probabilistic rounding of a fractional yield: floor(Y), plus one with
    probability frac(Y); preserves Y in expectation."""
    base = int(math.floor(y))
    frac = y - base
    return base + (1 if frac > 0.0 and rng.uniform() < frac else 0)


def emit_atoms(model: EmissionModel, impacts, rng: RngStream, *,
               weight: float = 1.0, angular_model: str = "cosine-marginal",
               energy_sampler: str = "transfer-limited",
               normal=(0.0, 0.0, 1.0)) -> list[Particle]:
    """Sputtered atoms for a list of ion impacts (energy_eV, angle_rad, r, theta).

    Each impact spawns a probabilistically rounded Y(E, angle) count of
    neutral target atoms at the impact position, with energies from the
    configured spectrum and directions off the outward target normal.
    """
    out = []
    sample_angles = (sample_emission_angles if angular_model == "cosine-marginal"
                     else sample_emission_angles_lambertian)
    for energy_ev, angle, r, theta in impacts:
        y = yield_lookup(model, energy_ev, angle)
        for _ in range(spawn_count(y, rng)):
            if energy_sampler == "transfer-limited":
                e0 = sample_emission_energy(model, energy_ev, rng.uniform())
            else:
                e0 = sample_thompson_energy(model, model.kappa * energy_ev, rng.uniform())
            zen, azi = sample_angles(rng)
            d = direction_from_angles(zen, azi, normal)
            speed = math.sqrt(2.0 * e0 * 1.602176634e-19 / model.target.mass)
            out.append(Particle(model.target, r=r, z=0.0, theta=theta,
                                velocity=speed * d, weight=weight, state=State.ACTIVE))
    return out
