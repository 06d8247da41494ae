"""Charged-particle kinetics: theta-scheme push with exact magnetic rotation,
null-collision MCC against the background gas, secondary emission,
drift-diffusion coefficient algebra, fluid continuity step, and the implicit
particle-field (Picard) cycle.

Scalar operations work on single Particle objects; *_batch variants operate
on packed numpy arrays and are the kernels behind the pipeline stages.  Both
share the same physics and the same counter-based random streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import EV, K_BOLTZMANN
from .core import GasState, Kind, Particle, Species, State, gas_density
from .fields import FieldMap, poisson_solve, theta_average
from .rng import RngStream
from .tables import CrossSectionTable


class PlasmaError(ValueError):
    pass


class ResolutionError(PlasmaError):
    """Time step too coarse for the gyration or collision frequency."""


def cyclotron_frequency(q: float, B: float, m: float) -> float:
    """Gyration frequency |q| B / m [rad/s]."""
    if m <= 0:
        raise PlasmaError(f"mass must be > 0, got {m}")
    return abs(q) * B / m


def _bracket(m: float, m_eff: float, nu: float, omega: float) -> float:
    return 1.0 + (m_eff * nu / (m * omega)) ** 2


def mobility_components(q: float, m: float, m_eff: float, nu: float, B: float):
    """(mu_par, mu_perp, mu_drift) [m^2/(V s)] of a magnetized species.

    mu_par = q/(m* nu); the perpendicular and drift components divide by the
    bracket 1 + (m* nu / (m omega))^2.  Signs follow the signed charge.
    At B = 0 the drift mobility is undefined (returned as nan) and mu_perp
    takes its B->0 limit, 0.
    """
    if nu <= 0 or m_eff <= 0:
        raise PlasmaError("mobility needs nu > 0 and m* > 0")
    mu_par = q / (m_eff * nu)
    if B == 0.0:
        return mu_par, 0.0, math.nan
    omega = cyclotron_frequency(q, B, m)
    br = _bracket(m, m_eff, nu, omega)
    return mu_par, mu_par / br, 1.0 / (B * br)


def diffusion_components(q: float, m: float, m_eff: float, nu: float, B: float, T: float):
    """(D_par, D_perp, D_drift) [m^2/s]; D_par/mu_par = k_B T / q exactly."""
    if T <= 0:
        raise PlasmaError("diffusion needs T > 0")
    if nu <= 0 or m_eff <= 0:
        raise PlasmaError("diffusion needs nu > 0 and m* > 0")
    d_par = K_BOLTZMANN * T / (m_eff * nu)
    if B == 0.0:
        return d_par, 0.0, math.nan
    omega = cyclotron_frequency(q, B, m)
    br = _bracket(m, m_eff, nu, omega)
    return d_par, d_par / br, K_BOLTZMANN * T / (q * B * br)


@dataclass(frozen=True)
class TransportCoeffs:
    """Drift-diffusion coefficient set for one species in a magnetic field."""

    mu_par: float
    mu_perp: float
    mu_drift: float
    d_par: float
    d_perp: float
    d_drift: float
    nu: float          # collision rate [1/s]
    m_eff: float       # effective mass [kg]
    omega: float       # cyclotron frequency [rad/s]
    temperature: float  # [K]

    @classmethod
    def build(cls, species: Species, nu: float, B: float, temperature: float,
              m_eff: float | None = None) -> "TransportCoeffs":
        m_eff = species.mass if m_eff is None else m_eff
        mu = mobility_components(species.charge, species.mass, m_eff, nu, B)
        d = diffusion_components(species.charge, species.mass, m_eff, nu, B, temperature)
        return cls(*mu, *d, nu=nu, m_eff=m_eff,
                   omega=cyclotron_frequency(species.charge, B, species.mass),
                   temperature=temperature)


def drift_diffusion_flux(n: float, grad_n, E, h, coeffs: TransportCoeffs, sign: int):
    """Particle flux J [m^-2 s^-1] from drift and diffusion terms.

    h is the magnetic-field unit vector; E and grad n are decomposed into
    components parallel/perpendicular to h.  sign is the charge polarity of
    the species (the leading sign of the drift bracket).
    """
    E = np.asarray(E, float)
    gn = np.asarray(grad_n, float)
    h = np.asarray(h, float)
    if abs(np.linalg.norm(h) - 1.0) > 1e-9:
        raise PlasmaError("h must be a unit vector")
    if sign not in (-1, 1):
        raise PlasmaError("sign must be +1 or -1 (charge polarity)")
    e_par = (E @ h) * h
    e_perp = E - e_par
    gn_par = (gn @ h) * h
    gn_perp = gn - gn_par
    drift = sign * n * (coeffs.mu_par * e_par + coeffs.mu_perp * e_perp
                        + coeffs.mu_drift * np.cross(E, h))
    diff = (- coeffs.d_par * gn_par - coeffs.d_perp * gn_perp
            + coeffs.d_drift * np.cross(h, gn))
    return drift + diff


# ---------------------------------------------------------------------------
# particle push

def _rotate_about(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of v about the unit vector axis."""
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * (axis @ v) * (1.0 - c)


def push_particle(p: Particle, E, B, dt: float, theta: float = 0.5,
                  *, omega_dt_max: float = 0.3) -> Particle:
    """Advance one particle by dt in uniform-over-the-step fields E, B [SI].

    Velocity update: half electric kick, exact rotation by the gyration angle
    omega dt about B, half kick (energy-exact in pure magnetic fields).
    Position update uses the theta-weighted velocity (1-theta) v_n + theta
    v_n+1; theta = 1/2 recovers the time-centered leapfrog limit.
    """
    E = np.asarray(E, float)
    B = np.asarray(B, float)
    q_m = p.species.charge / p.species.mass
    b_mag = float(np.linalg.norm(B))
    if b_mag > 0.0:
        omega_dt = abs(q_m) * b_mag * dt
        if omega_dt >= omega_dt_max:
            raise ResolutionError(
                f"dt={dt:g} under-resolves gyration: omega*dt={omega_dt:.3f} "
                f">= {omega_dt_max}")
    half = 0.5 * dt * q_m * E
    v_minus = p.velocity + half
    if b_mag > 0.0:
        v_plus = _rotate_about(v_minus, B / b_mag, -q_m * b_mag * dt)
    else:
        v_plus = v_minus
    v_new = v_plus + half
    x_new = p.xyz() + dt * theta_average(p.velocity, v_new, theta)
    p.velocity = v_new
    p.r = float(np.hypot(x_new[0], x_new[1]))
    p.theta = float(np.arctan2(x_new[1], x_new[0]))
    p.z = float(x_new[2])
    return p


def push_batch(pos: np.ndarray, vel: np.ndarray, E: np.ndarray, B: np.ndarray,
               q_m: float, dt: float, theta: float = 0.5) -> None:
    """Vectorized push of N particles in place.

    pos, vel: (N, 3) Cartesian arrays; E, B: (N, 3) fields at the particles.
    Same scheme as push_particle (half kick, exact rotation, half kick,
    theta-weighted position update).
    """
    half = (0.5 * dt * q_m) * E
    vm = vel + half
    bmag = np.linalg.norm(B, axis=1)
    live = bmag > 0.0
    vp = vm.copy()
    if np.any(live):
        bh = B[live] / bmag[live, None]
        ang = -q_m * bmag[live] * dt
        c = np.cos(ang)[:, None]
        s = np.sin(ang)[:, None]
        v = vm[live]
        vp[live] = v * c + np.cross(bh, v) * s + bh * (np.sum(bh * v, axis=1)[:, None]) * (1.0 - c)
    v_new = vp + half
    pos += dt * ((1.0 - theta) * vel + theta * v_new)
    vel[:] = v_new


# ---------------------------------------------------------------------------
# collisions

def secondary_emission(j_i: float, gamma: float) -> float:
    """Secondary-electron current density j_e = -gamma j_i [A/m^2]."""
    if gamma < 0:
        raise PlasmaError(f"gamma must be >= 0, got {gamma}")
    return -gamma * j_i


def sample_secondary_electrons(n_absorbed: int, gamma: float, rng: RngStream) -> int:
    """Number of secondaries for n_absorbed cathode ions: floor(gamma) each
    plus one more with probability frac(gamma)."""
    if gamma < 0:
        raise PlasmaError(f"gamma must be >= 0, got {gamma}")
    base = int(math.floor(gamma))
    frac = gamma - base
    extra = int(np.count_nonzero(rng.uniform(size=n_absorbed) < frac)) if frac > 0 else 0
    return base * n_absorbed + extra


def elastic_loss_fraction(m: float, M: float, alpha: float) -> float:
    """Fractional kinetic-energy loss (4m/M) sin^2(alpha/2) of a light
    projectile elastically deflected by alpha off a heavy target."""
    if m > M:
        raise PlasmaError("light-projectile formula needs m <= M")
    return 4.0 * m / M * math.sin(0.5 * alpha) ** 2


@dataclass(frozen=True)
class MccProcessSet:
    """Cross-section tables for one projectile species against the gas,
    plus the product species spawned by ionization."""

    projectile: Species
    elastic: CrossSectionTable | None = None
    ionization: CrossSectionTable | None = None
    excitation: CrossSectionTable | None = None
    charge_exchange: CrossSectionTable | None = None
    electron_species: Species | None = None
    ion_species: Species | None = None
    # optional small-angle-peaked elastic model (screened Coulomb); None = isotropic
    screened_elastic_escale_eV: float | None = None

    def __post_init__(self):
        if self.ionization is not None and (self.electron_species is None or self.ion_species is None):
            raise PlasmaError("ionization table requires electron and ion product species")
        if all(t is None for t in (self.elastic, self.ionization, self.excitation, self.charge_exchange)):
            raise PlasmaError(f"no cross-section tables supplied for {self.projectile.name}")

    def active(self) -> list[tuple[str, CrossSectionTable]]:
        pairs = [("elastic", self.elastic), ("ionization", self.ionization),
                 ("excitation", self.excitation), ("charge-exchange", self.charge_exchange)]
        return [(k, t) for k, t in pairs if t is not None]


@dataclass
class CollisionEvent:
    """Outcome of one MCC step for one particle."""

    kind: str                       # elastic | ionization | excitation | charge-exchange | null
    energy_transfer_ev: float = 0.0
    angle: float = 0.0              # deflection [rad]
    spawned: list = field(default_factory=list)


def _isotropic_direction(rng: RngStream) -> np.ndarray:
    cos_t = 1.0 - 2.0 * rng.uniform()
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * math.pi * rng.uniform()
    return np.array([sin_t * math.cos(phi), sin_t * math.sin(phi), cos_t])


def _screened_cos_alpha(energy_ev: float, escale_ev: float, u: float) -> float:
    # screened-Coulomb sampling, peaked at small angles for fast projectiles
    eps = energy_ev / escale_ev
    return 1.0 - 2.0 * u / (1.0 + 8.0 * eps * (1.0 - u))


def _rotate_relative(v_hat: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Unit vector at polar angle alpha, azimuth beta, relative to v_hat."""
    # build an orthonormal frame around v_hat
    a = np.array([1.0, 0.0, 0.0]) if abs(v_hat[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(v_hat, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(v_hat, e1)
    return (math.cos(alpha) * v_hat
            + math.sin(alpha) * (math.cos(beta) * e1 + math.sin(beta) * e2))


def _maxwellian_velocity(gas: GasState, r: float, z: float, rng: RngStream) -> np.ndarray:
    vt = math.sqrt(K_BOLTZMANN * gas.temperature.at(r, z) / gas.species.mass)
    return vt * np.asarray(rng.normal(size=3))


def mcc_collide(p: Particle, gas: GasState, procs: MccProcessSet, dt: float,
                rng: RngStream, *, nu_dt_max: float = 0.1,
                maxwellian_targets: bool = False) -> CollisionEvent:
    """One null-collision MCC step: collide with probability
    1 - exp(-nu_total(K) dt), choose the process proportionally to the partial
    cross sections at K, and apply its energy/direction rules in place.

    Neutral targets are static by default.  Returns the event, including any
    spawned electron-ion pair (ionization spawns exactly one).
    """
    if p.state != State.ACTIVE:
        raise PlasmaError("mcc_collide needs an active particle")
    if p.species.name != procs.projectile.name:
        raise PlasmaError(f"tables are for {procs.projectile.name}, particle is {p.species.name}")
    K = p.kinetic_energy_ev()
    speed = p.speed
    n = gas_density(gas, p.r, p.z)
    channels = procs.active()
    sigmas = np.array([t.sigma(K) for _, t in channels])
    nu = n * sigmas * speed
    nu_tot = float(nu.sum())
    if nu_tot * dt > nu_dt_max:
        raise ResolutionError(f"nu*dt = {nu_tot * dt:.3f} exceeds {nu_dt_max}; reduce dt")
    if nu_tot <= 0.0 or rng.uniform() >= 1.0 - math.exp(-nu_tot * dt):
        return CollisionEvent("null")
    pick = rng.uniform() * nu_tot
    idx = int(np.searchsorted(np.cumsum(nu), pick, side="right"))
    idx = min(idx, len(channels) - 1)
    kind, table = channels[idx]
    return _apply_channel(p, gas, procs, kind, table, K, rng, maxwellian_targets)


def _set_energy_direction(p: Particle, energy_ev: float, direction: np.ndarray) -> None:
    speed = math.sqrt(max(0.0, 2.0 * energy_ev * EV / p.species.mass))
    p.velocity = speed * direction


def _apply_channel(p: Particle, gas: GasState, procs: MccProcessSet, kind: str,
                   table: CrossSectionTable, K: float, rng: RngStream,
                   maxwellian_targets: bool) -> CollisionEvent:
    v_hat = p.velocity / p.speed
    if kind == "elastic":
        if p.species.kind == Kind.ELECTRON:
            if procs.screened_elastic_escale_eV:
                cos_a = _screened_cos_alpha(K, procs.screened_elastic_escale_eV, rng.uniform())
                new_dir = _rotate_relative(v_hat, math.acos(np.clip(cos_a, -1, 1)),
                                           2.0 * math.pi * rng.uniform())
            else:
                new_dir = _isotropic_direction(rng)
            alpha = math.acos(float(np.clip(v_hat @ new_dir, -1.0, 1.0)))
            loss = K * elastic_loss_fraction(p.species.mass, gas.species.mass, alpha)
            _set_energy_direction(p, K - loss, new_dir)
            return CollisionEvent("elastic", energy_transfer_ev=loss, angle=alpha)
        # heavy projectile: exact two-body kinematics, isotropic in the CM frame
        v2 = _maxwellian_velocity(gas, p.r, p.z, rng) if maxwellian_targets else np.zeros(3)
        v1p, _v2p, alpha = elastic_two_body(p.velocity, p.species.mass, v2, gas.species.mass,
                                            _isotropic_direction(rng))
        loss = K - 0.5 * p.species.mass * float(v1p @ v1p) / EV
        p.velocity = v1p
        return CollisionEvent("elastic", energy_transfer_ev=loss, angle=alpha)
    if kind == "excitation":
        new_dir = _isotropic_direction(rng)
        _set_energy_direction(p, K - table.threshold, new_dir)
        return CollisionEvent("excitation", energy_transfer_ev=table.threshold,
                              angle=math.acos(float(np.clip(v_hat @ new_dir, -1, 1))))
    if kind == "ionization":
        avail = K - table.threshold
        e_sec = rng.uniform() * 0.5 * avail     # secondary is the slower electron
        e_prim = avail - e_sec
        prim_dir = _isotropic_direction(rng)
        sec_dir = _isotropic_direction(rng)
        _set_energy_direction(p, e_prim, prim_dir)
        sec = Particle(procs.electron_species, r=p.r, z=p.z, theta=p.theta,
                       velocity=np.zeros(3), weight=p.weight)
        _set_energy_direction(sec, e_sec, sec_dir)
        ion_v = _maxwellian_velocity(gas, p.r, p.z, rng) if maxwellian_targets else np.zeros(3)
        ion = Particle(procs.ion_species, r=p.r, z=p.z, theta=p.theta,
                       velocity=ion_v, weight=p.weight)
        return CollisionEvent("ionization", energy_transfer_ev=table.threshold + e_sec,
                              angle=math.acos(float(np.clip(v_hat @ prim_dir, -1, 1))),
                              spawned=[sec, ion])
    if kind == "charge-exchange":
        v_new = _maxwellian_velocity(gas, p.r, p.z, rng) if maxwellian_targets else np.zeros(3)
        K_after = 0.5 * p.species.mass * float(v_new @ v_new) / EV
        p.velocity = v_new
        return CollisionEvent("charge-exchange", energy_transfer_ev=K - K_after)
    raise PlasmaError(f"unknown channel {kind}")


def elastic_two_body(v1: np.ndarray, m1: float, v2: np.ndarray, m2: float,
                     g_hat_new: np.ndarray):
    """Exact elastic two-body collision: rotate the relative velocity onto
    g_hat_new, keep |g| and the centre-of-mass velocity.

    Returns (v1', v2', deflection angle).  Conserves momentum and kinetic
    energy to roundoff.
    """
    mtot = m1 + m2
    v_cm = (m1 * v1 + m2 * v2) / mtot
    g = v1 - v2
    g_mag = float(np.linalg.norm(g))
    g_new = g_mag * g_hat_new
    v1p = v_cm + (m2 / mtot) * g_new
    v2p = v_cm - (m1 / mtot) * g_new
    cos_a = float(np.clip(g @ g_hat_new / g_mag, -1.0, 1.0)) if g_mag > 0 else 1.0
    return v1p, v2p, math.acos(cos_a)


# ---------------------------------------------------------------------------
# fluid pieces

def cell_volumes(r: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Cylindrical node-centered cell volumes for a structured r-z grid."""
    re = np.concatenate([[r[0]], 0.5 * (r[1:] + r[:-1]), [r[-1]]])
    ze = np.concatenate([[z[0]], 0.5 * (z[1:] + z[:-1]), [z[-1]]])
    ring = np.pi * (re[1:] ** 2 - re[:-1] ** 2)
    return ring[:, None] * np.diff(ze)[None, :]


def continuity_step(n: np.ndarray, Jr: np.ndarray, Jz: np.ndarray, R: np.ndarray,
                    dt: float, r: np.ndarray, z: np.ndarray,
                    *, absorbing_boundaries: bool = False):
    """One explicit step n' = n + dt (R - div J) on the axisymmetric grid.

    J components are node-centered and averaged to faces; the finite-volume
    divergence telescopes, so with zero boundary flux the total particle
    count is conserved to roundoff.  Negative results are clamped to zero and
    counted.  absorbing_boundaries zeroes the boundary nodes afterwards
    (the wall/cathode condition for charged species).

    Returns (n_new, clamped_count).
    """
    n = np.asarray(n, float)
    if not (n.shape == Jr.shape == Jz.shape == R.shape):
        raise PlasmaError("continuity fields must be co-located (same shape)")
    re = np.concatenate([[r[0]], 0.5 * (r[1:] + r[:-1]), [r[-1]]])
    ze = np.concatenate([[z[0]], 0.5 * (z[1:] + z[:-1]), [z[-1]]])
    vol = cell_volumes(r, z)

    # radial face fluxes (area 2 pi r_face dz per unit dz handled via edges)
    Jr_face = np.zeros((len(r) + 1, len(z)))
    Jr_face[1:-1, :] = 0.5 * (Jr[1:, :] + Jr[:-1, :])
    Jr_face[0, :] = Jr[0, :]
    Jr_face[-1, :] = Jr[-1, :]
    area_r = 2.0 * np.pi * re[:, None] * np.diff(ze)[None, :]

    Jz_face = np.zeros((len(r), len(z) + 1))
    Jz_face[:, 1:-1] = 0.5 * (Jz[:, 1:] + Jz[:, :-1])
    Jz_face[:, 0] = Jz[:, 0]
    Jz_face[:, -1] = Jz[:, -1]
    ring = np.pi * (re[1:] ** 2 - re[:-1] ** 2)

    div = ((area_r[1:, :] * Jr_face[1:, :] - area_r[:-1, :] * Jr_face[:-1, :])
           + ring[:, None] * (Jz_face[:, 1:] - Jz_face[:, :-1])) / vol
    n_new = n + dt * (np.asarray(R, float) - div)
    clamped = int(np.count_nonzero(n_new < 0.0))
    np.clip(n_new, 0.0, None, out=n_new)
    if absorbing_boundaries:
        # cathode, far wall, side wall; the axis is not a material surface
        n_new[-1, :] = 0.0
        n_new[:, 0] = 0.0
        n_new[:, -1] = 0.0
    return n_new, clamped


# ---------------------------------------------------------------------------
# implicit particle-field cycle

def deposit_density(particles, r: np.ndarray, z: np.ndarray, kind: Kind) -> np.ndarray:
    """Bilinear (cloud-in-cell) number density of one species kind [m^-3]."""
    vol = cell_volumes(r, z)
    out = np.zeros((r.size, z.size))
    for p in particles:
        if p.species.kind != kind or p.state != State.ACTIVE:
            continue
        _cic_add(out, r, z, p.r, p.z, p.weight)
    return out / vol


def _cic_add(grid: np.ndarray, r: np.ndarray, z: np.ndarray, pr: float, pz: float, w: float):
    i = int(np.clip(np.searchsorted(r, pr) - 1, 0, r.size - 2))
    j = int(np.clip(np.searchsorted(z, pz) - 1, 0, z.size - 2))
    tr = np.clip((pr - r[i]) / (r[i + 1] - r[i]), 0.0, 1.0)
    tz = np.clip((pz - z[j]) / (z[j + 1] - z[j]), 0.0, 1.0)
    grid[i, j] += w * (1 - tr) * (1 - tz)
    grid[i + 1, j] += w * tr * (1 - tz)
    grid[i, j + 1] += w * (1 - tr) * tz
    grid[i + 1, j + 1] += w * tr * tz


def implicit_pic_cycle(particles: list, grid: FieldMap, dt: float, theta: float,
                       *, v_appl: float = 0.0, tol: float = 1.0e-6,
                       max_iter: int = 200, damping: float = 0.5,
                       poisson_tol: float = 1.0e-8, poisson_max_iter: int = 100000,
                       omega: float = 1.9, omega_dt_max: float = 0.3):
    """One implicit step: Picard iteration of deposit -> Poisson -> push with
    the theta-averaged field, until the field update stalls below tol.

    Returns (pushed particles, updated FieldMap, picard iterations).
    Raises ConvergenceError with the residual history if the cap is hit.
    """
    from .fields import ConvergenceError

    if not 0.5 <= theta <= 1.0:
        raise PlasmaError(f"theta={theta} outside [1/2, 1]")
    r, z = grid.r, grid.z
    start = [(p.xyz(), p.velocity.copy()) for p in particles]
    er0, ez0 = grid.Er.copy(), grid.Ez.copy()
    er_guess, ez_guess = er0.copy(), ez0.copy()
    history = []

    def push_all(er_field, ez_field):
        for p, (x0, v0) in zip(particles, start):
            p.r = float(np.hypot(x0[0], x0[1]))
            p.theta = float(np.arctan2(x0[1], x0[0]))
            p.z = float(x0[2])
            p.velocity = v0.copy()
            er = _bilinear_of(r, z, er_field, p.r, p.z)
            ez = _bilinear_of(r, z, ez_field, p.r, p.z)
            br = grid.interp("Br", p.r, p.z)
            bz = grid.interp("Bz", p.r, p.z)
            ct, st = math.cos(p.theta), math.sin(p.theta)
            E = np.array([er * ct, er * st, ez])
            B = np.array([br * ct, br * st, bz])
            push_particle(p, E, B, dt, theta, omega_dt_max=omega_dt_max)

    phi = grid.phi
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        er_avg = theta_average(er0, er_guess, theta)
        ez_avg = theta_average(ez0, ez_guess, theta)
        push_all(er_avg, ez_avg)
        n_i = deposit_density(particles, r, z, Kind.ION)
        n_e = deposit_density(particles, r, z, Kind.ELECTRON)
        phi, _ = poisson_solve(grid, n_i, n_e, v_appl, tol=poisson_tol,
                               max_iter=poisson_max_iter, omega=omega)
        er_new = -np.gradient(phi, r, axis=0, edge_order=2)
        ez_new = -np.gradient(phi, z, axis=1, edge_order=2)
        scale = max(float(np.max(np.abs(er_new))), float(np.max(np.abs(ez_new))), 1e-300)
        change = max(float(np.max(np.abs(er_new - er_guess))),
                     float(np.max(np.abs(ez_new - ez_guess)))) / scale
        history.append(change)
        if change < tol:
            er_guess, ez_guess = er_new, ez_new
            break
        er_guess += damping * (er_new - er_guess)
        ez_guess += damping * (ez_new - ez_guess)
    else:
        raise ConvergenceError(f"implicit cycle: field change {history[-1]:.3e} above "
                               f"tol {tol:g} after {max_iter} iterations", history)

    grid.phi = phi
    grid.Er, grid.Ez = er_guess, ez_guess
    return particles, grid, iterations


def _bilinear_of(xn, yn, f, x, y) -> float:
    i = int(np.clip(np.searchsorted(xn, x) - 1, 0, xn.size - 2))
    j = int(np.clip(np.searchsorted(yn, y) - 1, 0, yn.size - 2))
    tx = np.clip((x - xn[i]) / (xn[i + 1] - xn[i]), 0.0, 1.0)
    ty = np.clip((y - yn[j]) / (yn[j + 1] - yn[j]), 0.0, 1.0)
    return float((1 - tx) * (1 - ty) * f[i, j] + tx * (1 - ty) * f[i + 1, j]
                 + (1 - tx) * ty * f[i, j + 1] + tx * ty * f[i + 1, j + 1])
