"""Run configuration: schema, loading, validation, canonical serialization.

The file format is YAML (a versioned, documented key-value schema).  All
user-facing energies are eV and are converted to SI at the consuming site;
all lengths, times and fields are SI throughout.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

SCHEMA_VERSION = 1
DATA_DIR = Path(__file__).parent / "data"


class ConfigError(ValueError):
    """Raised for malformed or invalid configuration, naming the field."""


def _make(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class ChamberConfig:
    radius_m: float = 0.05
    height_m: float = 0.05
    target_z_m: float = 0.0
    target_radius_m: float = 0.025
    substrate_z_m: float = 0.05
    substrate_radius_m: float = 0.025


@dataclass(frozen=True)
class LoopConfig:
    radius_m: float
    z_m: float
    current_A: float


@dataclass(frozen=True)
class MagnetConfig:
    loops: list = field(default_factory=lambda: [
        LoopConfig(radius_m=0.02, z_m=-0.01, current_A=1000.0),
        LoopConfig(radius_m=0.005, z_m=-0.01, current_A=-300.0),
    ])
    field_map: str | None = None   # CSV path overriding the loop model


@dataclass(frozen=True)
class SheathConfig:
    thickness_m: float | None = None   # no default: must be supplied for field evaluation
    presheath_drop_V: float = 0.0


@dataclass(frozen=True)
class GasConfig:
    name: str = "Ar"
    pressure_Pa: float = 1.0
    temperature_K: float = 300.0
    mass_amu: float = 39.948
    atomic_number: int = 18


@dataclass(frozen=True)
class IonConfig:
    name: str = "Ar+"
    mass_amu: float = 39.948
    charge_e: int = 1
    atomic_number: int = 18


@dataclass(frozen=True)
class GridConfig:
    nr: int = 65
    nz: int = 65
    # geometric stretching of z spacings away from the cathode; 1.0 = uniform
    stretch_z: float = 1.0


@dataclass(frozen=True)
class PoissonConfig:
    tol: float = 1.0e-8
    max_iter: int = 100000
    omega: float = 1.9


@dataclass(frozen=True)
class PicardConfig:
    tol: float = 1.0e-6
    max_iter: int = 200
    damping: float = 0.5


@dataclass(frozen=True)
class CrossSectionPaths:
    electron_elastic: str = str(DATA_DIR / "e_ar_elastic.csv")
    electron_ionization: str = str(DATA_DIR / "e_ar_ionization.csv")
    electron_excitation: str = str(DATA_DIR / "e_ar_excitation.csv")
    ion_elastic: str = str(DATA_DIR / "arion_ar_elastic.csv")
    ion_charge_exchange: str = str(DATA_DIR / "arion_ar_charge_exchange.csv")


@dataclass(frozen=True)
class PlasmaConfig:
    backend: str = "kinetic"            # kinetic | fluid
    n_macro: int = 10000
    macro_weight: float | None = None   # physical particles per macro-particle; no default
    gamma_secondary: float | None = None  # secondary-emission yield; no default
    dt_electron_s: float = 5.0e-11
    dt_ion_s: float = 2.0e-9
    n_steps: int = 1500
    theta: float = 0.5
    seed_energy_eV: float = 2.0
    ion_magnetized: bool = False
    turbulent_E_V_per_m: float = 0.0    # optional random azimuthal kick, off by default
    effective_mass_ratio: float = 1.0   # m*/m used by the fluid coefficients
    omega_dt_max: float = 0.3           # push resolution guard
    nu_dt_max: float = 0.1              # MCC resolution guard
    self_consistent: bool = False       # couple push and Poisson each macro-step
    cross_sections: CrossSectionPaths = field(default_factory=CrossSectionPaths)
    grid: GridConfig = field(default_factory=GridConfig)
    poisson: PoissonConfig = field(default_factory=PoissonConfig)
    picard: PicardConfig = field(default_factory=PicardConfig)


@dataclass(frozen=True)
class TargetConfig:
    material: str = "Cu"
    mass_amu: float = 63.546
    atomic_number: int = 29
    binding_energy_eV: float = 3.49
    atomic_volume_m3: float = 1.18e-29


@dataclass(frozen=True)
class SputterConfig:
    target: TargetConfig = field(default_factory=TargetConfig)
    yield_table: str = str(DATA_DIR / "ar_on_cu_yield.csv")
    angle_table: str | None = None
    energy_sampler: str = "transfer-limited"   # transfer-limited | thompson
    angular_model: str = "cosine-marginal"     # cosine-marginal | lambertian


@dataclass(frozen=True)
class PotentialConfig:
    kind: str = "universal-modified"
    # hard-sphere
    radius_m: float | None = None
    well_eV: float = 0.0
    # born-mayer
    prefactor_eV: float | None = None
    decay_per_m: float | None = None
    r_inner_m: float | None = None
    r_outer_m: float | None = None
    # lennard-jones / universal-modified
    epsilon_eV: float | None = 0.02
    sigma_m: float | None = 2.9e-10
    # firsov
    screen_table: str | None = None
    screen_length_m: float | None = None


@dataclass(frozen=True)
class TransportConfig:
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    n_atoms: int = 100000
    thermalization_sigma: float = 1.0
    thermalized_mode: str = "continue-mc"   # continue-mc | diffuse
    gas_targets: str = "maxwellian"         # maxwellian | static
    rho_cut_fraction: float = 1.0e-3        # |V(rho_max)| < fraction * E_CM
    rho_max_cap_factor: float = 3.0         # cap on rho_max in potential length scales
    deflection_energies: int = 64           # deflection-table resolution
    deflection_impacts: int = 128
    diffusion_m2_s: float | None = None     # override for the thermalized-walk D
    diffusion_dt_s: float = 5.0e-6
    max_events: int = 20000                 # per-atom safety cap


@dataclass(frozen=True)
class DepositionConfig:
    substrate_nr: int = 32
    substrate_nphi: int = 1
    wall_nz: int = 32
    wall_nphi: int = 1
    target_nr: int = 16
    histogram_bins: int = 64
    energy_max_eV: float | None = None   # auto from voltage if unset


@dataclass(frozen=True)
class SimConfig:
    schema_version: int = SCHEMA_VERSION
    chamber: ChamberConfig = field(default_factory=ChamberConfig)
    voltage_V: float = 300.0
    magnets: MagnetConfig = field(default_factory=MagnetConfig)
    sheath: SheathConfig = field(default_factory=SheathConfig)
    gas: GasConfig = field(default_factory=GasConfig)
    ion: IonConfig = field(default_factory=IonConfig)
    plasma: PlasmaConfig = field(default_factory=PlasmaConfig)
    sputter: SputterConfig = field(default_factory=SputterConfig)
    transport: TransportConfig = field(default_factory=TransportConfig)
    deposition: DepositionConfig = field(default_factory=DepositionConfig)


_SECTIONS = {
    "chamber": (ChamberConfig, None),
    "magnets": (MagnetConfig, None),
    "sheath": (SheathConfig, None),
    "gas": (GasConfig, None),
    "ion": (IonConfig, None),
    "plasma": (PlasmaConfig, None),
    "sputter": (SputterConfig, None),
    "transport": (TransportConfig, None),
    "deposition": (DepositionConfig, None),
}


def _from_mapping(raw: dict, base: Path | None) -> SimConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a mapping")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version}")
    known = set(_SECTIONS) | {"schema_version", "voltage_V"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"top level: unknown field(s) {', '.join(unknown)}")

    kwargs = {"schema_version": SCHEMA_VERSION, "voltage_V": float(raw.get("voltage_V", 300.0))}
    for name, (cls, _) in _SECTIONS.items():
        section = dict(raw.get(name) or {})
        if name == "magnets" and "loops" in section and section["loops"] is not None:
            section["loops"] = [_make(LoopConfig, lp, f"magnets.loops[{i}]")
                                for i, lp in enumerate(section["loops"])]
        if name == "plasma":
            for sub, subcls in (("cross_sections", CrossSectionPaths), ("grid", GridConfig),
                                ("poisson", PoissonConfig), ("picard", PicardConfig)):
                if sub in section and section[sub] is not None:
                    section[sub] = _make(subcls, section[sub], f"plasma.{sub}")
        if name == "sputter" and "target" in section and section["target"] is not None:
            section["target"] = _make(TargetConfig, section["target"], "sputter.target")
        if name == "transport" and "potential" in section and section["potential"] is not None:
            section["potential"] = _make(PotentialConfig, section["potential"], "transport.potential")
        kwargs[name] = _make(cls, section, name)
    cfg = SimConfig(**kwargs)
    cfg = _resolve_paths(cfg, base)
    validate(cfg)
    return cfg


def _resolve_paths(cfg: SimConfig, base: Path | None) -> SimConfig:
    def res(p):
        if p is None:
            return None
        q = Path(p)
        if not q.is_absolute() and base is not None:
            q = base / q
        return str(q)

    xs = cfg.plasma.cross_sections
    xs = dataclasses.replace(xs, **{f.name: res(getattr(xs, f.name))
                                    for f in dataclasses.fields(xs)})
    plasma = dataclasses.replace(cfg.plasma, cross_sections=xs)
    sput = dataclasses.replace(cfg.sputter, yield_table=res(cfg.sputter.yield_table),
                               angle_table=res(cfg.sputter.angle_table))
    pot = dataclasses.replace(cfg.transport.potential,
                              screen_table=res(cfg.transport.potential.screen_table))
    trans = dataclasses.replace(cfg.transport, potential=pot)
    mag = dataclasses.replace(cfg.magnets, field_map=res(cfg.magnets.field_map))
    return dataclasses.replace(cfg, plasma=plasma, sputter=sput, transport=trans, magnets=mag)


def validate(cfg: SimConfig) -> None:
    """Check invariants; raises ConfigError naming the offending field."""
    ch = cfg.chamber
    if ch.radius_m <= 0 or ch.height_m <= 0:
        raise ConfigError("chamber.radius_m/height_m: must be > 0")
    if not (0 <= ch.target_z_m < ch.substrate_z_m <= ch.height_m):
        raise ConfigError("chamber: need 0 <= target_z_m < substrate_z_m <= height_m")
    if cfg.gas.pressure_Pa <= 0:
        raise ConfigError(f"gas.pressure_Pa: must be > 0, got {cfg.gas.pressure_Pa}")
    if cfg.gas.temperature_K <= 0:
        raise ConfigError(f"gas.temperature_K: must be > 0, got {cfg.gas.temperature_K}")
    th = cfg.plasma.theta
    if not (0.5 <= th <= 1.0):
        raise ConfigError(f"plasma.theta: must lie in [1/2, 1] (unstable below 1/2), got {th}")
    if cfg.plasma.backend not in ("kinetic", "fluid"):
        raise ConfigError(f"plasma.backend: unknown backend {cfg.plasma.backend!r}")
    if cfg.plasma.macro_weight is not None and cfg.plasma.macro_weight <= 0:
        raise ConfigError("plasma.macro_weight: must be > 0")
    if cfg.plasma.gamma_secondary is not None and cfg.plasma.gamma_secondary < 0:
        raise ConfigError("plasma.gamma_secondary: must be >= 0")
    if cfg.sheath.thickness_m is not None and cfg.sheath.thickness_m <= 0:
        raise ConfigError("sheath.thickness_m: must be > 0")
    if cfg.sputter.target.binding_energy_eV <= 0:
        raise ConfigError("sputter.target.binding_energy_eV: must be > 0")
    if cfg.sputter.energy_sampler not in ("transfer-limited", "thompson"):
        raise ConfigError(f"sputter.energy_sampler: unknown sampler {cfg.sputter.energy_sampler!r}")
    if cfg.sputter.angular_model not in ("cosine-marginal", "lambertian"):
        raise ConfigError(f"sputter.angular_model: unknown model {cfg.sputter.angular_model!r}")
    if cfg.transport.thermalized_mode not in ("continue-mc", "diffuse"):
        raise ConfigError(f"transport.thermalized_mode: unknown mode {cfg.transport.thermalized_mode!r}")
    if cfg.transport.gas_targets not in ("maxwellian", "static"):
        raise ConfigError(f"transport.gas_targets: unknown mode {cfg.transport.gas_targets!r}")
    pot = cfg.transport.potential
    if pot.kind not in ("hard-sphere", "born-mayer", "lennard-jones", "universal-modified", "firsov"):
        raise ConfigError(f"transport.potential.kind: unknown kind {pot.kind!r}")
    for fname in ("radius_m", "r_inner_m", "r_outer_m", "sigma_m", "screen_length_m"):
        v = getattr(pot, fname)
        if v is not None and v <= 0:
            raise ConfigError(f"transport.potential.{fname}: must be > 0")
    if pot.kind == "born-mayer" and pot.r_inner_m is not None and pot.r_outer_m is not None \
            and not pot.r_inner_m < pot.r_outer_m:
        raise ConfigError("transport.potential: need r_inner_m < r_outer_m")
    if cfg.deposition.histogram_bins < 1:
        raise ConfigError("deposition.histogram_bins: must be >= 1")


def load_config(path) -> SimConfig:
    """Parse and validate a YAML config file into a SimConfig."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return _from_mapping(raw if raw is not None else {}, base=path.parent.resolve())


def from_dict(raw: dict) -> SimConfig:
    """Build a SimConfig from an in-memory mapping (paths taken as-is)."""
    return _from_mapping(raw, base=None)


def to_dict(cfg: SimConfig) -> dict:
    return dataclasses.asdict(cfg)


def serialize(cfg: SimConfig) -> str:
    """Canonical YAML text; load_config of this text rebuilds an equal config."""
    return yaml.safe_dump(to_dict(cfg), sort_keys=True)


def save_config(cfg: SimConfig, path) -> None:
    Path(path).write_text(serialize(cfg))


def config_hash(cfg: SimConfig) -> str:
    """sha256 over the canonical JSON form; identifies a run's inputs."""
    blob = json.dumps(to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
