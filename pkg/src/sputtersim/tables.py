"""Tabulated curves: cross sections, yields, screen functions.

All tables interpolate linearly between samples and extrapolate with the
constant end values.  File format is CSV with a header line; comment lines
start with '#'.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

INELASTIC = ("ionization", "excitation", "charge-exchange")
PROCESSES = ("elastic",) + INELASTIC


class TableError(ValueError):
    pass


@dataclass(frozen=True)
class Curve:
    """Sorted 1D lookup table with linear interpolation, clamped ends."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.size == 0:
            raise TableError("empty table")
        if x.size != y.size:
            raise TableError("mismatched table columns")
        if np.any(np.diff(x) <= 0):
            raise TableError("table abscissae must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __call__(self, q):
        return np.interp(q, self.x, self.y)


@dataclass(frozen=True)
class CrossSectionTable:
    """Energy-dependent cross section for one collision process.

    energies in eV (strictly increasing), sigma in m^2 (non-negative).  For
    inelastic processes the threshold is taken from the table itself: the
    last zero-sigma sample before the first positive one.
    """

    process: str
    projectile: str
    target: str
    energies: np.ndarray   # [eV]
    sigmas: np.ndarray     # [m^2]
    threshold: float = 0.0  # [eV], 0 for elastic

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise TableError(f"unknown process {self.process!r}")
        e = np.asarray(self.energies, dtype=float)
        s = np.asarray(self.sigmas, dtype=float)
        if e.size == 0:
            raise TableError(f"{self.process}: empty cross-section table")
        if e.size != s.size:
            raise TableError(f"{self.process}: mismatched columns")
        if np.any(np.diff(e) <= 0):
            raise TableError(f"{self.process}: energies must be strictly increasing")
        if np.any(s < 0):
            raise TableError(f"{self.process}: negative cross section")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "sigmas", s)
        thr = _derive_threshold(self.process, e, s)
        object.__setattr__(self, "threshold", thr)
        if self.process in INELASTIC and np.any((e < thr) & (s > 0)):
            raise TableError(f"{self.process}: nonzero sigma below threshold")

    def sigma(self, energy_ev):
        """Cross section at the given energy [m^2]; clamped extrapolation,
        identically zero below an inelastic threshold."""
        out = np.interp(energy_ev, self.energies, self.sigmas)
        if self.threshold > 0.0:
            out = np.where(np.asarray(energy_ev) < self.threshold, 0.0, out)
        return out if np.ndim(energy_ev) else float(out)


def _derive_threshold(process: str, e: np.ndarray, s: np.ndarray) -> float:
    if process not in INELASTIC:
        return 0.0
    pos = np.nonzero(s > 0)[0]
    if pos.size == 0:
        return float(e[-1])
    first = pos[0]
    # last zero sample before the first positive one, else the first energy
    return float(e[first - 1]) if first > 0 else float(e[0])


def _read_csv(path, expected_header: tuple[str, ...]) -> np.ndarray:
    path = Path(path)
    rows = []
    header = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = tuple(tok.strip() for tok in line.split(","))
                if header != expected_header:
                    raise TableError(f"{path}: expected header {','.join(expected_header)!r}, "
                                     f"got {','.join(header)!r}")
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise TableError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise TableError(f"{path}: empty table")
    data = np.asarray(rows, dtype=float)
    if data.shape[1] != len(expected_header):
        raise TableError(f"{path}: expected {len(expected_header)} columns")
    return data


def load_cross_sections(path, process: str, projectile: str = "", target: str = "") -> CrossSectionTable:
    """Load a two-column CSV (header 'energy_eV,sigma_m2') into a table."""
    data = _read_csv(path, ("energy_eV", "sigma_m2"))
    return CrossSectionTable(process, projectile, target, data[:, 0], data[:, 1])


def load_curve(path, expected_header: tuple[str, str]) -> Curve:
    data = _read_csv(path, expected_header)
    return Curve(data[:, 0], data[:, 1])
