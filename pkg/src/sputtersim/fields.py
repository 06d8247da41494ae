"""Static fields: magnet loop superposition, sheath/pre-sheath potential,
effective-potential picture, axisymmetric Poisson solver, theta averaging."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ellipe, ellipk

from .constants import EPSILON_0, MU_0


class FieldError(ValueError):
    pass


class SingularPointError(FieldError):
    """Field requested on a loop filament, where it diverges."""


class ConvergenceError(RuntimeError):
    """Iterative solve failed to reach tolerance within the iteration cap."""

    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals if residuals is not None else []


@dataclass(frozen=True)
class CurrentLoop:
    """Coaxial circular filament: radius [m], axial offset [m], current [A]."""

    radius: float
    z: float
    current: float

    def __post_init__(self):
        if self.radius <= 0:
            raise FieldError(f"loop radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class MagnetSpec:
    """Permanent magnets approximated by equivalent current loops."""

    loops: tuple

    def __post_init__(self):
        object.__setattr__(self, "loops", tuple(self.loops))
        if not self.loops:
            raise FieldError("MagnetSpec needs at least one loop")


_AXIS_EPS = 1e-12


def _loop_field(loop: CurrentLoop, r: float, z: float) -> tuple[float, float]:
    """(B_r, B_z) of one filament at (r, z), elliptic-integral solution [T]."""
    a, zeta = loop.radius, z - loop.z
    pref = MU_0 * loop.current / (2.0 * np.pi)
    if r < _AXIS_EPS * max(a, 1.0):
        bz = MU_0 * loop.current * a * a / (2.0 * (a * a + zeta * zeta) ** 1.5)
        return 0.0, bz
    d2 = (a - r) ** 2 + zeta ** 2
    if d2 == 0.0:
        raise SingularPointError(f"point (r={r}, z={z}) lies on a loop filament")
    s2 = (a + r) ** 2 + zeta ** 2
    m = 4.0 * a * r / s2
    K, E = ellipk(m), ellipe(m)
    s = np.sqrt(s2)
    bz = pref / s * (K + E * (a * a - r * r - zeta * zeta) / d2)
    br = pref * zeta / (r * s) * (-K + E * (a * a + r * r + zeta * zeta) / d2)
    return float(br), float(bz)


def _loop_potential(loop: CurrentLoop, r: float, z: float) -> float:
    """Azimuthal vector potential A_theta of one filament [T m]."""
    a, zeta = loop.radius, z - loop.z
    if r < _AXIS_EPS * max(a, 1.0):
        return 0.0
    if (a - r) ** 2 + zeta ** 2 == 0.0:
        raise SingularPointError(f"point (r={r}, z={z}) lies on a loop filament")
    m = 4.0 * a * r / ((a + r) ** 2 + zeta ** 2)
    k = np.sqrt(m)
    K, E = ellipk(m), ellipe(m)
    return float(MU_0 * loop.current / (np.pi * k) * np.sqrt(a / r)
                 * ((1.0 - 0.5 * m) * K - E))


def magnetic_field_at(spec: MagnetSpec, r: float, z: float) -> tuple[float, float]:
    """Superposed (B_r, B_z) of all loops at (r, z) [T]."""
    br = bz = 0.0
    for loop in spec.loops:
        dbr, dbz = _loop_field(loop, r, z)
        br += dbr
        bz += dbz
    return br, bz


def vector_potential_at(spec: MagnetSpec, r: float, z: float) -> float:
    """Superposed A_theta at (r, z) [T m]; curl of A reproduces B."""
    return sum(_loop_potential(loop, r, z) for loop in spec.loops)


@dataclass(frozen=True)
class SheathModel:
    """Cathode-sheath description: thickness, applied voltage, pre-sheath drop."""

    thickness: float        # [m]
    voltage: float          # [V], applied cathode-anode drop
    presheath_drop: float = 0.0   # [V], small constant past the sheath edge

    def __post_init__(self):
        if self.thickness <= 0:
            raise FieldError(f"sheath thickness must be > 0, got {self.thickness}")


def sheath_potential(model: SheathModel, z: float) -> float:
    """Child-law sheath profile phi(z) = -V (1 - z/d)^(4/3), z from cathode [V]."""
    if not 0.0 <= z <= model.thickness:
        raise FieldError(f"z={z} outside the sheath [0, {model.thickness}]")
    return -model.voltage * (1.0 - z / model.thickness) ** (4.0 / 3.0)


def presheath_potential(model: SheathModel, z: float) -> float:
    """Uniform pre-sheath value past the sheath edge [V]."""
    if z <= model.thickness:
        raise FieldError(f"z={z} is inside the sheath (d={model.thickness})")
    return model.presheath_drop


def potential_profile(model: SheathModel, z: float) -> float:
    """Sheath profile inside d, uniform pre-sheath outside."""
    return sheath_potential(model, z) if z <= model.thickness else presheath_potential(model, z)


def effective_potential(p_theta: float, a_theta: float, r: float, phi: float,
                        q: float, m: float) -> float:
    """Energy barrier governing radial confinement of a charge with canonical
    angular momentum p_theta in fields (A_theta, phi) [J]."""
    if r <= 0.0:
        raise FieldError("effective potential is singular at r = 0")
    return (p_theta - a_theta * r * q) ** 2 / (2.0 * m * r * r) + q * phi


def theta_average(q_n, q_np1, theta: float):
    """Time-centered value (1-theta) Q_n + theta Q_np1; theta in [1/2, 1]."""
    if not 0.5 <= theta <= 1.0:
        raise ValueError(f"theta={theta} outside [1/2, 1]: the implicit scheme is "
                         "unstable below 1/2")
    return (1.0 - theta) * q_n + theta * q_np1


def stretched_nodes(length: float, n: int, stretch: float = 1.0) -> np.ndarray:
    """Node coordinates on [0, length]; stretch > 1 packs nodes near 0
    (the cathode side) with geometrically growing spacings."""
    if n < 2:
        raise FieldError("grid needs at least 2 nodes")
    if stretch == 1.0:
        return np.linspace(0.0, length, n)
    w = stretch ** np.arange(n - 1)
    edges = np.concatenate([[0.0], np.cumsum(w)])
    return length * edges / edges[-1]


@dataclass
class FieldMap:
    """Structured r-z grid with magnetostatic and electrostatic node data."""

    r: np.ndarray           # [m], shape (nr,)
    z: np.ndarray           # [m], shape (nz,)
    Br: np.ndarray          # [T], shape (nr, nz)
    Bz: np.ndarray          # [T], shape (nr, nz)
    Atheta: np.ndarray      # [T m]
    phi: np.ndarray = None  # [V]
    Er: np.ndarray = None   # [V/m]
    Ez: np.ndarray = None   # [V/m]

    def __post_init__(self):
        nr, nz = len(self.r), len(self.z)
        if self.phi is None:
            self.phi = np.zeros((nr, nz))
        if self.Er is None:
            self.Er = np.zeros((nr, nz))
        if self.Ez is None:
            self.Ez = np.zeros((nr, nz))

    @classmethod
    def from_magnets(cls, spec: MagnetSpec, r_nodes, z_nodes) -> "FieldMap":
        r = np.asarray(r_nodes, float)
        z = np.asarray(z_nodes, float)
        Br = np.empty((r.size, z.size))
        Bz = np.empty_like(Br)
        At = np.empty_like(Br)
        for i, ri in enumerate(r):
            for j, zj in enumerate(z):
                Br[i, j], Bz[i, j] = magnetic_field_at(spec, ri, zj)
                At[i, j] = vector_potential_at(spec, ri, zj)
        return cls(r, z, Br, Bz, At)

    def refresh_electric_field(self) -> None:
        """E = -grad(phi) with central differences (one-sided at edges)."""
        self.Er = -_gradient_along(self.phi, self.r, axis=0)
        self.Ez = -_gradient_along(self.phi, self.z, axis=1)

    def b_magnitude(self) -> np.ndarray:
        return np.hypot(self.Br, self.Bz)

    def interp(self, name: str, r, z):
        """Bilinear node interpolation of one field component."""
        f = getattr(self, name)
        return _bilinear(self.r, self.z, f, r, z)

    def export_csv(self, path) -> None:
        """Write r,z,Br,Bz,Atheta rows (SI), row-major over the grid."""
        with open(path, "w") as fh:
            fh.write("r,z,Br,Bz,Atheta\n")
            for i, ri in enumerate(self.r):
                for j, zj in enumerate(self.z):
                    fh.write(f"{ri!r},{zj!r},{self.Br[i, j]!r},{self.Bz[i, j]!r},{self.Atheta[i, j]!r}\n")

    @classmethod
    def import_csv(cls, path) -> "FieldMap":
        data = np.genfromtxt(path, delimiter=",", names=True)
        r = np.unique(data["r"])
        z = np.unique(data["z"])
        if r.size * z.size != data.shape[0]:
            raise FieldError(f"{path}: rows do not tile an r-z grid")
        shape = (r.size, z.size)
        order = np.lexsort((data["z"], data["r"]))
        return cls(r, z,
                   data["Br"][order].reshape(shape),
                   data["Bz"][order].reshape(shape),
                   data["Atheta"][order].reshape(shape))


def _gradient_along(f: np.ndarray, x: np.ndarray, axis: int) -> np.ndarray:
    return np.gradient(f, x, axis=axis, edge_order=2)


def _bilinear(xn, yn, f, x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    i = np.clip(np.searchsorted(xn, x) - 1, 0, xn.size - 2)
    j = np.clip(np.searchsorted(yn, y) - 1, 0, yn.size - 2)
    tx = np.clip((x - xn[i]) / (xn[i + 1] - xn[i]), 0.0, 1.0)
    ty = np.clip((y - yn[j]) / (yn[j + 1] - yn[j]), 0.0, 1.0)
    out = ((1 - tx) * (1 - ty) * f[i, j] + tx * (1 - ty) * f[i + 1, j]
           + (1 - tx) * ty * f[i, j + 1] + tx * ty * f[i + 1, j + 1])
    return out if out.ndim else float(out)


def poisson_solve(grid: FieldMap, n_i: np.ndarray, n_e: np.ndarray, v_appl: float,
                  *, charge: float | None = None, tol: float = 1.0e-8,
                  max_iter: int = 100000, omega: float = 1.9,
                  boundary: np.ndarray | None = None,
                  track_residuals: bool = False):
    """Solve the axisymmetric electrostatic problem on the grid's r-z nodes.

    Discrete form: (1/r) d/dr(r dphi/dr) + d2phi/dz2 = -(q/eps0)(n_i - n_e),
    second-order finite differences, symmetric stencil on the r = 0 axis.
    Boundary values: phi = -v_appl on the cathode plane (z = z[0]), phi = 0 on
    the remaining walls, unless an explicit boundary array is supplied.

    Returns (phi, iterations) or (phi, iterations, residuals).
    Raises ConvergenceError if the residual cap is hit.
    """
    from .constants import E_CHARGE
    q = E_CHARGE if charge is None else charge
    r, z = grid.r, grid.z
    nr, nz = r.size, z.size
    rhs = -(q / EPSILON_0) * (np.asarray(n_i, float) - np.asarray(n_e, float))
    if rhs.shape != (nr, nz):
        raise FieldError(f"density fields must have shape {(nr, nz)}")

    phi = np.zeros((nr, nz))
    if boundary is not None:
        phi[:, :] = boundary
    else:
        phi[:, 0] = -v_appl        # cathode plane
        phi[:, -1] = 0.0           # opposite wall
        phi[-1, :] = 0.0           # side wall
        phi[-1, 0] = -v_appl

    # nonuniform 3-point coefficients along each axis
    hr = np.diff(r)
    hz = np.diff(z)

    # interior index ranges: i = 0..nr-2 (axis included, side wall Dirichlet),
    # j = 1..nz-2
    cW = np.zeros((nr, nz)); cE = np.zeros((nr, nz))
    cS = np.zeros((nr, nz)); cN = np.zeros((nr, nz))

    # radial part, (1/r)(r phi_r)_r
    for i in range(1, nr - 1):
        hm, hp = hr[i - 1], hr[i]
        rm, rp = 0.5 * (r[i - 1] + r[i]), 0.5 * (r[i] + r[i + 1])
        cW[i, :] = 2.0 * rm / (hm * (hm + hp) * r[i])
        cE[i, :] = 2.0 * rp / (hp * (hm + hp) * r[i])
    if r[0] == 0.0:
        cE[0, :] = 4.0 / hr[0] ** 2   # symmetric axis stencil
        cW[0, :] = 0.0
    else:
        # grid starting off-axis: one-sided Dirichlet treated like a wall
        pass
    # axial part
    for j in range(1, nz - 1):
        hm, hp = hz[j - 1], hz[j]
        cS[:, j] = 2.0 / (hm * (hm + hp))
        cN[:, j] = 2.0 / (hp * (hm + hp))

    diag = cW + cE + cS + cN
    i_int = slice(0, nr - 1) if r[0] == 0.0 else slice(1, nr - 1)
    j_int = slice(1, nz - 1)
    interior = np.zeros((nr, nz), dtype=bool)
    interior[i_int, j_int] = True

    rhs_scale = max(float(np.max(np.abs(rhs))), float(np.max(np.abs(phi))) /
                    max(float(np.min(hr)) ** 2, 1e-300), 1e-300)

    def residual() -> float:
        res = _apply_operator(phi, cW, cE, cS, cN, diag) - rhs
        return float(np.sqrt(np.mean(res[interior] ** 2))) / rhs_scale

    residuals = []
    red = np.zeros((nr, nz), dtype=bool)
    ii, jj = np.meshgrid(np.arange(nr), np.arange(nz), indexing="ij")
    red[interior] = ((ii + jj) % 2 == 0)[interior]
    black = interior & ~red

    check_every = 20
    for it in range(1, max_iter + 1):
        for mask in (red, black):
            gs = _neighbor_sum(phi, cW, cE, cS, cN)
            phi[mask] += omega * ((gs[mask] - rhs[mask]) / diag[mask] - phi[mask])
        if it % check_every == 0 or it == max_iter:
            res = residual()
            residuals.append(res)
            if res < tol:
                out = (phi, it, residuals) if track_residuals else (phi, it)
                return out
    raise ConvergenceError(f"Poisson solve: residual {residuals[-1]:.3e} above tol {tol:.1e} "
                           f"after {max_iter} iterations", residuals)


def _neighbor_sum(phi, cW, cE, cS, cN):
    gs = np.zeros_like(phi)
    gs[1:, :] += cW[1:, :] * phi[:-1, :]
    gs[:-1, :] += cE[:-1, :] * phi[1:, :]
    gs[:, 1:] += cS[:, 1:] * phi[:, :-1]
    gs[:, :-1] += cN[:, :-1] * phi[:, 1:]
    return gs


def _apply_operator(phi, cW, cE, cS, cN, diag):
    return _neighbor_sum(phi, cW, cE, cS, cN) - diag * phi
