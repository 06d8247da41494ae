"""Physical constants (SI) used across the simulator."""

from scipy import constants as _c

E_CHARGE = _c.e                # elementary charge [C]
M_ELECTRON = _c.m_e            # electron mass [kg]
K_BOLTZMANN = _c.k             # Boltzmann constant [J/K]
EPSILON_0 = _c.epsilon_0       # vacuum permittivity [F/m]
MU_0 = _c.mu_0                 # vacuum permeability [H/m]
AMU = _c.physical_constants["atomic mass constant"][0]   # [kg]
BOHR_RADIUS = _c.physical_constants["Bohr radius"][0]    # [m]

EV = E_CHARGE                  # 1 eV in J
# Coulomb prefactor e^2/(4 pi eps0), in eV*m: multiply by Z1*Z2/r[m] for energy in eV
COULOMB_EV_M = E_CHARGE / (4.0 * _c.pi * EPSILON_0)


def ev_to_joule(e_ev: float) -> float:
    return e_ev * EV


def joule_to_ev(e_j: float) -> float:
    return e_j / EV
