"""Atomic-unit constants, unit conversions and 3-vector helpers.

Everything inside the package works in Hartree atomic units
(hbar = m_e = |e| = 1, c = 1/alpha). Conversions to laboratory units only
happen at the I/O boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.constants as sc

ALPHA = sc.fine_structure
C_AU = 1.0 / ALPHA
HARTREE_EV = sc.physical_constants["Hartree energy in eV"][0]
ELECTRON_CHARGE = -1.0  # e = -|e|
ELECTRON_MASS = 1.0


@dataclass(frozen=True)
class Constants:
    """Atomic units expressed in SI (and the intensity unit in W/cm^2)."""

    alpha: float = ALPHA
    c_au: float = C_AU
    p0: float = sc.physical_constants["atomic unit of momentum"][0]
    E0: float = sc.physical_constants["Hartree energy"][0]
    a0: float = sc.physical_constants["Bohr radius"][0]
    t0: float = sc.physical_constants["atomic unit of time"][0]
    field0: float = sc.physical_constants["atomic unit of electric field"][0]

    @property
    def I0(self) -> float:
        """Intensity unit eps0 * c * field0^2 in W/cm^2."""
        return sc.epsilon_0 * sc.c * self.field0**2 * 1e-4


CONSTANTS = Constants()

Vec3 = np.ndarray
"""A real 3-vector stored as a float array of shape (3,)."""


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=float)


E_X = vec3(1.0, 0.0, 0.0)
E_Y = vec3(0.0, 1.0, 0.0)
E_Z = vec3(0.0, 0.0, 1.0)


def energy_ev_to_au(energy_ev):
    return energy_ev / HARTREE_EV


def energy_au_to_ev(energy_au):
    return energy_au * HARTREE_EV


def momentum_from_energy(energy_au: float) -> float:
    """Nonrelativistic |p| = sqrt(2 m_e E)."""
    return math.sqrt(2.0 * ELECTRON_MASS * energy_au)


def direction_from_angles(theta: float, phi: float) -> Vec3:
    """Unit vector (sin t cos f, sin t sin f, cos t)."""
    st = math.sin(theta)
    return vec3(st * math.cos(phi), st * math.sin(phi), math.cos(theta))


def unit(v) -> Vec3:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalise the zero vector")
    return v / n
