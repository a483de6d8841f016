"""Classical electron dynamics in a plane-wave pulse.

The full nonrelativistic Newton-Lorentz equation with retarded fields,

    d pi/dt = e E(t - n.r/c) + e pi x B,   B = n x E / c,   dr/dt = pi,

is integrated numerically and compared with the leading-order analytic
solution pi = p - eA(t) + d_pi(t),

    d_pi = -(n.r/c) eE(t) - (e/c) n (p.A(t)) + (e^2 A^2(t) / 2c) n.

Passing ``c_value=math.inf`` switches every 1/c term off (dipole limit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import ELECTRON_CHARGE
from .pulse import PulseSpec, electric_field, vector_potential


@dataclass
class TrajectoryState:
    r: np.ndarray
    pi: np.ndarray
    t: float


@dataclass
class Trajectory:
    """Sampled trajectory; arrays have shape (3, N) except ``t`` and ``energy``."""

    t: np.ndarray
    r: np.ndarray
    pi: np.ndarray
    r_dipole: np.ndarray
    energy: np.ndarray
    c_value: float

    def state(self, k: int) -> TrajectoryState:
        return TrajectoryState(self.r[:, k], self.pi[:, k], float(self.t[k]))


def _inv_c(c_value):
    return 0.0 if math.isinf(c_value) else 1.0 / c_value


def lorentz_rhs(state: TrajectoryState, pulse: PulseSpec, c_value: float):
    """(dr/dt, dpi/dt) with the fields evaluated at the retarded time t - n.r/c."""
    n = pulse.n_prop
    inv_c = _inv_c(c_value)
    E = electric_field(pulse, state.t - float(n @ state.r) * inv_c)
    B = np.cross(n, E) * inv_c
    dpi = ELECTRON_CHARGE * (E + np.cross(state.pi, B))
    return state.pi.copy(), dpi


def integrate_trajectory(p_asymptotic, pulse: PulseSpec, c_value: float, r0=None,
                         t_eval=None, rtol: float = 1e-12, atol: float = 1e-12,
                         lead: float = 2.0, samples: int = 4001) -> Trajectory:
    """Integrate from before the pulse reaches the electron until after it has passed.

    By default the free trajectory is anchored at r = 0 at t = T_p/2, which
    keeps n.r/c small while the field acts. The dipole trajectory
    r_d' = p - eA(t) is integrated alongside for use in the analytic formula.
    Without ``t_eval`` the solution is reported at ``samples`` uniform times.
    """
    p = np.asarray(p_asymptotic, dtype=float)
    n = pulse.n_prop
    inv_c = _inv_c(c_value)
    Tp = pulse.T_p
    t_start = -lead - abs(float(n @ p)) * (0.5 * Tp + lead) * inv_c
    if r0 is None:
        r0 = p * (t_start - 0.5 * Tp)
    r0 = np.asarray(r0, dtype=float)
    if abs(float(n @ r0)) * inv_c >= -t_start:
        raise ValueError("the pulse has already reached the electron at the start time")
    t_end = Tp + lead + abs(float(n @ p)) * (0.5 * Tp + lead) * inv_c
    if t_eval is None:
        t_eval = np.linspace(t_start, t_end, samples)

    def rhs(t, y):
        r, pi = y[0:3], y[3:6]
        dr, dpi = lorentz_rhs(TrajectoryState(r, pi, t), pulse, c_value)
        eA = ELECTRON_CHARGE * vector_potential(pulse, t)
        return np.concatenate([dr, dpi, p - eA])

    y0 = np.concatenate([r0, p, r0])
    sol = solve_ivp(rhs, (t_start, t_end), y0, method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"trajectory integration failed: {sol.message}")
    pi = sol.y[3:6]
    return Trajectory(sol.t, sol.y[0:3], pi, sol.y[6:9], 0.5 * np.sum(pi * pi, axis=0), c_value)


def analytic_momentum_correction(p, pulse: PulseSpec, t, r_of_t, c_value: float) -> np.ndarray:
    """d_pi(t) of the leading-order solution; ``r_of_t`` has shape (3,) or (3, N)."""
    p = np.asarray(p, dtype=float)
    n = pulse.n_prop
    inv_c = _inv_c(c_value)
    eE = ELECTRON_CHARGE * electric_field(pulse, t)
    eA = ELECTRON_CHARGE * vector_potential(pulse, t)
    nr = np.tensordot(n, np.asarray(r_of_t, dtype=float), axes=1)
    forward = -np.tensordot(p, eA, axes=1) + 0.5 * np.sum(eA * eA, axis=0)
    return -nr * inv_c * eE + np.multiply.outer(n, forward * inv_c)


def analytic_momentum(p, pulse: PulseSpec, t, r_of_t, c_value: float) -> np.ndarray:
    """p - eA(t) + d_pi(t)."""
    p = np.asarray(p, dtype=float)
    eA = ELECTRON_CHARGE * vector_potential(pulse, t)
    return (p - eA.T).T + analytic_momentum_correction(p, pulse, t, r_of_t, c_value)


@dataclass
class KineticEnergyTerms:
    dipole: np.ndarray
    recoil: np.ndarray
    retardation: np.ndarray

    @property
    def total(self):
        return self.dipole + self.recoil + self.retardation


def kinetic_energy_terms(p, pulse: PulseSpec, t, r, c_value: float) -> KineticEnergyTerms:
    """pi^2/2 to first order in 1/c, split into its three contributions.

    dipole       (p - eA)^2 / 2
    recoil       -(n.p / c) [eA.p - (eA)^2 / 2]
    retardation  -(n.r / c) (p - eA).eE

    The retardation sign follows from squaring p - eA + d_pi.
    """
    p = np.asarray(p, dtype=float)
    n = pulse.n_prop
    inv_c = _inv_c(c_value)
    eA = ELECTRON_CHARGE * vector_potential(pulse, t)
    eE = ELECTRON_CHARGE * electric_field(pulse, t)
    kin = (p - eA.T).T
    dipole = 0.5 * np.sum(kin * kin, axis=0)
    bracket = np.tensordot(p, eA, axes=1) - 0.5 * np.sum(eA * eA, axis=0)
    recoil = -float(n @ p) * inv_c * bracket
    nr = np.tensordot(n, np.asarray(r, dtype=float), axes=1)
    retardation = -nr * inv_c * np.sum(kin * eE, axis=0)
    return KineticEnergyTerms(dipole, recoil, retardation)


def kinetic_energy_nondipole(p, pulse: PulseSpec, t, r, c_value: float):
    return kinetic_energy_terms(p, pulse, t, r, c_value).total


def momentum_residual(p, pulse: PulseSpec, c_value: float, **kwargs) -> float:
    """max_t |pi_numeric - (p - eA + d_pi)| with r from the dipole trajectory."""
    traj = integrate_trajectory(p, pulse, c_value, **kwargs)
    analytic = analytic_momentum(p, pulse, traj.t, traj.r_dipole, c_value)
    return float(np.max(np.linalg.norm(traj.pi - analytic, axis=0)))
