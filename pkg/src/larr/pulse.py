"""Laser pulse models as pure functions of time.

Three shapes are supported:

``FieldSine2``
    electric field with a sine-squared envelope, normalised so that the
    peak of |E(t)| equals ``amplitude`` (field0 units). The vector potential
    A(t) = -int_0^t E is evaluated from its closed-form antiderivative.
``ChirpF1`` / ``ChirpF2``
    vector potential A(t) = amplitude * f_j(t) along the polarisation, with
    f_1 = sin^2(w t / 2N) sin(phi(t)), f_2 = (f_1 + 1)^2 - 1 and the chirped
    phase phi(t). ``amplitude`` is |e| A_0 in p0 units, so that
    e*A(t) = -amplitude * f_j(t). E(t) = -dA/dt in closed form.

All functions accept a scalar time or a numpy array of times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar

from .core import E_X, E_Z, ELECTRON_CHARGE, Vec3, unit


class Shape(str, Enum):
    FIELD_SINE2 = "FieldSine2"
    CHIRP_F1 = "ChirpF1"
    CHIRP_F2 = "ChirpF2"


@dataclass(frozen=True)
class PulseSpec:
    shape: Shape
    omega: float
    amplitude: float
    n_osc: int
    eta0: float = 0.0
    n_c: int = 0
    chi: float = 0.0
    n_prop: Vec3 = field(default_factory=lambda: E_Z.copy())
    eps_pol: Vec3 = field(default_factory=lambda: E_X.copy())

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        object.__setattr__(self, "n_prop", np.asarray(self.n_prop, dtype=float))
        object.__setattr__(self, "eps_pol", np.asarray(self.eps_pol, dtype=float))
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        if int(self.n_osc) != self.n_osc or self.n_osc < 1:
            raise ValueError("n_osc must be a positive integer")
        if int(self.n_c) != self.n_c or self.n_c < 0:
            raise ValueError("n_c must be a non-negative integer")
        for name in ("n_prop", "eps_pol"):
            v = getattr(self, name)
            if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError(f"{name} must be a unit 3-vector")
        if abs(float(self.n_prop @ self.eps_pol)) > 1e-12:
            raise ValueError("polarisation must be transverse to the propagation direction")

    @property
    def T_p(self) -> float:
        return 2.0 * math.pi * self.n_osc / self.omega

    @cached_property
    def norm_factor(self) -> float:
        if self.shape is not Shape.FIELD_SINE2:
            return 1.0
        return normalization_factor(self)

    def with_amplitude(self, amplitude: float) -> PulseSpec:
        return PulseSpec(self.shape, self.omega, amplitude, self.n_osc, self.eta0,
                         self.n_c, self.chi, self.n_prop, self.eps_pol)


def make_pulse(shape, omega, amplitude, n_osc, eta0=0.0, n_c=0, chi=0.0,
               n_prop=E_Z, eps_pol=E_X) -> PulseSpec:
    """Build a PulseSpec, normalising the direction vectors."""
    return PulseSpec(Shape(shape), float(omega), float(amplitude), int(n_osc), float(eta0),
                     int(n_c), float(chi), unit(n_prop), unit(eps_pol))


def _sine2_carrier(x, n_osc):
    return np.sin(x / (2 * n_osc)) ** 2 * np.sin(x)


def normalization_factor(spec: PulseSpec, samples_per_cycle: int = 10_000) -> float:
    """Scale factor making max_t |E(t)| equal to the requested peak field.

    The maximum of |sin^2(x/2N) sin x| over one pulse is located on a dense
    grid and refined by golden-section search.
    """
    if spec.shape is not Shape.FIELD_SINE2:
        raise ValueError(f"normalisation factor is only defined for FieldSine2, not {spec.shape.value}")
    n = spec.n_osc
    x = np.linspace(0.0, 2 * math.pi * n, samples_per_cycle * n + 1)
    g = np.abs(_sine2_carrier(x, n))
    k = int(np.argmax(g))
    dx = x[1] - x[0]
    lo, hi = max(x[k] - dx, 0.0), min(x[k] + dx, x[-1])
    res = minimize_scalar(lambda s: -abs(_sine2_carrier(s, n)), bracket=(lo, x[k], hi),
                          method="golden", tol=1e-12)
    peak = max(-res.fun, g[k])
    return 1.0 / peak


def chirped_phase(spec: PulseSpec, t):
    """phi(t) = w t + chi + eta0 (w t)^2 sin(w t / 2N)^(2 N_c)."""
    wt = spec.omega * np.asarray(t, dtype=float)
    return wt + spec.chi + spec.eta0 * wt**2 * np.sin(wt / (2 * spec.n_osc)) ** (2 * spec.n_c)


def _chirped_phase_rate(spec: PulseSpec, t):
    w, n, nc = spec.omega, spec.n_osc, spec.n_c
    wt = w * t
    s = np.sin(wt / (2 * n))
    rate = w + spec.eta0 * 2 * w * wt * s ** (2 * nc)
    if nc > 0:
        rate = rate + spec.eta0 * wt**2 * 2 * nc * s ** (2 * nc - 1) * np.cos(wt / (2 * n)) * w / (2 * n)
    return rate


def _shape_and_slope(spec: PulseSpec, t):
    """f_j(t) and df_j/dt on [0, T_p] for the chirped shapes."""
    w, n = spec.omega, spec.n_osc
    env = np.sin(w * t / (2 * n)) ** 2
    denv = np.sin(w * t / n) * w / (2 * n)
    phi = chirped_phase(spec, t)
    f1 = env * np.sin(phi)
    df1 = denv * np.sin(phi) + env * np.cos(phi) * _chirped_phase_rate(spec, t)
    if spec.shape is Shape.CHIRP_F1:
        return f1, df1
    return (f1 + 1.0) ** 2 - 1.0, 2.0 * (f1 + 1.0) * df1


def field_amplitude(spec: PulseSpec, t):
    """Projection of E(t) on the polarisation vector (field0 units)."""
    t = np.asarray(t, dtype=float)
    inside = (t >= 0.0) & (t <= spec.T_p)
    tc = np.clip(t, 0.0, spec.T_p)
    if spec.shape is Shape.FIELD_SINE2:
        val = spec.amplitude * spec.norm_factor * _sine2_carrier(spec.omega * tc, spec.n_osc)
    else:
        val = -spec.amplitude * _shape_and_slope(spec, tc)[1]
    return np.where(inside, val, 0.0)


def potential_amplitude(spec: PulseSpec, t):
    """Projection of A(t) on the polarisation vector (a.u.); e*A = -A."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 0.0, spec.T_p)
    if spec.shape is Shape.FIELD_SINE2:
        w, n = spec.omega, spec.n_osc
        # sin^2(wt/2N) sin(wt) = [sin(wt) - (sin(w+ t) + sin(w- t))/2] / 2
        wp = w * (1.0 + 1.0 / n)
        acc = (1.0 - np.cos(w * tc)) / w - 0.5 * (1.0 - np.cos(wp * tc)) / wp
        if n > 1:
            wm = w * (1.0 - 1.0 / n)
            acc = acc - 0.5 * (1.0 - np.cos(wm * tc)) / wm
        val = -spec.amplitude * spec.norm_factor * 0.5 * acc
    else:
        val = spec.amplitude * _shape_and_slope(spec, tc)[0]
    return np.where(t > 0.0, val, 0.0)


def electric_field(spec: PulseSpec, t) -> np.ndarray:
    """E(t) as a 3-vector, shape (3,) or (3, len(t))."""
    return np.multiply.outer(spec.eps_pol, field_amplitude(spec, t))


def vector_potential(spec: PulseSpec, t) -> np.ndarray:
    """A(t) as a 3-vector, shape (3,) or (3, len(t)). Multiply by e = -1 for eA."""
    return np.multiply.outer(spec.eps_pol, potential_amplitude(spec, t))


def eA_amplitude(spec: PulseSpec, t):
    return ELECTRON_CHARGE * potential_amplitude(spec, t)


def flat_top_cep(n_osc: int, eta0: float) -> float:
    """CEP placing the extremum of e*A at T_p/2, reduced to (-pi, pi]."""
    chi = -(math.pi * n_osc + eta0 * (math.pi * n_osc) ** 2 + math.pi / 2)
    chi = math.remainder(chi, 2 * math.pi)
    if chi <= -math.pi:
        chi += 2 * math.pi
    # remainder can leave -0.0 or tiny residues of exact multiples of 2 pi
    if abs(chi) < 1e-12:
        chi = 0.0
    return chi


def sample(spec: PulseSpec, samples_per_cycle: int = 1000):
    """Uniform samples (t, E(t), eA(t)) across [0, T_p] for previews."""
    n = samples_per_cycle * spec.n_osc
    t = np.linspace(0.0, spec.T_p, n + 1)
    return t, field_amplitude(spec, t), eA_amplitude(spec, t)
