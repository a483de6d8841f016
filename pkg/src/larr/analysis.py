"""Saddle-point cutoff law and the time-frequency spectrogram of spectra.

The saddle-point emission energy for recombination at time t is

    omega_K(t) = (p - eA(t))^2 / 2 - E_B - (n.p / c) [eA.p - (eA)^2 / 2],

where the last (recoil) term is optional. The spectrogram maps a complex
spectral amplitude A(omega) to S(t, omega_K) = |int A_T(w) W(w - omega_K) e^{-iwt} dw|^2
with a truncation ramp f_T and a normalised Gaussian window W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import minimize_scalar

from .amplitude import ScatteringConfig, _fields, _ponderomotive


@dataclass
class SaddleCurve:
    t_grid: np.ndarray
    omega_dipole: np.ndarray
    omega_full: np.ndarray


def recoil_correction(p, n, eA, c_au):
    """-(n.p / c) [eA.p - (eA)^2 / 2], the leading nondipole shift of the saddle energy."""
    return -float(np.dot(n, p)) / c_au * _ponderomotive(np.asarray(p, dtype=float), eA)


def saddle_energy(config: ScatteringConfig, t, include_recoil: bool = True):
    eA, _ = _fields(config, t)
    p = config.p_vec
    kin = (p - eA.T).T
    omega = 0.5 * np.sum(kin * kin, axis=0) - config.E_B
    if include_recoil:
        omega = omega + recoil_correction(p, config.n, eA, config.c_au)
    return omega


def saddle_curve(config: ScatteringConfig, t_grid) -> SaddleCurve:
    t = np.asarray(t_grid, dtype=float)
    return SaddleCurve(t, saddle_energy(config, t, False), saddle_energy(config, t, True))


def cutoff(config: ScatteringConfig, include_recoil: bool = True, samples_per_cycle: int = 2000) -> float:
    """max_t omega_K(t): dense sampling followed by bounded scalar refinement."""
    pulse = config.pulse
    t = np.linspace(0.0, pulse.T_p, samples_per_cycle * pulse.n_osc + 1)
    w = saddle_energy(config, t, include_recoil)
    k = int(np.argmax(w))
    lo, hi = t[max(k - 1, 0)], t[min(k + 1, len(t) - 1)]
    res = minimize_scalar(lambda s: -float(saddle_energy(config, s, include_recoil)),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(float(-res.fun), float(w[k]))


def plateau_edge(omega, d3E, lower: float, body_fraction: float = 1e-4, drop: float = 10.0) -> float:
    """High-energy plateau edge of a spectrum.

    The plateau is the part of the spectrum above ``lower`` that stays within
    ``body_fraction`` of its maximum; the edge is the last grid point whose
    value is within a factor ``drop`` of the plateau median.
    """
    omega = np.asarray(omega, dtype=float)
    d3E = np.asarray(d3E, dtype=float)
    region = omega >= lower
    if not np.any(region):
        raise ValueError("no grid points above the lower bound")
    vals = d3E[region]
    body = vals >= body_fraction * vals.max()
    median = float(np.median(vals[body]))
    above = np.nonzero(vals >= median / drop)[0]
    return float(omega[region][above[-1]])


# --- spectrogram --------------------------------------------------------------

@dataclass(frozen=True)
class SpectrogramConfig:
    xi_T: float
    xi_W: float
    omega1: float
    omega2: float
    t_grid: np.ndarray
    omega_K_grid: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.xi_T < 0.5:
            raise ValueError("xi_T must lie in (0, 1/2)")
        if not self.xi_W > 0.0:
            raise ValueError("xi_W must be positive")
        if not self.omega1 < self.omega2:
            raise ValueError("omega1 must be below omega2")
        object.__setattr__(self, "t_grid", np.asarray(self.t_grid, dtype=float))
        object.__setattr__(self, "omega_K_grid", np.asarray(self.omega_K_grid, dtype=float))

    @property
    def window_width(self) -> float:
        return self.xi_W * (self.omega2 - self.omega1)


@dataclass
class SpectrogramResult:
    t_grid: np.ndarray
    omega_K_grid: np.ndarray
    S: np.ndarray


def truncation_ramp(x, dx):
    """f_T(x, dx): zero outside [0, 1], sin^2 ramps of width dx at both ends, one inside."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    rise = (x > 0.0) & (x < dx)
    flat = (x >= dx) & (x <= 1.0 - dx)
    fall = (x > 1.0 - dx) & (x < 1.0)
    out[rise] = np.sin(0.5 * math.pi * x[rise] / dx) ** 2
    out[flat] = 1.0
    out[fall] = np.sin(0.5 * math.pi * (1.0 - x[fall]) / dx) ** 2
    return out


def truncate_signal(omega, signal, cfg: SpectrogramConfig):
    """Multiply the signal by f_T((w - w1)/(w2 - w1), xi_T)."""
    omega = np.asarray(omega, dtype=float)
    if omega[0] > cfg.omega1 or omega[-1] < cfg.omega2:
        raise ValueError("signal grid does not cover [omega1, omega2]")
    x = (omega - cfg.omega1) / (cfg.omega2 - cfg.omega1)
    return np.asarray(signal) * truncation_ramp(x, cfg.xi_T)


def gaussian_window(x, dx):
    """W(x, dx) = exp(-(x/dx)^2) / (sqrt(pi) dx), normalised to unit area."""
    return np.exp(-((np.asarray(x) / dx) ** 2)) / (math.sqrt(math.pi) * dx)


def spectrogram(omega, signal, cfg: SpectrogramConfig) -> SpectrogramResult:
    """S(t, omega_K) of a signal sampled on a uniform omega grid.

    Rows follow ``cfg.t_grid``, columns ``cfg.omega_K_grid``. The omega
    integral is evaluated with the trapezoidal rule on the signal grid.
    """
    omega = np.asarray(omega, dtype=float)
    truncated = truncate_signal(omega, signal, cfg)
    keep = truncated != 0.0
    w, a = omega[keep], truncated[keep]
    if w.size < 2:
        raise ValueError("truncated signal has fewer than two nonzero samples")
    dw = np.diff(w)
    if not np.allclose(dw, dw[0], rtol=1e-6, atol=0.0):
        raise ValueError("signal must be sampled on a uniform grid")
    weights = np.full(w.size, dw[0])
    weights[[0, -1]] *= 0.5
    window = gaussian_window(w[None, :] - cfg.omega_K_grid[:, None], cfg.window_width)
    carrier = np.exp(-1j * np.outer(cfg.t_grid, w))
    amplitude = (carrier * (weights * a)) @ window.T
    return SpectrogramResult(cfg.t_grid, cfg.omega_K_grid, np.abs(amplitude) ** 2)


def ridge(result: SpectrogramResult, exclude=None):
    """omega_K maximizing S at each time; ``exclude`` is an optional (lo, hi) band."""
    S = result.S.copy()
    if exclude is not None:
        lo, hi = exclude
        band = (result.omega_K_grid >= lo) & (result.omega_K_grid <= hi)
        S[:, band] = -np.inf
    return result.omega_K_grid[np.argmax(S, axis=1)]


def window_integral(dx, half_span: float = 12.0, points: int = 4001) -> float:
    """Trapezoid estimate of the window area; used as a self-check."""
    x = np.linspace(-half_span * dx, half_span * dx, points)
    return float(trapezoid(gaussian_window(x, dx), x))
