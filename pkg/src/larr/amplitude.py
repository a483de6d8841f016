"""LARR amplitude engine.

For one photon energy omega_K the engine builds the energy mismatch Q, the
effective momentum q(t) and the phase H(t), then evaluates

    R0 = 2 pi B(0) exp(i H(T_p)/2) cos(H(T_p)/2)
    R1 = i   int_0^T_p exp(i Q t + i H) [dB/dt + i dH/dt B] dt
    R2 = -1/c int_0^T_p exp(i Q t + i H) C dt

and the wave-packet averaged amplitude <R> = R0 <delta(Q)> + R1 <P(1/Q)> + R2.

Two integration paths are provided:

``reference``
    adaptive DOP853 integration of the ODE system for (H, R1, R2) with the
    analytic vector potential.
``fast``
    kernels evaluated on a coarse grid (``coarse_per_cycle`` points per
    laser cycle), cubic-spline interpolated onto a fine grid whose step keeps
    the phase increment (Q + dH/dt) h below ``phase_step``, followed by
    composite Simpson quadrature. H is built on the same fine grid by
    cumulative Simpson integration.

Each photon energy is processed independently, so results do not depend on
the grid they are embedded in or on how a sweep is split across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_simpson, simpson, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from .core import C_AU, E_X, E_Z, ELECTRON_CHARGE, direction_from_angles, unit
from .nordsieck import NordsieckArgs, kernel_B, kernel_values
from .pulse import PulseSpec, eA_amplitude, field_amplitude


class NumericalFailure(RuntimeError):
    """One or more grid points failed; ``indices`` lists them in grid order."""

    def __init__(self, message: str, indices=()):
        super().__init__(message)
        self.indices = list(indices)


@dataclass(frozen=True)
class NondipoleFlags:
    recoil: bool = True
    retardation: bool = True
    gauge: bool = True
    photon_momentum: bool = True

    @classmethod
    def dipole(cls) -> NondipoleFlags:
        return cls(False, False, False, False)


@dataclass(frozen=True)
class ScatteringConfig:
    """Electron wave packet, ion, laser pulse and photon detection geometry."""

    Z: float
    p_mag: float
    theta_p: float
    phi_p: float
    dp: float
    pulse: PulseSpec
    n_K: np.ndarray = field(default_factory=lambda: E_Z.copy())
    eps_K: np.ndarray = field(default_factory=lambda: E_X.copy())
    flags: NondipoleFlags = NondipoleFlags()
    c_au: float = C_AU

    def __post_init__(self):
        object.__setattr__(self, "n_K", unit(self.n_K))
        object.__setattr__(self, "eps_K", unit(self.eps_K))
        if self.Z < 1:
            raise ValueError("Z must be >= 1")
        if not self.p_mag > 0.0:
            raise ValueError("p_mag must be positive")
        if not self.dp > 0.0:
            raise ValueError("dp must be positive")
        if not self.c_au > 0.0:
            raise ValueError("c_au must be positive")

    @property
    def p_vec(self) -> np.ndarray:
        return self.p_mag * direction_from_angles(self.theta_p, self.phi_p)

    @property
    def E_B(self) -> float:
        return -0.5 * self.Z**2

    @property
    def nu(self) -> float:
        return self.Z / self.p_mag

    @property
    def lam(self) -> float:
        return float(self.Z)

    @property
    def n(self) -> np.ndarray:
        return self.pulse.n_prop

    @property
    def peak_energy(self) -> float:
        """Photon energy of the field-free line, p^2/2 - E_B."""
        return 0.5 * self.p_mag**2 - self.E_B


@dataclass(frozen=True)
class IntegrationOptions:
    method: str = "fast"
    rtol: float = 1e-8
    atol: float = 1e-12
    coarse_per_cycle: int = 400
    phase_step: float = 0.1

    def __post_init__(self):
        if self.method not in ("fast", "reference"):
            raise ValueError(f"unknown integration method {self.method!r}")


@dataclass
class AmplitudeParts:
    R0: complex
    R1: complex
    R2: complex
    H_Tp: float
    Q: float


@dataclass
class SpectrumResult:
    omega_grid: np.ndarray
    d3E: np.ndarray
    avg_R: np.ndarray
    parts: list = None


# --- kinematics -------------------------------------------------------------

def energy_mismatch_Q(config: ScatteringConfig, omega_K):
    return config.E_B + omega_K - 0.5 * config.p_mag**2


def photon_momentum(config: ScatteringConfig, omega_K) -> np.ndarray:
    """K = (omega_K / c) n_K, or zero when the photon-momentum flag is off."""
    if not config.flags.photon_momentum:
        return np.zeros(3)
    return (omega_K / config.c_au) * config.n_K


def _fields(config: ScatteringConfig, t):
    """(eA, eE) as (3,) or (3, N) arrays."""
    pol = config.pulse.eps_pol
    eA = np.multiply.outer(pol, eA_amplitude(config.pulse, t))
    eE = np.multiply.outer(pol, ELECTRON_CHARGE * field_amplitude(config.pulse, t))
    return eA, eE


def _ponderomotive(p, eA):
    """eA.p - (eA)^2/2 for (3,) or (3, N) eA."""
    return np.tensordot(p, eA, axes=1) - 0.5 * np.sum(eA * eA, axis=0)


def _add(vec, col, scal):
    """vec (3,) or (3,N) plus outer(col, scal)."""
    return vec + np.multiply.outer(col, scal)


def q_of_t(config: ScatteringConfig, omega_K, t) -> np.ndarray:
    eA, _ = _fields(config, t)
    return _q_from_fields(config, omega_K, eA)


def _q_from_fields(config, omega_K, eA):
    p = config.p_vec
    q = (p - photon_momentum(config, omega_K) - eA.T).T
    if config.flags.retardation:
        q = _add(q, config.n, -_ponderomotive(p, eA) / config.c_au)
    return q


def q_dot(config: ScatteringConfig, t) -> np.ndarray:
    eA, eE = _fields(config, t)
    return _qdot_from_fields(config, eA, eE)


def _qdot_from_fields(config, eA, eE):
    if not config.flags.retardation:
        return eE
    p = config.p_vec
    rate = np.tensordot(p, eE, axes=1) - np.sum(eA * eE, axis=0)
    return _add(eE, config.n, rate / config.c_au)


def recoil_factor(config: ScatteringConfig) -> float:
    if not config.flags.recoil:
        return 1.0
    return 1.0 + float(config.n @ config.p_vec) / config.c_au


def H_rate(config: ScatteringConfig, t):
    eA, _ = _fields(config, t)
    return recoil_factor(config) * _ponderomotive(config.p_vec, eA)


# --- amplitude --------------------------------------------------------------

def _kernel_args(config, q):
    return NordsieckArgs(config.nu, config.lam, q, config.p_vec)


def B_at_start(config: ScatteringConfig, omega_K) -> complex:
    """B at q(0) = p - K, the t -> 0 limit of q(t)."""
    q0 = config.p_vec - photon_momentum(config, omega_K)
    return complex(kernel_B(_kernel_args(config, q0), config.eps_K))


def _r0(B0, H_Tp):
    return 2.0 * math.pi * B0 * np.exp(0.5j * H_Tp) * math.cos(0.5 * H_Tp)


def integrate_amplitude(config: ScatteringConfig, omega_K: float,
                        options: IntegrationOptions | None = None) -> AmplitudeParts:
    """R0, R1, R2 and H(T_p) for one photon energy."""
    options = options or IntegrationOptions()
    if options.method == "reference":
        parts = _integrate_reference(config, omega_K, options)
    else:
        parts = _integrate_fast(config, omega_K, options)
    values = (parts.R0, parts.R1, parts.R2, parts.H_Tp)
    if not all(np.isfinite(v) for v in values):
        raise NumericalFailure(f"non-finite amplitude at omega_K={omega_K!r}")
    return parts


def _kernels_on_grid(config, omega_K, t):
    eA, eE = _fields(config, t)
    q = _q_from_fields(config, omega_K, eA)
    qd = _qdot_from_fields(config, eA, eE)
    Hdot = recoil_factor(config) * _ponderomotive(config.p_vec, eA)
    if config.flags.gauge:
        kv = kernel_values(_kernel_args(config, q), config.eps_K, qd, eE, config.n)
    else:
        kv = kernel_values(_kernel_args(config, q), config.eps_K, qd)
    return Hdot, kv


def _integrate_fast(config, omega_K, options):
    pulse = config.pulse
    Tp = pulse.T_p
    Q = energy_mismatch_Q(config, omega_K)
    n_coarse = options.coarse_per_cycle * pulse.n_osc
    tc = np.linspace(0.0, Tp, n_coarse + 1)
    Hdot_c, kv = _kernels_on_grid(config, omega_K, tc)

    rate = float(np.max(np.abs(Q + Hdot_c)))
    n_fine = max(n_coarse, int(math.ceil(Tp * rate / options.phase_step)))
    n_fine += n_fine % 2
    tf = np.linspace(0.0, Tp, n_fine + 1)
    Hdot_f = H_rate(config, tf)
    H_f = cumulative_simpson(Hdot_f, x=tf, initial=0.0)
    phase = np.exp(1j * (Q * tf + H_f))

    g1 = CubicSpline(tc, kv.dB_dt + 1j * Hdot_c * kv.B)(tf)
    R1 = 1j * simpson(phase * g1, x=tf)
    R2 = 0.0j
    if config.flags.gauge:
        g2 = CubicSpline(tc, kv.C)(tf)
        R2 = -simpson(phase * g2, x=tf) / config.c_au
    H_Tp = float(H_f[-1])
    R0 = _r0(B_at_start(config, omega_K), H_Tp)
    return AmplitudeParts(complex(R0), complex(R1), complex(R2), H_Tp, float(Q))


def _integrate_reference(config, omega_K, options):
    Tp = config.pulse.T_p
    Q = energy_mismatch_Q(config, omega_K)
    B0 = B_at_start(config, omega_K)
    scale = abs(B0) if B0 != 0 else 1.0
    gauge = config.flags.gauge
    eps_K, n = config.eps_K, config.n

    def rhs(t, y):
        Hdot, kv = _kernels_on_grid(config, omega_K, t)
        Hdot = float(Hdot)
        ph = np.exp(1j * (Q * t + y[0])) / scale
        d1 = 1j * ph * (complex(kv.dB_dt) + 1j * Hdot * complex(kv.B))
        d2 = -ph * complex(kv.C) / config.c_au if gauge else 0.0j
        return [Hdot, d1.real, d1.imag, d2.real, d2.imag]

    sol = solve_ivp(rhs, (0.0, Tp), [0.0] * 5, method="DOP853",
                    rtol=options.rtol, atol=options.atol)
    if not sol.success:
        raise NumericalFailure(f"ODE integration failed at omega_K={omega_K!r}: {sol.message}")
    y = sol.y[:, -1]
    H_Tp = float(y[0])
    R1 = complex(y[1], y[2]) * scale
    R2 = complex(y[3], y[4]) * scale if gauge else 0.0j
    return AmplitudeParts(complex(_r0(B0, H_Tp)), R1, R2, H_Tp, float(Q))


def quadrature_R1(config: ScatteringConfig, omega_K: float, tol: float = 1e-10,
                  panel_phase: float = 4.0, order: int = 20, max_panels: int = 200_000) -> complex:
    """Independent evaluation of R1 by composite Gauss-Legendre quadrature.

    Panels carry about ``panel_phase`` radians of the phase Q t + H(t). H at
    every node is itself a Gauss-Legendre integral of H' from the panel start,
    so no spline, running sum or ODE from the integration paths is reused.
    The panel count doubles until successive estimates agree to ``tol``.
    """
    Tp = config.pulse.T_p
    Q = energy_mismatch_Q(config, omega_K)
    xg, wg = roots_legendre(order)
    probe = np.linspace(0.0, Tp, 4001)
    rate = float(np.max(np.abs(Q + H_rate(config, probe))))
    n_panels = max(4, int(math.ceil(Tp * rate / panel_phase)))
    previous = None
    while n_panels <= max_panels:
        edges = np.linspace(0.0, Tp, n_panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = mid[:, None] + half[:, None] * xg
        # H over whole panels, then from each panel start to each of its nodes
        panel_H = np.sum(half[:, None] * wg * H_rate(config, nodes.ravel()).reshape(nodes.shape), axis=1)
        H_start = np.concatenate([[0.0], np.cumsum(panel_H)[:-1]])
        sub_half = 0.5 * (nodes - edges[:-1, None])
        sub = (edges[:-1, None, None] + sub_half[:, :, None] * (1.0 + xg))
        sub_rate = H_rate(config, sub.ravel()).reshape(sub.shape)
        H = H_start[:, None] + np.sum(sub_half[:, :, None] * wg * sub_rate, axis=2)
        t = nodes.ravel()
        Hdot, kv = _kernels_on_grid(config, omega_K, t)
        g = kv.dB_dt + 1j * Hdot * kv.B
        estimate = complex(1j * np.sum((half[:, None] * wg).ravel() * np.exp(1j * (Q * t + H.ravel())) * g))
        if previous is not None and abs(estimate - previous) <= tol * abs(estimate):
            return estimate
        previous = estimate
        n_panels *= 2
    raise NumericalFailure(f"R1 quadrature did not converge at omega_K={omega_K!r}")


# --- Boca-Florescu regularisation --------------------------------------------

def boca_florescu_oracle(Q: float, H, f, eps_list, T_p: float, nodes: int = 4000):
    """Regularised integral I_eps = int exp(-eps|t| + i Q t) exp(i H(t)) f(t) dt.

    ``H`` and ``f`` are callables on [0, T_p]; outside the pulse H and f are
    frozen at their boundary values (H(t<0) = 0), which makes both tails
    elementary. The inner part uses composite Gauss-Legendre quadrature.
    Returns one value per entry of ``eps_list``.
    """
    if Q == 0.0:
        raise ValueError("Q must be nonzero")
    x, w = _gl_composite(0.0, T_p, nodes)
    F_inner = np.exp(1j * H(x)) * f(x)
    F0 = complex(np.exp(1j * H(0.0)) * f(0.0))
    FT = complex(np.exp(1j * H(T_p)) * f(T_p))
    out = []
    for eps in eps_list:
        left = F0 / (eps + 1j * Q)
        right = FT * np.exp((1j * Q - eps) * T_p) / (eps - 1j * Q)
        inner = np.sum(w * np.exp((1j * Q - eps) * x) * F_inner)
        out.append(complex(left + inner + right))
    return np.array(out)


def boca_florescu_limit(Q: float, H, Hdot, f, fdot, T_p: float, nodes: int = 4000) -> complex:
    """eps -> 0 limit of I_eps for Q != 0: i/Q int exp(iQt + iH) (f' + i H' f) dt."""
    if Q == 0.0:
        raise ValueError("Q must be nonzero")
    x, w = _gl_composite(0.0, T_p, nodes)
    integrand = np.exp(1j * (Q * x + H(x))) * (fdot(x) + 1j * Hdot(x) * f(x))
    return complex(1j / Q * np.sum(w * integrand))


def _gl_composite(a, b, nodes, order=20):
    panels = max(1, nodes // order)
    x, w = roots_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


# --- wave-packet averaging and the energy distribution -----------------------

def _linewidth(config, omega_K):
    excess = config.E_B + omega_K
    if excess <= 0.0:
        raise ValueError(f"omega_K={omega_K!r} is below the threshold {-config.E_B!r}")
    return math.sqrt(2.0 * excess) * config.dp


def averaged_distributions(config: ScatteringConfig, omega_K: float):
    """Lorentzian-averaged (<delta(Q)>, <P(1/Q)>)."""
    gamma = _linewidth(config, omega_K)
    Q = energy_mismatch_Q(config, omega_K)
    denom = Q * Q + gamma * gamma
    return gamma / (math.pi * denom), Q / denom


def averaged_R(config: ScatteringConfig, omega_K: float, parts: AmplitudeParts | None = None,
               options: IntegrationOptions | None = None) -> complex:
    if parts is None:
        parts = integrate_amplitude(config, omega_K, options)
    avg_delta, avg_pv = averaged_distributions(config, omega_K)
    return parts.R0 * avg_delta + parts.R1 * avg_pv + parts.R2


def distribution_prefactor(config: ScatteringConfig) -> float:
    """nu^4 e^(pi nu)/sinh(pi nu) * alpha |p|^2 / ((2 pi)^2 c^2)."""
    nu = config.nu
    coulomb = nu**4 * 2.0 / (1.0 - math.exp(-2.0 * math.pi * nu))
    c = config.c_au
    return coulomb * (1.0 / c) * config.p_mag**2 / ((2.0 * math.pi) ** 2 * c**2)


def energy_distribution(config: ScatteringConfig, omega_K: float,
                        options: IntegrationOptions | None = None) -> float:
    """Triply differential energy distribution d^3E / (d omega d^2 Omega)."""
    return _d3E(config, omega_K, averaged_R(config, omega_K, options=options))


def _d3E(config, omega_K, R) -> float:
    omega_K = float(omega_K)
    return distribution_prefactor(config) * omega_K**4 * abs(complex(R)) ** 2


def _point(args):
    config, omega_K, options = args
    _linewidth(config, omega_K)
    parts = integrate_amplitude(config, omega_K, options)
    R = averaged_R(config, omega_K, parts)
    return parts, R


def _run_points(tasks, workers):
    results, failures = [None] * len(tasks), []

    def record(i, item):
        try:
            results[i] = item()
        except Exception as exc:  # collected and re-raised with indices below
            failures.append((i, exc))

    if workers <= 1 or len(tasks) <= 1:
        for i, task in enumerate(tasks):
            record(i, lambda task=task: _point(task))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_point, task) for task in tasks]
            for i, fut in enumerate(futures):
                record(i, fut.result)
    if failures:
        idx = [i for i, _ in failures]
        raise NumericalFailure(f"{len(idx)} grid point(s) failed, first: {failures[0][1]}", idx)
    return results


def _validate_grid(config, omega_grid):
    grid = np.asarray(omega_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("omega grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("omega grid must be strictly increasing")
    below = np.nonzero(grid <= -config.E_B)[0]
    if below.size:
        raise NumericalFailure("grid points at or below threshold", below)
    return grid


def scan_spectrum(config: ScatteringConfig, omega_grid, options: IntegrationOptions | None = None,
                  workers: int = 1, keep_parts: bool = False) -> SpectrumResult:
    """Energy distribution on a grid; points are independent and assembled by index."""
    grid = _validate_grid(config, omega_grid)
    options = options or IntegrationOptions()
    out = _run_points([(config, float(w), options) for w in grid], workers)
    R = np.array([r for _, r in out], dtype=complex)
    d3E = np.array([_d3E(config, w, r) for w, r in zip(grid, R)])
    return SpectrumResult(grid, d3E, R, [p for p, _ in out] if keep_parts else None)


def angular_map(config: ScatteringConfig, theta_grid, omega_grid,
                options: IntegrationOptions | None = None, workers: int = 1) -> np.ndarray:
    """d3E on a (theta_p, omega_K) grid; rows follow theta_grid."""
    thetas = np.asarray(theta_grid, dtype=float)
    if np.any((thetas <= 0.0) | (thetas >= math.pi)):
        raise ValueError("theta_p must lie in (0, pi)")
    grid = _validate_grid(config, omega_grid)
    options = options or IntegrationOptions()
    configs = [replace(config, theta_p=float(th)) for th in thetas]
    tasks = [(cfg, float(w), options) for cfg in configs for w in grid]
    out = _run_points(tasks, workers)
    d3E = [_d3E(cfg, w, r) for (cfg, w, _), (_, r) in zip(tasks, out)]
    return np.array(d3E).reshape(len(thetas), len(grid))
