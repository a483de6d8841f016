"""Independent checks of the analytic kernels and integrals.

Everything here is deliberately simple and slow: nested central finite
differences with Richardson extrapolation for the derivative kernels, random
argument generators for sweeps, and a report builder used by the
``validate-kernels`` subcommand.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from itertools import product

import mpmath
import numpy as np

from .amplitude import boca_florescu_limit, boca_florescu_oracle
from .nordsieck import NordsieckArgs

_STENCIL = ((2, -1 / 12), (1, 8 / 12), (-1, -8 / 12), (-2, 1 / 12))
FD_DIGITS = 40


def nordsieck_f_mp(nu, lam, q, p):
    """f = 4 pi a^(-1 + i nu) b^(-i nu) in mpmath arithmetic at the current precision.

    a = lambda^2 + q^2 and b = (q - p)^2 + (lambda - i|p|)^2; principal branch.
    """
    k = mpmath.sqrt(sum(mpmath.mpf(c) ** 2 for c in p))
    a = lam**2 + sum(c**2 for c in q)
    b = sum((qc - pc) ** 2 for qc, pc in zip(q, p)) + (lam - 1j * k) ** 2
    return 4 * mpmath.pi * mpmath.power(a, -1 + 1j * nu) * mpmath.power(b, -1j * nu)


def _nested_fd(args: NordsieckArgs, directions, h) -> complex:
    """Nested fourth-order central differences of f along unit directions."""
    nu = mpmath.mpf(args.nu)
    lam0 = mpmath.mpf(args.lam)
    q0 = [mpmath.mpf(float(c)) for c in np.asarray(args.q, dtype=float)]
    p = [mpmath.mpf(float(c)) for c in np.asarray(args.p, dtype=float)]
    dirs = [(mpmath.mpf(dl), [mpmath.mpf(float(c)) for c in dq]) for dl, dq in directions]
    total = mpmath.mpc(0)
    for combo in product(_STENCIL, repeat=len(dirs)):
        lam, q, weight = lam0, list(q0), mpmath.mpf(1)
        for (k, w), (d_lam, d_q) in zip(combo, dirs):
            lam += k * h * d_lam
            q = [qc + k * h * dc for qc, dc in zip(q, d_q)]
            weight *= mpmath.mpf(w)
        total += weight * nordsieck_f_mp(nu, lam, q, p)
    return total / h ** len(dirs)


def mixed_derivative_fd(args: NordsieckArgs, directions, h: float | None = None) -> complex:
    """Mixed directional derivative of f by finite differences.

    Each direction is a pair (d_lambda, d_q). Directions are normalised
    internally and the result rescaled, so ``h`` is a step length in the
    joint (lambda, q) space. f is evaluated with ``FD_DIGITS`` significant
    digits, which removes cancellation, and Richardson extrapolation over h
    and h/2 removes the leading h^4 error.
    """
    h = 0.005 * args.lam if h is None else h
    units, scale = [], 1.0
    for d_lam, d_q in directions:
        d_q = np.asarray(d_q, dtype=float)
        norm = math.sqrt(d_lam * d_lam + float(d_q @ d_q))
        if norm == 0.0:
            return 0.0j
        units.append((d_lam / norm, d_q / norm))
        scale *= norm
    with mpmath.workdps(FD_DIGITS):
        step = mpmath.mpf(h)
        coarse = _nested_fd(args, units, step)
        fine = _nested_fd(args, units, step / 2)
        return complex(scale * (16 * fine - coarse) / 15)


def _lam_dir():
    return (1.0, np.zeros(3))


def _q_dir(v):
    return (0.0, np.asarray(v, dtype=float))


def kernel_B_fd(args: NordsieckArgs, eps_K, h: float | None = None) -> complex:
    return 1j * mixed_derivative_fd(args, [_lam_dir(), _q_dir(eps_K)], h)


def kernel_C_fd(args: NordsieckArgs, eps_K, eE, n_prop, h: float | None = None) -> complex:
    dirs = [_lam_dir(), _q_dir(eps_K), _q_dir(eE), _q_dir(n_prop)]
    return -1j * mixed_derivative_fd(args, dirs, h)


def kernel_B_time_derivative_fd(args: NordsieckArgs, eps_K, qdot, h: float | None = None) -> complex:
    return 1j * mixed_derivative_fd(args, [_lam_dir(), _q_dir(eps_K), _q_dir(qdot)], h)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def random_moderate_args(rng: np.random.Generator) -> NordsieckArgs:
    """Arguments where the brute-force quadrature of f is affordable."""
    nu = rng.uniform(0.2, 2.0)
    lam = rng.uniform(0.5, 3.0)
    p = rng.uniform(0.5, 3.0) * _unit(rng.normal(size=3))
    q = rng.uniform(-2.0, 2.0, size=3)
    return NordsieckArgs(nu, lam, q, p)


def random_physical_args(rng: np.random.Generator) -> NordsieckArgs:
    """keV electrons on light ions: |p| of 10..30, lambda = Z, q = p - K - eA."""
    Z = float(rng.integers(1, 7))
    p = rng.uniform(10.0, 30.0) * _unit(rng.normal(size=3))
    K = rng.uniform(0.0, 6.0) * _unit(rng.normal(size=3))
    eA = rng.uniform(-10.0, 10.0) * np.array([1.0, 0.0, 0.0])
    return NordsieckArgs(Z / float(np.linalg.norm(p)), Z, p - K - eA, p)


def random_unit(rng: np.random.Generator) -> np.ndarray:
    return _unit(rng.normal(size=3))


def relative_error(value, reference) -> float:
    reference = complex(reference)
    return abs(complex(value) - reference) / max(abs(reference), 1e-300)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)), 1)[0])


@dataclass
class CheckResult:
    name: str
    samples: int
    worst: float
    tolerance: float
    passed: bool
    seconds: float

    def as_row(self):
        return [self.name, self.samples, self.worst, self.tolerance, int(self.passed), self.seconds]


def run_check(name: str, errors_fn, tolerance: float, samples: int) -> CheckResult:
    """Evaluate ``errors_fn`` (returning a list of errors) and compare the worst with the tolerance."""
    start = time.perf_counter()
    errors = list(errors_fn())
    worst = float(max(errors)) if errors else float("nan")
    passed = bool(errors) and worst <= tolerance
    return CheckResult(name, samples, worst, tolerance, passed, time.perf_counter() - start)


@dataclass(frozen=True)
class ToyIntegral:
    """A smooth (f, H) pair on [0, T_p] for regularisation checks."""

    name: str
    Q: float
    T_p: float
    H: object
    Hdot: object
    f: object
    fdot: object


def boca_florescu_toys() -> list[ToyIntegral]:
    T = 10.0
    return [
        ToyIntegral("sine-squared bump", 1.3, T,
                    lambda t: np.zeros_like(t, dtype=float), lambda t: np.zeros_like(t, dtype=float),
                    lambda t: np.sin(np.pi * t / T) ** 2 + 0j,
                    lambda t: np.pi / T * np.sin(2 * np.pi * t / T) + 0j),
        ToyIntegral("quadratic phase, linear ramp", -0.7, T,
                    lambda t: 0.05 * t**2, lambda t: 0.1 * t,
                    lambda t: 1.0 + t / T + 0j, lambda t: np.full_like(t, 1.0 / T, dtype=complex)),
        ToyIntegral("oscillating phase, damped carrier", 2.0, T,
                    lambda t: np.sin(t), lambda t: np.cos(t),
                    lambda t: np.exp(-0.2 * t) * np.exp(0.5j * t),
                    lambda t: (-0.2 + 0.5j) * np.exp(-0.2 * t) * np.exp(0.5j * t)),
    ]


def boca_florescu_errors(toy: ToyIntegral, factors=(1e-2, 1e-3, 1e-4, 1e-5)):
    """(eps, |I_eps - I_limit|) for eps = factor / T_p."""
    eps = np.asarray(factors, dtype=float) / toy.T_p
    values = boca_florescu_oracle(toy.Q, toy.H, toy.f, eps, toy.T_p)
    limit = boca_florescu_limit(toy.Q, toy.H, toy.Hdot, toy.f, toy.fdot, toy.T_p)
    return eps, np.abs(values - limit)
