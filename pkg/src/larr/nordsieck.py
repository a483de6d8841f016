"""Analytic Coulomb matrix-element kernel built on the Nordsieck integral.

The closed form f = 4 pi zeta (1 + xi)^(-i nu) factorises as

    f = 4 pi a^(-1 + i nu) b^(-i nu),
    a = lambda^2 + q^2,       b = (q - p)^2 + (lambda - i|p|)^2,

since 1 + xi = b / a with a > 0 (so the principal logarithm splits). Both a
and b are quadratic in (lambda, q) with Hessian 2*I, which makes every mixed
directional derivative a finite sum: Faa di Bruno for each power (only first
and second derivatives of the base survive) combined with the Leibniz rule
over subsets of directions. B, C, dB/dt and grad_q B are all read off that
one routine; no numerical differentiation is involved.

Im b = -2 lambda |p| < 0, so b never touches the branch cut of the principal
power and the kernels are continuous along any trajectory q(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma as complex_gamma
from scipy.special import j0, roots_legendre

FOUR_PI = 4.0 * math.pi


class BranchCutError(ValueError):
    """1 + xi sits on the negative real axis, where the complex power is ambiguous."""


class NonConvergenceError(RuntimeError):
    """The quadrature oracle could not reach the requested tolerance."""


@dataclass(frozen=True)
class NordsieckArgs:
    """Arguments of the Nordsieck kernel.

    ``q`` may be a single 3-vector or an array of shape (3, N) (one column per
    time sample); ``nu``, ``lam`` and ``p`` are shared.
    """

    nu: float
    lam: float
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if not self.lam > 0.0:
            raise ValueError("lambda must be positive")
        if not np.linalg.norm(self.p) > 0.0:
            raise ValueError("|p| must be positive")

    @property
    def k(self) -> float:
        return float(np.linalg.norm(self.p))

    @property
    def zeta(self):
        return 1.0 / (self.lam**2 + _dot(self.q, self.q))

    @property
    def xi(self):
        return -2.0 * self.zeta * (_dot(self.p, self.q) + 1j * self.lam * self.k)


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _components(v):
    return v.tolist() if isinstance(v, np.ndarray) and v.ndim == 1 else v


def _check_branch(args: NordsieckArgs):
    w = 1.0 + args.xi
    bad = (np.real(w) < 0.0) & (np.abs(np.imag(w)) <= 1e-14 * np.abs(w))
    if np.any(bad):
        raise BranchCutError("1 + xi lies on the negative real axis")


@lru_cache(maxsize=None)
def _pairings(indices: tuple[int, ...]) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All partitions of ``indices`` into blocks of size one or two."""
    if not indices:
        return ((),)
    first, rest = indices[0], indices[1:]
    out = [((first,),) + tail for tail in _pairings(rest)]
    for j, other in enumerate(rest):
        remaining = rest[:j] + rest[j + 1:]
        out.extend(((first, other),) + tail for tail in _pairings(remaining))
    return tuple(out)


@lru_cache(maxsize=None)
def _splits(subset: tuple[int, ...]):
    """All ordered (left, right) partitions of ``subset`` into two sub-tuples."""
    m = len(subset)
    out = []
    for mask in range(1 << m):
        left = tuple(subset[i] for i in range(m) if mask >> i & 1)
        right = tuple(subset[i] for i in range(m) if not mask >> i & 1)
        out.append((left, right))
    return tuple(out)


class _PowerJet:
    """Mixed directional derivatives of u^alpha for a quadratic u with Hessian 2*I."""

    def __init__(self, base, alpha, first, second):
        self.base = base
        self.alpha = alpha
        self.first = first    # first[i]   = du along direction i
        self.second = second  # second[i][j] = d2u along (i, j), constant
        self.power = base**alpha
        self._coef = [self.power]
        self._memo = {}

    def _coefficient(self, m):
        # (alpha)_m u^(alpha - m), built up incrementally
        while len(self._coef) <= m:
            j = len(self._coef) - 1
            self._coef.append(self._coef[-1] * (self.alpha - j) / self.base)
        return self._coef[m]

    def __call__(self, subset: tuple[int, ...]):
        memo = self._memo.get(subset)
        if memo is not None:
            return memo
        total = 0.0
        first, second = self.first, self.second
        for blocks in _pairings(subset):
            term = self._coefficient(len(blocks))
            for blk in blocks:
                term = term * (first[blk[0]] if len(blk) == 1 else second[blk[0]][blk[1]])
            total = total + term
        self._memo[subset] = total
        return total


class KernelJet:
    """Derivatives of f(nu, lambda, q, p) along a fixed list of directions.

    Each direction is a pair ``(d_lambda, d_q)``; ``d_q`` is a 3-vector or a
    (3, N) array matching ``args.q``.
    """

    def __init__(self, args: NordsieckArgs, directions):
        _check_branch(args)
        lam, q, p, k, nu = args.lam, args.q, args.p, args.k, args.nu
        if q.ndim == 1:
            # plain floats are much cheaper than numpy scalars for single points
            q, p = q.tolist(), p.tolist()
            directions = [(float(dl), _components(dq)) for dl, dq in directions]
        qp = (q[0] - p[0], q[1] - p[1], q[2] - p[2])
        lam_b = lam - 1j * k
        a = lam * lam + _dot(q, q)
        b = _dot(qp, qp) + lam_b * lam_b
        a1, b1 = [], []
        for dl, dq in directions:
            a1.append(2.0 * (lam * dl + _dot(q, dq)))
            b1.append(2.0 * (lam_b * dl + _dot(qp, dq)))
        n = len(directions)
        second = [[2.0 * (directions[i][0] * directions[j][0] + _dot(directions[i][1], directions[j][1]))
                   for j in range(n)] for i in range(n)]
        self._a = _PowerJet(a, -1.0 + 1j * nu, a1, second)
        self._b = _PowerJet(b, -1j * nu, b1, second)

    def value(self):
        return FOUR_PI * self._a(()) * self._b(())

    def derivative(self, subset) -> np.ndarray:
        """d^|S| f along the directions listed in ``subset`` (Leibniz over subsets)."""
        total = 0.0
        for left, right in _splits(tuple(sorted(subset))):
            total = total + self._a(left) * self._b(right)
        return FOUR_PI * total


_LAMBDA = (1.0, (0.0, 0.0, 0.0))


def _qdir(v):
    return (0.0, v)


def nordsieck_f(args: NordsieckArgs):
    """f = 4 pi zeta (1 + xi)^(-i nu) on the principal branch."""
    _check_branch(args)
    return FOUR_PI * args.zeta * (1.0 + args.xi) ** (-1j * args.nu)


def kernel_B(args: NordsieckArgs, eps_K):
    """B = i d/dlambda (eps_K . grad_q) f."""
    jet = KernelJet(args, [_LAMBDA, _qdir(eps_K)])
    return 1j * jet.derivative((0, 1))


def kernel_C(args: NordsieckArgs, eps_K, eE, n_prop):
    """C = -i d/dlambda (eps_K . grad_q)(eE . grad_q)(n . grad_q) f."""
    jet = KernelJet(args, [_LAMBDA, _qdir(eps_K), _qdir(eE), _qdir(n_prop)])
    return -1j * jet.derivative((0, 1, 2, 3))


def kernel_B_gradient(args: NordsieckArgs, eps_K) -> np.ndarray:
    """grad_q B, stacked along the first axis."""
    dirs = [_LAMBDA, _qdir(eps_K)] + [_qdir(e) for e in np.eye(3)]
    jet = KernelJet(args, dirs)
    return np.array([1j * jet.derivative((0, 1, 2 + j)) for j in range(3)])


def kernel_B_time_derivative(args: NordsieckArgs, eps_K, qdot):
    """dB/dt = grad_q B . dq/dt."""
    jet = KernelJet(args, [_LAMBDA, _qdir(eps_K), _qdir(qdot)])
    return 1j * jet.derivative((0, 1, 2))


@dataclass
class KernelValues:
    f: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dB_dt: np.ndarray


def kernel_values(args: NordsieckArgs, eps_K, qdot, eE=None, n_prop=None) -> KernelValues:
    """B, dB/dt and (optionally) C sharing one derivative jet."""
    dirs = [_LAMBDA, _qdir(eps_K), _qdir(qdot)]
    with_c = eE is not None
    if with_c:
        dirs += [_qdir(eE), _qdir(n_prop)]
    jet = KernelJet(args, dirs)
    B = 1j * jet.derivative((0, 1))
    dB = 1j * jet.derivative((0, 1, 2))
    C = -1j * jet.derivative((0, 1, 3, 4)) if with_c else np.zeros_like(B)
    return KernelValues(jet.value(), B, C, dB)


# --- brute-force oracle -----------------------------------------------------

_SERIES_LIMIT = 20.0


def hyp1f1_imag(nu: float, y) -> np.ndarray:
    """1F1(i nu; 1; i y) for real y >= 0.

    Power series for y <= 20, two-term asymptotic expansion (optimally
    truncated) beyond that. Series cancellation grows like e^y, so accuracy
    is about 1e-7 relative for nu <= 2: oracle grade, not a library routine.
    """
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape, dtype=complex)
    small = y <= _SERIES_LIMIT
    if np.any(small):
        out[small] = _series(nu, 1j * y[small])
    if np.any(~small):
        out[~small] = _asymptotic(nu, 1j * y[~small])
    return out


def _series(nu, z):
    a = 1j * nu
    term = np.ones_like(z)
    total = term.copy()
    for n in range(400):
        term = term * (a + n) * z / ((n + 1) ** 2)
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _asymptotic(nu, z, max_terms: int = 60):
    a = 1j * nu
    ga, gba = complex_gamma(a) if nu != 0.0 else np.inf, complex_gamma(1.0 - a)
    s1 = _optimal_sum(lambda s: (1 - a + s - 1) * (1 - a + s - 1) / s, z, max_terms)
    s2 = _optimal_sum(lambda s: (a + s - 1) * (a + s - 1) / s, -z, max_terms)
    first = np.exp(z) * z ** (a - 1.0) / ga * s1
    second = np.exp(1j * math.pi * a) * z ** (-a) / gba * s2
    return first + second


def _optimal_sum(ratio, z, max_terms):
    """sum_s c_s z^-s with c_s / c_{s-1} = ratio(s), stopped at the smallest term."""
    term = np.ones_like(z)
    total = term.copy()
    last = np.abs(term)
    active = np.ones(z.shape, dtype=bool)
    for s in range(1, max_terms):
        term = term * ratio(s) / z
        mag = np.abs(term)
        active &= mag < last
        if not np.any(active):
            break
        total = np.where(active, total + term, total)
        last = np.where(active, mag, last)
    return total


def quadrature_oracle_f(args: NordsieckArgs, tol: float = 1e-6, max_nodes: int = 4_000_000):
    """Direct numerical evaluation of the Nordsieck integral for a single q.

    Spherical coordinates with the polar axis along p; the azimuthal
    integral is done exactly (J0), radius and cos(theta) by composite
    Gauss-Legendre. The radial range is truncated at r_max = 40/lambda. The
    panel count is doubled until two successive estimates agree to ``tol``;
    :class:`NonConvergenceError` is raised when the next refinement would
    exceed ``max_nodes`` integrand evaluations.
    """
    q = np.asarray(args.q, dtype=float)
    if q.shape != (3,):
        raise ValueError("the oracle handles one q at a time")
    k = args.k
    phat = args.p / k
    q_par = float(q @ phat)
    q_perp = float(np.linalg.norm(q - q_par * phat))
    r_max = 40.0 / args.lam
    # phase accumulated per unit radius, bounding both the r and u oscillations
    freq = 2.0 * k + abs(q_par) + q_perp + args.lam

    def layout(level):
        r_panels = int(math.ceil(r_max * freq / _PHASE_PER_PANEL * level)) + 2
        xr, wr = _composite_gl(0.0, r_max, r_panels)
        u_panels = np.ceil(xr * freq / _PHASE_PER_PANEL * level).astype(int) + 1
        return xr, wr, u_panels

    def estimate(xr, wr, u_panels):
        total = 0.0 + 0.0j
        for r, w, nu_p in zip(xr, wr, u_panels):
            xu, wu = _composite_gl(-1.0, 1.0, int(nu_p))
            integrand = (np.exp(1j * r * q_par * xu)
                         * j0(r * q_perp * np.sqrt(np.clip(1.0 - xu**2, 0.0, None)))
                         * hyp1f1_imag(args.nu, k * r * (1.0 - xu)))
            total += w * r * math.exp(-args.lam * r) * (wu @ integrand)
        return 2.0 * math.pi * total

    prev = None
    level = 1
    while True:
        xr, wr, u_panels = layout(level)
        if int(u_panels.sum()) * _GL_ORDER > max_nodes:
            raise NonConvergenceError(
                f"quadrature needs more than {max_nodes} nodes at tol={tol:g} "
                f"(|p|={k:g}, r_max={r_max:g})")
        cur = estimate(xr, wr, u_panels)
        if prev is not None and abs(cur - prev) <= tol * abs(cur):
            return cur
        prev = cur
        level *= 2


_PHASE_PER_PANEL = 8.0
_GL_ORDER = 16


@lru_cache(maxsize=None)
def _gl_nodes(order: int):
    return roots_legendre(order)


def _composite_gl(lo, hi, panels, order=_GL_ORDER):
    x, w = _gl_nodes(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights
