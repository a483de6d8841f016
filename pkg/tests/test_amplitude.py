import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import P_FIG, RECOIL_ONLY, scattering, sine2_pulse
from larr.amplitude import (
    IntegrationOptions,
    NondipoleFlags,
    NumericalFailure,
    ScatteringConfig,
    angular_map,
    averaged_distributions,
    averaged_R,
    B_at_start,
    boca_florescu_limit,
    boca_florescu_oracle,
    distribution_prefactor,
    energy_distribution,
    energy_mismatch_Q,
    H_rate,
    integrate_amplitude,
    photon_momentum,
    q_of_t,
    quadrature_R1,
    recoil_factor,
    scan_spectrum,
)
from larr.analysis import cutoff
from larr.core import C_AU, energy_ev_to_au, momentum_from_energy
from larr.oracles import boca_florescu_toys, loglog_slope
from larr.pulse import make_pulse

REFERENCE = IntegrationOptions(method="reference")
FLAG_NAMES = ("recoil", "retardation", "gauge", "photon_momentum")


def flags_on(*names):
    return NondipoleFlags(**{n: n in names for n in FLAG_NAMES})


# --- kinematics ----------------------------------------------------------------

def test_config_rejects_invalid_values():
    for kwargs in ({"Z": 0.5}, {"p_mag": 0.0}, {"dp": 0.0}, {"c_au": -1.0}):
        base = dict(Z=4.0, p_mag=P_FIG, theta_p=1.0, phi_p=0.0, dp=1e-5, pulse=sine2_pulse())
        base.update(kwargs)
        with pytest.raises(ValueError):
            ScatteringConfig(**base)


def test_derived_quantities(fig2):
    assert fig2.E_B == -8.0
    assert fig2.nu == pytest.approx(4.0 / P_FIG, rel=1e-15)
    assert fig2.lam == 4.0


def test_field_free_peak_has_zero_mismatch(fig2):
    assert fig2.peak_energy == pytest.approx(375.4932217566, abs=1e-9)
    assert energy_mismatch_Q(fig2, fig2.peak_energy) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(-50.0, 50.0))
def test_mismatch_is_linear_in_photon_energy(delta):
    cfg = scattering()
    assert energy_mismatch_Q(cfg, cfg.peak_energy + delta) == pytest.approx(delta, abs=1e-10)


def test_threshold_mismatch_for_slow_electron():
    cfg = ScatteringConfig(4.0, 1e-8, 1.0, 0.0, 1e-5, sine2_pulse())
    assert energy_mismatch_Q(cfg, 8.0) == pytest.approx(0.0, abs=1e-15)


def test_q_reduces_to_p_without_field_or_flags():
    cfg = scattering(pulse=sine2_pulse(0.0), flags=NondipoleFlags.dipole())
    assert np.array_equal(q_of_t(cfg, 400.0, 3.0), cfg.p_vec)


def test_photon_momentum_magnitude(fig2):
    K = photon_momentum(fig2, 375.0)
    assert np.linalg.norm(K) == pytest.approx(375.0 / C_AU, rel=1e-14)
    assert np.linalg.norm(K) == pytest.approx(2.7365, abs=1e-4)
    assert np.array_equal(photon_momentum(replace(fig2, flags=NondipoleFlags.dipole()), 375.0), np.zeros(3))


def test_retardation_shift_along_n_at_perpendicular_incidence():
    cfg = scattering(theta_pi=0.5, flags=flags_on("retardation"))
    dip = replace(cfg, flags=NondipoleFlags.dipole())
    t = 0.5 * cfg.pulse.T_p
    shift = q_of_t(cfg, 400.0, t) - q_of_t(dip, 400.0, t)
    eA = (dip.p_vec - q_of_t(dip, 400.0, t))
    pond = float(eA @ cfg.p_vec - 0.5 * eA @ eA)
    assert np.allclose(np.cross(shift, cfg.n), 0.0, atol=1e-15)
    assert np.linalg.norm(shift) == pytest.approx(abs(pond) / C_AU, rel=1e-12)
    assert recoil_factor(cfg) == 1.0


def test_recoil_factor_examples(fig2):
    assert recoil_factor(fig2) == pytest.approx(1.0 + math.cos(0.432 * math.pi) * P_FIG / C_AU, rel=1e-14)
    # cos(0.432 pi) = 0.2120071; 1 + 0.2120071 * 27.110633 / 137.035999 = 1.0419426
    assert recoil_factor(fig2) == pytest.approx(1.0419426068, abs=1e-9)
    assert recoil_factor(scattering(theta_pi=0.5)) == pytest.approx(1.0, abs=1e-16)
    assert recoil_factor(replace(fig2, flags=NondipoleFlags.dipole())) == 1.0


def test_H_rate_vanishes_without_field():
    cfg = scattering(pulse=sine2_pulse(0.0))
    assert np.all(H_rate(cfg, np.linspace(0.0, cfg.pulse.T_p, 11)) == 0.0)


# --- amplitude integration -----------------------------------------------------

@pytest.mark.parametrize("method", ["fast", "reference"])
def test_zero_field_parts(method):
    cfg = scattering(pulse=sine2_pulse(0.0))
    parts = integrate_amplitude(cfg, 380.0, IntegrationOptions(method=method))
    assert parts.R1 == 0.0 and parts.R2 == 0.0 and parts.H_Tp == 0.0
    assert parts.R0 == pytest.approx(2.0 * math.pi * B_at_start(cfg, 380.0), rel=1e-15)


def test_B_at_start_includes_photon_momentum(fig2):
    from larr.nordsieck import NordsieckArgs, kernel_B
    q0 = fig2.p_vec - photon_momentum(fig2, 380.0)
    expected = kernel_B(NordsieckArgs(fig2.nu, fig2.lam, q0, fig2.p_vec), fig2.eps_K)
    assert B_at_start(fig2, 380.0) == expected


def test_gauge_flag_off_gives_zero_R2(fig2):
    cfg = replace(fig2, flags=replace(fig2.flags, gauge=False))
    assert integrate_amplitude(cfg, 500.0).R2 == 0.0
    assert integrate_amplitude(cfg, 500.0, REFERENCE).R2 == 0.0


@pytest.mark.slow
def test_reference_tolerance_halving(fig2):
    coarse = integrate_amplitude(fig2, 500.0, REFERENCE)
    fine = integrate_amplitude(fig2, 500.0, IntegrationOptions(method="reference", rtol=5e-9, atol=5e-13))
    assert abs(abs(fine.R1) - abs(coarse.R1)) / abs(fine.R1) < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("omega", [380.0, 500.0, 670.0])
def test_R1_matches_independent_quadrature(fig2, omega):
    reference = quadrature_R1(fig2, omega)
    for options in (IntegrationOptions(), REFERENCE):
        R1 = integrate_amplitude(fig2, omega, options).R1
        assert abs(R1 - reference) / abs(reference) < 1e-6


@pytest.mark.parametrize("omega", [300.0, 600.0])
def test_fast_path_grid_refinement(fig2, omega):
    base = integrate_amplitude(fig2, omega)
    dense = integrate_amplitude(fig2, omega, IntegrationOptions(coarse_per_cycle=800, phase_step=0.05))
    for a, b in ((base.R1, dense.R1), (base.R2, dense.R2)):
        assert abs(a - b) / abs(b) < 1e-6
    assert base.H_Tp == pytest.approx(dense.H_Tp, rel=1e-10)


def test_invalid_integration_method():
    with pytest.raises(ValueError):
        IntegrationOptions(method="rk4")


# --- regularised integrals -----------------------------------------------------

def test_constant_integrand_off_resonance_vanishes():
    T = 10.0
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    one = lambda t: np.ones_like(np.asarray(t, dtype=float)) + 0j
    eps = np.array([1e-3, 1e-4, 1e-5]) / T
    values = boca_florescu_oracle(0.9, zero, one, eps, T)
    limit = boca_florescu_limit(0.9, zero, zero, one, lambda t: 0.0 * one(t), T)
    assert limit == 0.0
    assert np.all(np.abs(values) <= 2.0 * eps / 0.81)


def test_sine_squared_toy_converges_linearly():
    T = 10.0
    Q = 3.0 / T
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    f = lambda t: np.sin(np.pi * t / T) ** 2 + 0j
    fdot = lambda t: np.pi / T * np.sin(2 * np.pi * t / T) + 0j
    eps = np.array([1e-2, 1e-3, 1e-4, 1e-5]) / T
    err = np.abs(boca_florescu_oracle(Q, zero, f, eps, T) - boca_florescu_limit(Q, zero, zero, f, fdot, T))
    assert np.max(err / eps) < 1e3
    assert loglog_slope(eps, err) == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("toy", boca_florescu_toys(), ids=lambda toy: toy.name)
def test_toy_slopes(toy):
    from larr.oracles import boca_florescu_errors
    eps, err = boca_florescu_errors(toy)
    assert loglog_slope(eps, err) == pytest.approx(1.0, abs=0.15)


@given(st.complex_numbers(max_magnitude=5.0, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5.0, allow_nan=False, allow_infinity=False))
def test_regularised_integral_is_linear_in_f(a, b):
    T = 10.0
    H = lambda t: 0.05 * np.asarray(t) ** 2
    f = lambda t: np.sin(np.pi * np.asarray(t) / T) ** 2 + 0j
    g = lambda t: np.exp(0.3j * np.asarray(t))
    eps = [1e-3 / T]
    combo = boca_florescu_oracle(0.7, H, lambda t: a * f(t) + b * g(t), eps, T)[0]
    separate = a * boca_florescu_oracle(0.7, H, f, eps, T)[0] + b * boca_florescu_oracle(0.7, H, g, eps, T)[0]
    assert abs(combo - separate) <= 1e-12 * (abs(a) + abs(b) + 1.0) * 100


def test_regularisation_rejects_resonance():
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    with pytest.raises(ValueError):
        boca_florescu_oracle(0.0, one, one, [1e-3], 1.0)
    with pytest.raises(ValueError):
        boca_florescu_limit(0.0, one, one, one, one, 1.0)


# --- wave-packet averaging -----------------------------------------------------

def test_averaged_distributions_at_line_centre(fig2):
    avg_delta, avg_pv = averaged_distributions(fig2, fig2.peak_energy)
    kappa0 = math.sqrt(2.0 * (fig2.E_B + fig2.peak_energy))
    assert avg_delta == pytest.approx(1.0 / (math.pi * kappa0 * fig2.dp), rel=1e-9)
    assert avg_pv == pytest.approx(0.0, abs=1e-3)


def test_averaged_distributions_far_from_line(fig2):
    omega = fig2.peak_energy + 40.0
    avg_delta, avg_pv = averaged_distributions(fig2, omega)
    Q = energy_mismatch_Q(fig2, omega)
    gamma = math.sqrt(2.0 * (fig2.E_B + omega)) * fig2.dp
    assert avg_delta == pytest.approx(gamma / (math.pi * Q * Q), rel=1e-9)
    assert avg_delta * Q < 1e-5
    assert avg_pv == pytest.approx(1.0 / Q, rel=1e-9)


def test_averaged_delta_is_normalised():
    cfg = scattering(dp=1e-3)
    width = math.sqrt(2.0 * (cfg.E_B + cfg.peak_energy)) * cfg.dp
    omega = cfg.peak_energy + np.linspace(-5000.0, 5000.0, 400_001) * width
    omega = omega[omega > -cfg.E_B]
    values = [averaged_distributions(cfg, w)[0] for w in omega]
    assert abs(np.trapezoid(values, omega) - 1.0) < 1e-3


def test_sub_threshold_rejected(fig2):
    with pytest.raises(ValueError):
        averaged_distributions(fig2, 7.0)
    with pytest.raises(NumericalFailure) as info:
        scan_spectrum(fig2, [5.0, 6.0, 300.0])
    assert info.value.indices == [0, 1]


def test_zero_field_average_is_single_line():
    cfg = scattering(pulse=sine2_pulse(0.0))
    for omega in (cfg.peak_energy - 0.01, cfg.peak_energy, 400.0):
        avg_delta, _ = averaged_distributions(cfg, omega)
        assert averaged_R(cfg, omega) == pytest.approx(2.0 * math.pi * B_at_start(cfg, omega) * avg_delta, rel=1e-14)


def test_far_off_resonance_average(fig2):
    omega = 600.0
    parts = integrate_amplitude(fig2, omega)
    expected = parts.R1 / parts.Q + parts.R2
    assert abs(averaged_R(fig2, omega, parts) - expected) / abs(expected) < 1e-6


def test_energy_distribution_nonnegative_and_consistent(fig2):
    omega = 500.0
    value = energy_distribution(fig2, omega)
    assert value >= 0.0
    R = averaged_R(fig2, omega)
    assert value == pytest.approx(distribution_prefactor(fig2) * omega**4 * abs(R) ** 2, rel=1e-14)


@pytest.mark.parametrize("p", [1e2, 1e3, 1e4])
def test_coulomb_factor_small_nu_limit(p):
    cfg = ScatteringConfig(1.0, p, 1.0, 0.0, 1e-5, sine2_pulse())
    nu = cfg.nu
    coulomb = distribution_prefactor(cfg) / ((1.0 / C_AU) * p**2 / ((2.0 * math.pi) ** 2 * C_AU**2))
    # nu^4 e^(pi nu) / sinh(pi nu) = (nu^3 / pi)(1 + pi nu + O(nu^2))
    assert coulomb == pytest.approx(nu**3 / math.pi * (1.0 + math.pi * nu), rel=10 * nu**2)


def test_prefactor_matches_hyperbolic_form(fig2):
    nu = fig2.nu
    expected = nu**4 * math.exp(math.pi * nu) / math.sinh(math.pi * nu) / C_AU * P_FIG**2 / ((2 * math.pi) ** 2 * C_AU**2)
    assert distribution_prefactor(fig2) == pytest.approx(expected, rel=1e-13)


# --- grids ---------------------------------------------------------------------

def test_singleton_grid_matches_direct_call(fig2):
    result = scan_spectrum(fig2, [512.0])
    assert result.d3E[0] == energy_distribution(fig2, 512.0)


def test_permutation_invariance(fig2, rng):
    grid = np.sort(rng.uniform(200.0, 700.0, 12))
    d3E = scan_spectrum(fig2, grid).d3E
    for _ in range(3):
        perm = rng.permutation(grid.size)
        values = [energy_distribution(fig2, w) for w in grid[perm]]
        assert np.array_equal(np.asarray(values)[np.argsort(perm)], d3E)


def test_worker_count_does_not_change_results(fig2):
    grid = np.linspace(300.0, 700.0, 9)
    serial = scan_spectrum(fig2, grid, workers=1)
    parallel = scan_spectrum(fig2, grid, workers=3)
    assert serial.d3E.tobytes() == parallel.d3E.tobytes()
    assert serial.avg_R.tobytes() == parallel.avg_R.tobytes()


def test_grid_validation(fig2):
    for bad in ([], [400.0, 300.0], [[300.0, 400.0]]):
        with pytest.raises(ValueError):
            scan_spectrum(fig2, bad)
    with pytest.raises(ValueError):
        angular_map(fig2, [0.0, 1.0], [400.0])


def test_failures_carry_grid_indices(fig2, monkeypatch):
    import larr.amplitude as amp
    original = amp.integrate_amplitude

    def flaky(config, omega_K, options=None):
        if omega_K in (450.0, 550.0):
            raise NumericalFailure("injected")
        return original(config, omega_K, options)

    monkeypatch.setattr(amp, "integrate_amplitude", flaky)
    with pytest.raises(NumericalFailure) as info:
        scan_spectrum(fig2, [400.0, 450.0, 500.0, 550.0])
    assert info.value.indices == [1, 3]


def test_keep_parts(fig2):
    result = scan_spectrum(fig2, [400.0, 500.0], keep_parts=True)
    assert [p.Q for p in result.parts] == [energy_mismatch_Q(fig2, 400.0), energy_mismatch_Q(fig2, 500.0)]


# --- angular maps and flags ----------------------------------------------------

def test_angular_map_rows_match_spectra(fig2):
    thetas = np.array([0.45, 0.55]) * math.pi
    grid = np.array([600.0, 650.0])
    M = angular_map(fig2, thetas, grid)
    for row, th in zip(M, thetas):
        assert np.array_equal(row, scan_spectrum(replace(fig2, theta_p=th), grid).d3E)


def test_perpendicular_row_independent_of_recoil():
    grid = np.linspace(640.0, 680.0, 5)
    on = angular_map(scattering(), [0.5 * math.pi], grid)
    off = angular_map(scattering(flags=flags_on("retardation", "gauge", "photon_momentum")), [0.5 * math.pi], grid)
    assert np.max(np.abs(on - off) / on) < 1e-8


def test_recoil_only_cutoff_asymmetry():
    lo = scattering(theta_pi=0.45, flags=RECOIL_ONLY)
    hi = scattering(theta_pi=0.55, flags=RECOIL_ONLY)
    assert cutoff(lo) > cutoff(hi) + 1.0
    grid = np.linspace(660.0, 700.0, 41)
    d_lo = scan_spectrum(lo, grid).d3E
    d_hi = scan_spectrum(hi, grid).d3E
    # mirrored angles share the dipole spectrum; recoil pushes the lower angle's edge up
    assert d_lo[-10:].sum() > d_hi[-10:].sum()


def test_dipole_spectrum_independent_of_propagation_axis():
    grid = np.array([380.0, 500.0, 650.0])
    reference = None
    for angle in (0.0, 0.3, 1.1, 2.5):
        n = np.array([0.0, math.sin(angle), math.cos(angle)])
        pulse = make_pulse("FieldSine2", 1.14, 10.0, 3, n_prop=n)
        cfg = scattering(pulse=pulse, flags=NondipoleFlags.dipole())
        d3E = scan_spectrum(cfg, grid).d3E
        if reference is None:
            reference = d3E
        assert np.max(np.abs(d3E - reference) / reference) < 1e-8


def _first_order_residual(energy_ev, amplitude, half_width):
    p = momentum_from_energy(energy_ev_to_au(energy_ev))
    base = ScatteringConfig(1.0, p, 0.432 * math.pi, math.pi, 1e-4, sine2_pulse(amplitude),
                            flags=NondipoleFlags.dipole())
    grid = base.peak_energy + np.linspace(-half_width, half_width, 25)
    dipole = scan_spectrum(base, grid).d3E
    singles = sum(scan_spectrum(replace(base, flags=flags_on(n)), grid).d3E - dipole for n in FLAG_NAMES)
    full = scan_spectrum(replace(base, flags=flags_on(*FLAG_NAMES)), grid).d3E - dipole
    return np.linalg.norm(full - singles) / np.linalg.norm(full)


@pytest.mark.parametrize("energy_ev", [100.0, 500.0, 1000.0])
@pytest.mark.parametrize("amplitude", [0.1, 0.03])
def test_flag_additivity_at_small_amplitude(energy_ev, amplitude):
    assert _first_order_residual(energy_ev, amplitude, 3.0) < 0.05
