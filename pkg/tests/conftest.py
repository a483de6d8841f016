import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from larr.amplitude import NondipoleFlags, ScatteringConfig
from larr.core import energy_ev_to_au, momentum_from_energy
from larr.pulse import flat_top_cep, make_pulse

settings.register_profile("larr", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("larr")

P_FIG = momentum_from_energy(energy_ev_to_au(1e4))
DP_FIG = 2.74e-5
ETA_FIG4 = -1.0 / (6.0 * math.pi)


def sine2_pulse(amplitude=10.0):
    return make_pulse("FieldSine2", 1.14, amplitude, 3)


def chirp_pulse(shape, n_c=0, eta0=ETA_FIG4, chi=None):
    chi = flat_top_cep(3, eta0) if chi is None else chi
    return make_pulse(shape, 1.14, 10.0, 3, eta0, n_c, chi)


def scattering(theta_pi=0.432, phi_pi=1.0, pulse=None, flags=None, dp=DP_FIG, **kwargs):
    return ScatteringConfig(4.0, P_FIG, theta_pi * math.pi, phi_pi * math.pi, dp,
                            sine2_pulse() if pulse is None else pulse,
                            flags=NondipoleFlags() if flags is None else flags, **kwargs)


RETARDATION_ONLY = NondipoleFlags(recoil=False, retardation=True, gauge=False, photon_momentum=False)
RECOIL_ONLY = NondipoleFlags(recoil=True, retardation=False, gauge=False, photon_momentum=False)


@pytest.fixture
def fig2():
    return scattering()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def record(criterion, passed, detail):
        line = f"{criterion} {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[criterion] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
