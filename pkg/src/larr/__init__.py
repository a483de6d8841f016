"""Laser-assisted radiative recombination with leading-order nondipole corrections."""

from .amplitude import (
    IntegrationOptions,
    NondipoleFlags,
    NumericalFailure,
    ScatteringConfig,
    SpectrumResult,
    angular_map,
    averaged_R,
    energy_distribution,
    integrate_amplitude,
    scan_spectrum,
)
from .pulse import PulseSpec, Shape, make_pulse

__version__ = "0.1.0"

__all__ = [
    "IntegrationOptions",
    "NondipoleFlags",
    "NumericalFailure",
    "PulseSpec",
    "ScatteringConfig",
    "Shape",
    "SpectrumResult",
    "angular_map",
    "averaged_R",
    "energy_distribution",
    "integrate_amplitude",
    "make_pulse",
    "scan_spectrum",
    "__version__",
]
