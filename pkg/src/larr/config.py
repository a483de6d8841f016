"""Job configuration: JSON schema, defaults, presets and conversion to engine objects.

A job file is a JSON object. Angles are given in units of pi (``*_pi``
keys), energies in E0 (Hartree) unless the key says otherwise, and all other
quantities in atomic units. Unknown keys are rejected at every level.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .amplitude import IntegrationOptions, NondipoleFlags, ScatteringConfig
from .analysis import SpectrogramConfig
from .core import C_AU, energy_ev_to_au, momentum_from_energy
from .pulse import PulseSpec, Shape, flat_top_cep, make_pulse

KINDS = ("spectrum", "angular-map", "spectrogram", "saddle", "classical-check",
         "pulse-preview", "validate-kernels")

# grid sections that a run kind cannot do without
REQUIRED_SECTIONS = {
    "spectrum": ("spectrum",),
    "angular-map": ("angular_map",),
    "spectrogram": ("spectrum", "spectrogram"),
    "saddle": (),
    "classical-check": (),
    "pulse-preview": (),
    "validate-kernels": (),
}

# keys that affect how a job runs but not what it computes
RUNTIME_KEYS = ("workers", "output")


class ConfigError(ValueError):
    """Invalid job configuration; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


_POS = {"type": "number", "exclusiveMinimum": 0}
_NUM = {"type": "number"}
_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_COUNT = {"type": "integer", "minimum": 1}
_ANGLE_PI = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}


def _obj(properties, required=()):
    return {"type": "object", "properties": properties, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "name": {"type": "string"},
    "description": {"type": "string"},
    "electron": _obj({
        "energy_ev": _POS,
        "momentum": _POS,
        "theta_p_pi": _ANGLE_PI,
        "phi_p_pi": _NUM,
        "dp": _POS,
    }, ["theta_p_pi", "phi_p_pi", "dp"]),
    "ion": _obj({"Z": {"type": "number", "minimum": 1}}, ["Z"]),
    "pulse": _obj({
        "shape": {"enum": [s.value for s in Shape]},
        "omega": _POS,
        "amplitude": {"type": "number", "minimum": 0},
        "n_osc": _COUNT,
        "eta0": _NUM,
        "n_c": {"type": "integer", "minimum": 0},
        "chi": {"oneOf": [_NUM, {"const": "flat_top"}]},
        "n_prop": _VEC3,
        "eps_pol": _VEC3,
    }, ["shape", "omega", "amplitude", "n_osc"]),
    "photon": _obj({"n_K": _VEC3, "eps_K": _VEC3}),
    "nondipole": _obj({k: {"type": "boolean"} for k in ("recoil", "retardation", "gauge", "photon_momentum")}),
    "c_au": _POS,
    "integration": _obj({
        "method": {"enum": ["fast", "reference"]},
        "rtol": _POS,
        "atol": _POS,
        "coarse_per_cycle": {"type": "integer", "minimum": 8},
        "phase_step": _POS,
    }),
    "spectrum": _obj({"omega_min": _POS, "omega_max": _POS, "points": _COUNT},
                     ["omega_min", "omega_max", "points"]),
    "angular_map": _obj({
        "theta_min_pi": _ANGLE_PI,
        "theta_max_pi": _ANGLE_PI,
        "theta_points": _COUNT,
        "theta_values_pi": {"type": "array", "items": _ANGLE_PI, "minItems": 1},
        "omega_min": _POS,
        "omega_max": _POS,
        "omega_points": _COUNT,
    }, ["omega_min", "omega_max", "omega_points"]),
    "spectrogram": _obj({
        "xi_T": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "xi_W": _POS,
        "omega1": _NUM,
        "omega2": _NUM,
        "t_min": _NUM,
        "t_max": _NUM,
        "t_points": {"type": "integer", "minimum": 2},
        "omega_K_min": _NUM,
        "omega_K_max": _NUM,
        "omega_K_points": {"type": "integer", "minimum": 2},
    }, ["xi_T", "xi_W", "omega1", "omega2", "t_min", "t_max", "t_points",
        "omega_K_min", "omega_K_max", "omega_K_points"]),
    "saddle": _obj({"t_points": {"type": "integer", "minimum": 2}, "samples_per_cycle": _COUNT}),
    "classical": _obj({
        "c_factors": {"type": "array", "items": _POS, "minItems": 1},
        "t_points": {"type": "integer", "minimum": 2},
        "rtol": _POS,
        "atol": _POS,
    }),
    "pulse_preview": _obj({"samples_per_cycle": _COUNT}),
    "validate": _obj({
        "seed": {"type": "integer", "minimum": 0},
        "quadrature_samples": _COUNT,
        "fd_samples": _COUNT,
        "amplitude_samples": _COUNT,
    }),
    "workers": _COUNT,
    "output": _obj({"dir": {"type": "string", "minLength": 1}}),
}, ["electron", "ion", "pulse"])

DEFAULTS = {
    "pulse": {"eta0": 0.0, "n_c": 0, "chi": 0.0, "n_prop": [0.0, 0.0, 1.0], "eps_pol": [1.0, 0.0, 0.0]},
    "photon": {"n_K": [0.0, 0.0, 1.0], "eps_K": [1.0, 0.0, 0.0]},
    "nondipole": {"recoil": True, "retardation": True, "gauge": True, "photon_momentum": True},
    "c_au": C_AU,
    "integration": {"method": "fast", "rtol": 1e-8, "atol": 1e-12, "coarse_per_cycle": 400, "phase_step": 0.1},
    "saddle": {"t_points": 2001, "samples_per_cycle": 2000},
    "classical": {"c_factors": [1.0, 2.0, 4.0], "t_points": 4001, "rtol": 1e-12, "atol": 1e-12},
    "pulse_preview": {"samples_per_cycle": 1000},
    "validate": {"seed": 20240601, "quadrature_samples": 50, "fd_samples": 20, "amplitude_samples": 3},
    "workers": 1,
    "output": {"dir": "larr_output"},
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _path(error) -> str:
    parts = ["config"]
    for p in error.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts).replace(".[", "[")


def _merge(defaults, doc):
    out = copy.deepcopy(defaults)
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _check_range(doc, section, lo, hi):
    s = doc[section]
    if not s[lo] < s[hi]:
        raise ConfigError(f"config.{section}.{hi}", f"must exceed {lo} ({s[hi]!r} <= {s[lo]!r})")


@dataclass(frozen=True)
class JobConfig:
    """A validated job: run kind plus the defaults-filled configuration document."""

    kind: str
    document: dict = field(repr=False)

    @property
    def workers(self) -> int:
        return int(self.document["workers"])

    @property
    def out_dir(self) -> Path:
        return Path(self.document["output"]["dir"])

    @property
    def name(self) -> str:
        return self.document.get("name", self.kind)

    def content_hash(self) -> str:
        """sha256 of everything that determines the numbers (runtime keys excluded)."""
        body = {k: v for k, v in self.document.items() if k not in RUNTIME_KEYS}
        return hashlib.sha256(canonical_json({"kind": self.kind, "config": body}).encode()).hexdigest()

    def to_dict(self) -> dict:
        return copy.deepcopy(self.document)

    # --- engine objects -----------------------------------------------------

    @cached_property
    def pulse(self) -> PulseSpec:
        return _build_pulse(self.document["pulse"])

    @cached_property
    def scattering(self) -> ScatteringConfig:
        return _build_scattering(self.document, self.pulse)

    @cached_property
    def integration(self) -> IntegrationOptions:
        return IntegrationOptions(**self.document["integration"])

    def spectrum_grid(self) -> np.ndarray:
        s = self.document["spectrum"]
        return np.linspace(s["omega_min"], s["omega_max"], s["points"])

    def theta_grid(self) -> np.ndarray:
        s = self.document["angular_map"]
        if "theta_values_pi" in s:
            return math.pi * np.asarray(s["theta_values_pi"], dtype=float)
        return math.pi * np.linspace(s["theta_min_pi"], s["theta_max_pi"], s["theta_points"])

    def map_omega_grid(self) -> np.ndarray:
        s = self.document["angular_map"]
        return np.linspace(s["omega_min"], s["omega_max"], s["omega_points"])

    def spectrogram_config(self) -> SpectrogramConfig:
        s = self.document["spectrogram"]
        return SpectrogramConfig(
            s["xi_T"], s["xi_W"], s["omega1"], s["omega2"],
            np.linspace(s["t_min"], s["t_max"], s["t_points"]),
            np.linspace(s["omega_K_min"], s["omega_K_max"], s["omega_K_points"]))

    def saddle_t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.pulse.T_p, self.document["saddle"]["t_points"])


def _build_pulse(p) -> PulseSpec:
    chi = p["chi"]
    if chi == "flat_top":
        chi = flat_top_cep(p["n_osc"], p["eta0"])
    try:
        return make_pulse(p["shape"], p["omega"], p["amplitude"], p["n_osc"], p["eta0"], p["n_c"],
                          chi, p["n_prop"], p["eps_pol"])
    except (ValueError, ZeroDivisionError, FloatingPointError) as exc:
        raise ConfigError("config.pulse", str(exc)) from None


def _electron_momentum(e) -> float:
    if ("energy_ev" in e) == ("momentum" in e):
        raise ConfigError("config.electron", "give exactly one of energy_ev and momentum")
    if "momentum" in e:
        return float(e["momentum"])
    return momentum_from_energy(energy_ev_to_au(e["energy_ev"]))


def _build_scattering(doc, pulse) -> ScatteringConfig:
    e = doc["electron"]
    p_mag = _electron_momentum(e)
    for key in ("n_K", "eps_K"):
        if not np.any(doc["photon"][key]):
            raise ConfigError(f"config.photon.{key}", "must be a nonzero vector")
    try:
        return ScatteringConfig(
            Z=float(doc["ion"]["Z"]), p_mag=p_mag, theta_p=math.pi * e["theta_p_pi"],
            phi_p=math.pi * e["phi_p_pi"], dp=float(e["dp"]), pulse=pulse,
            n_K=np.asarray(doc["photon"]["n_K"], dtype=float),
            eps_K=np.asarray(doc["photon"]["eps_K"], dtype=float),
            flags=NondipoleFlags(**doc["nondipole"]), c_au=float(doc["c_au"]))
    except ValueError as exc:
        raise ConfigError("config", str(exc)) from None


def parse_config(document: dict, kind: str) -> JobConfig:
    """Validate a configuration document for a run kind and fill in defaults."""
    if kind not in KINDS:
        raise ConfigError("kind", f"unknown run kind {kind!r}; expected one of {', '.join(KINDS)}")
    if not isinstance(document, dict):
        raise ConfigError("config", "top level must be a JSON object")
    errors = sorted(_VALIDATOR.iter_errors(document), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        first = errors[0]
        extra = f" (and {len(errors) - 1} more)" if len(errors) > 1 else ""
        raise ConfigError(_path(first), first.message + extra)
    for section in REQUIRED_SECTIONS[kind]:
        if section not in document:
            raise ConfigError(f"config.{section}", f"section is required for '{kind}'")
    doc = _merge(DEFAULTS, document)
    if "spectrum" in doc:
        _check_range(doc, "spectrum", "omega_min", "omega_max")
    if "angular_map" in doc:
        a = doc["angular_map"]
        _check_range(doc, "angular_map", "omega_min", "omega_max")
        ranged = {"theta_min_pi", "theta_max_pi", "theta_points"}
        if ("theta_values_pi" in a) == bool(ranged & a.keys()):
            raise ConfigError("config.angular_map", "give theta_values_pi or theta_min_pi/theta_max_pi/theta_points")
        if "theta_values_pi" not in a:
            missing = sorted(ranged - a.keys())
            if missing:
                raise ConfigError(f"config.angular_map.{missing[0]}", "is required")
            if a["theta_points"] > 1:
                _check_range(doc, "angular_map", "theta_min_pi", "theta_max_pi")
    if "spectrogram" in doc:
        for lo, hi in (("omega1", "omega2"), ("t_min", "t_max"), ("omega_K_min", "omega_K_max")):
            _check_range(doc, "spectrogram", lo, hi)
        s, grid = doc["spectrogram"], doc.get("spectrum")
        if grid and (grid["omega_min"] > s["omega1"] or grid["omega_max"] < s["omega2"]):
            raise ConfigError("config.spectrogram.omega1", "the spectrum grid must cover [omega1, omega2]")
    job = JobConfig(kind, doc)
    scattering = job.scattering
    threshold = -scattering.E_B
    for section, key in (("spectrum", "omega_min"), ("angular_map", "omega_min")):
        if section in doc and doc[section][key] <= threshold:
            raise ConfigError(f"config.{section}.{key}", f"must exceed the binding energy {threshold!r} E0")
    return job


def load_config(source, kind: str, workers: int | None = None, out_dir=None) -> JobConfig:
    """Read a job file (or preset name), apply command-line overrides and validate.

    Raises :class:`ConfigError` for invalid content and :class:`OSError` when
    the file cannot be read.
    """
    path = Path(source)
    if not path.exists() and str(source) in preset_names():
        text = preset_text(str(source))
    else:
        text = path.read_text()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if isinstance(document, dict):
        if workers is not None:
            document["workers"] = workers
        if out_dir is not None:
            document.setdefault("output", {})["dir"] = str(out_dir)
    return parse_config(document, kind)


def preset_names() -> list[str]:
    root = resources.files("larr") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def preset_text(name: str) -> str:
    return (resources.files("larr") / "presets" / f"{name}.json").read_text()
