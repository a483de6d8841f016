import json
import math
import subprocess
import sys

import numpy as np
import pytest

import larr.amplitude as amplitude
from larr import __version__
from larr.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main
from larr.config import (KINDS, REQUIRED_SECTIONS, ConfigError, JobConfig, load_config, parse_config, preset_names,
                         preset_text)
from larr.output import read_matrix, write_matrix, write_table
from larr.plotting import emit_plot_script

SMALL = {
    "name": "small",
    "electron": {"energy_ev": 10000, "theta_p_pi": 0.432, "phi_p_pi": 1.0, "dp": 2.74e-5},
    "ion": {"Z": 4},
    "pulse": {"shape": "FieldSine2", "omega": 1.14, "amplitude": 10, "n_osc": 3},
    "spectrum": {"omega_min": 360.0, "omega_max": 700.0, "points": 18},
    "angular_map": {"theta_values_pi": [0.45, 0.5], "omega_min": 660.0, "omega_max": 680.0, "omega_points": 3},
    "spectrogram": {"xi_T": 0.1, "xi_W": 0.03, "omega1": 380.0, "omega2": 680.0, "t_min": 0.0, "t_max": 16.0,
                    "t_points": 5, "omega_K_min": 400.0, "omega_K_max": 660.0, "omega_K_points": 6},
    "classical": {"c_factors": [1.0, 2.0], "t_points": 101},
    "saddle": {"t_points": 51},
    "pulse_preview": {"samples_per_cycle": 20},
    "validate": {"quadrature_samples": 1, "fd_samples": 1, "amplitude_samples": 1},
}


def write_config(tmp_path, doc, name="job.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def run_cli(tmp_path, kind, doc=SMALL, out="out", extra=()):
    cfg = write_config(tmp_path, doc)
    return main([kind, "--config", str(cfg), "--out", str(tmp_path / out), *extra])


def data_files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if not p.name.endswith(".meta.json")}


# --- configuration -----------------------------------------------------------

def test_unknown_key_rejected():
    doc = json.loads(json.dumps(SMALL))
    doc["electron"]["spin"] = 0.5
    with pytest.raises(ConfigError) as info:
        parse_config(doc, "spectrum")
    assert info.value.path == "config.electron"
    assert "spin" in str(info.value)


def test_negative_width_reports_field_path(tmp_path, capsys):
    doc = json.loads(json.dumps(SMALL))
    doc["electron"]["dp"] = -1.0
    assert run_cli(tmp_path, "spectrum", doc) == EXIT_CONFIG
    assert "config.electron.dp" in capsys.readouterr().err


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d["spectrum"].update(omega_min=5.0), "config.spectrum.omega_min"),
    (lambda d: d["spectrum"].update(omega_max=100.0), "config.spectrum.omega_max"),
    (lambda d: d["pulse"].update(shape="Gaussian"), "config.pulse.shape"),
    (lambda d: d["electron"].update(momentum=27.0), "config.electron"),
    (lambda d: d["spectrogram"].update(omega1=300.0), "config.spectrogram.omega1"),
    (lambda d: d.pop("spectrum"), "config.spectrum"),
])
def test_semantic_checks(mutate, path):
    doc = json.loads(json.dumps(SMALL))
    mutate(doc)
    with pytest.raises(ConfigError) as info:
        parse_config(doc, "spectrogram")
    assert info.value.path == path


def test_non_transverse_pulse_rejected():
    doc = json.loads(json.dumps(SMALL))
    doc["pulse"]["eps_pol"] = [0.0, 0.0, 1.0]
    with pytest.raises(ConfigError):
        parse_config(doc, "spectrum")


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        parse_config(SMALL, "hologram")


def test_invalid_json_is_a_config_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{electron: }")
    with pytest.raises(ConfigError):
        load_config(path, "spectrum")
    assert main(["spectrum", "--config", str(path)]) == EXIT_CONFIG


def test_missing_file_is_an_io_error(tmp_path, capsys):
    assert main(["spectrum", "--config", str(tmp_path / "absent.json")]) == EXIT_IO
    assert "I/O error" in capsys.readouterr().err


def test_unwritable_output_is_an_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run_cli(tmp_path, "saddle", out="file/sub") == EXIT_IO


@pytest.mark.parametrize("name", preset_names())
def test_presets_parse_for_their_kinds(name):
    text = json.loads(preset_text(name))
    kinds = [k for k in KINDS if all(s in text for s in REQUIRED_SECTIONS[k])]
    assert kinds
    for kind in kinds:
        job = load_config(name, kind)
        assert job.scattering.Z >= 1


def test_preset_catalogue():
    names = preset_names()
    assert "fig2" in names and len(names) == 17
    fig2 = load_config("fig2", "spectrogram")
    assert fig2.scattering.theta_p == pytest.approx(0.432 * math.pi)
    assert fig2.scattering.dp == 2.74e-5
    assert fig2.spectrum_grid().size == 2000


def test_overrides_do_not_change_hash(tmp_path):
    path = write_config(tmp_path, SMALL)
    a = load_config(path, "spectrum", workers=1, out_dir=tmp_path / "a")
    b = load_config(path, "spectrum", workers=4, out_dir=tmp_path / "b")
    assert a.content_hash() == b.content_hash()
    assert b.workers == 4 and b.out_dir == tmp_path / "b"


# --- runs ----------------------------------------------------------------------

def test_spectrum_run_and_sidecar_round_trip(tmp_path):
    assert run_cli(tmp_path, "spectrum") == EXIT_OK
    out = tmp_path / "out"
    meta = json.loads((out / "spectrum.meta.json").read_text())
    assert meta["version"] == __version__
    assert meta["kind"] == "spectrum"
    assert {"rtol", "atol"} <= meta["tolerances"].keys()
    assert meta["wall_time_s"] > 0.0 and "timestamp" in meta
    job = parse_config(meta["config"], meta["kind"])
    original = load_config(tmp_path / "job.json", "spectrum", out_dir=tmp_path / "out")
    assert job == original
    assert job.content_hash() == meta["config_sha256"]
    table = np.loadtxt(out / "spectrum.csv", delimiter=",")
    assert table.shape == (18, 4)
    assert np.all(table[:, 1] >= 0.0)
    header = [line for line in (out / "spectrum.csv").read_text().splitlines() if line.startswith("#")]
    assert any(line.startswith("# units:") for line in header)
    assert header[-1] == "# omega_K,d3E,Re_avg_R,Im_avg_R"


def test_rerun_is_byte_identical_across_worker_counts(tmp_path):
    assert run_cli(tmp_path, "spectrum", out="a") == EXIT_OK
    assert run_cli(tmp_path, "spectrum", out="b") == EXIT_OK
    assert run_cli(tmp_path, "spectrum", out="c", extra=("--workers", "3")) == EXIT_OK
    a, b, c = (data_files(tmp_path / d) for d in "abc")
    assert a == b == c


def test_angular_map_matrix_layout(tmp_path):
    assert run_cli(tmp_path, "angular-map") == EXIT_OK
    theta, omega, values = read_matrix(tmp_path / "out" / "angular_map.csv")
    assert np.allclose(theta, [0.45 * math.pi, 0.5 * math.pi])
    assert np.allclose(omega, [660.0, 670.0, 680.0])
    assert values.shape == (2, 3)


def test_spectrogram_run(tmp_path):
    assert run_cli(tmp_path, "spectrogram") == EXIT_OK
    out = tmp_path / "out"
    t, omega, S = read_matrix(out / "spectrogram.csv")
    assert t.size == 5 and omega.size == 6 and S.shape == (5, 6)
    saddle = np.loadtxt(out / "saddle.csv", delimiter=",")
    assert saddle.shape == (51, 3)
    for script in ("plot_spectrum.py", "plot_spectrogram.py"):
        assert (out / script).is_file()


@pytest.mark.parametrize("kind, files", [
    ("saddle", ["saddle.csv"]),
    ("classical-check", ["trajectory_c1.csv", "trajectory_c2.csv"]),
    ("pulse-preview", ["pulse.csv", "plot_pulse_preview.py"]),
    ("validate-kernels", ["validation.csv"]),
])
def test_other_kinds(tmp_path, kind, files):
    assert run_cli(tmp_path, kind) == EXIT_OK
    out = tmp_path / "out"
    for name in files + [f"{kind}.meta.json"]:
        assert (out / name).is_file()


def test_classical_summary(tmp_path):
    assert run_cli(tmp_path, "classical-check") == EXIT_OK
    summary = json.loads((tmp_path / "out" / "classical-check.meta.json").read_text())["summary"]
    assert summary["residual_slope"] == pytest.approx(-2.0, abs=0.2)
    assert summary["recoil_term_max_difference"] < 1e-12


def test_validation_report_lists_every_check(tmp_path, capsys):
    assert run_cli(tmp_path, "validate-kernels") == EXIT_OK
    lines = [line for line in capsys.readouterr().out.splitlines() if line.startswith(("PASS", "FAIL"))]
    assert len(lines) == 10 and all(line.startswith("PASS") for line in lines)
    rows = [r for r in (tmp_path / "out" / "validation.csv").read_text().splitlines() if not r.startswith("#")]
    assert len(rows) == 10


def test_numerical_failure_reports_indices(tmp_path, monkeypatch, capsys):
    original = amplitude.integrate_amplitude

    def failing(config, omega_K, options=None):
        if omega_K > 650.0:
            raise amplitude.NumericalFailure("step size collapsed")
        return original(config, omega_K, options)

    monkeypatch.setattr(amplitude, "integrate_amplitude", failing)
    assert run_cli(tmp_path, "spectrum") == EXIT_NUMERICAL
    err = capsys.readouterr().err
    assert "grid indices: [15, 16, 17]" in err


def test_presets_subcommand(capsys):
    assert main(["presets"]) == EXIT_OK
    assert capsys.readouterr().out.split() == preset_names()


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    proc = subprocess.run([sys.executable, "-m", "larr.cli", "saddle", "--config", str(cfg),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


# --- output helpers and plot scripts ------------------------------------------

def test_negative_zero_is_written_as_zero(tmp_path):
    path = write_table(tmp_path / "t.csv", "t", {}, ["a"], ["1"], np.array([[-0.0], [1.5]]))
    assert "-0" not in path.read_text().split("# a\n")[1]


def test_matrix_round_trip(tmp_path):
    rows, cols = np.array([0.0, 1.0]), np.array([5.0, 6.0, 7.0])
    values = np.arange(6.0).reshape(2, 3) * 0.1
    path = write_matrix(tmp_path / "m.csv", "m", {}, rows, cols, values, "r", "c", "v")
    r, c, v = read_matrix(path)
    assert np.array_equal(r, rows) and np.array_equal(c, cols) and np.array_equal(v, values)
    with pytest.raises(ValueError):
        write_matrix(tmp_path / "x.csv", "m", {}, rows, cols, values.T, "r", "c", "v")


def test_plot_script_needs_existing_inputs(tmp_path):
    with pytest.raises(FileNotFoundError):
        emit_plot_script("spectrum", {"spectrum": tmp_path / "nope.csv"}, tmp_path)


def test_plot_script_kinds(tmp_path):
    path = write_table(tmp_path / "s.csv", "s", {}, ["w", "y"], ["E0", "a.u."], np.ones((3, 2)))
    script = emit_plot_script("spectrum", {"spectrum": path}, tmp_path)
    text = script.read_text()
    assert "semilogy" in text and "s.csv" in text
    compile(text, str(script), "exec")
    with pytest.raises(ValueError):
        emit_plot_script("hologram", {"spectrum": path}, tmp_path)
    with pytest.raises(ValueError):
        emit_plot_script("spectrogram", {"spectrogram": path, "saddle": path}, tmp_path)


def test_generated_scripts_render(tmp_path):
    pytest.importorskip("matplotlib")
    assert run_cli(tmp_path, "spectrogram") == EXIT_OK
    assert run_cli(tmp_path, "angular-map", out="map") == EXIT_OK
    for script in ("out/plot_spectrum.py", "out/plot_spectrogram.py", "map/plot_angular_map.py"):
        proc = subprocess.run([sys.executable, str(tmp_path / script)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out" / "spectrogram.png").is_file()
    assert (tmp_path / "map" / "angular_map.png").is_file()


def test_job_config_is_frozen():
    job = parse_config(SMALL, "saddle")
    assert isinstance(job, JobConfig)
    with pytest.raises(AttributeError):
        job.kind = "spectrum"
