"""Command-line interface: ``larr <subcommand> --config FILE [--workers N] [--out DIR]``.

Every run writes its data files, an optional plot script and a
``<kind>.meta.json`` sidecar into the output directory. Exit codes: 0 on
success, 1 for configuration errors, 2 for numerical failures (the message
lists the offending grid indices), 3 for I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .amplitude import NumericalFailure, angular_map, integrate_amplitude, quadrature_R1, scan_spectrum
from .analysis import cutoff, recoil_correction, saddle_curve, spectrogram, window_integral
from .classical import analytic_momentum, integrate_trajectory, kinetic_energy_terms
from .config import KINDS, ConfigError, JobConfig, load_config, preset_names
from .nordsieck import kernel_B, kernel_B_time_derivative, kernel_C, nordsieck_f, quadrature_oracle_f
from .oracles import (boca_florescu_errors, boca_florescu_toys, kernel_B_fd, kernel_B_time_derivative_fd,
                      kernel_C_fd, loglog_slope, random_moderate_args, random_physical_args, random_unit,
                      relative_error, run_check)
from .output import write_matrix, write_sidecar, write_table
from .plotting import emit_plot_script
from .pulse import eA_amplitude, sample

log = logging.getLogger("larr")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

# tolerances of the validate-kernels report
TOL_QUADRATURE_F = 1e-4
TOL_B = 1e-6
TOL_C = 1e-4
TOL_DB_DT = 1e-6
TOL_R1 = 1e-6
TOL_SLOPE = 0.15
TOL_WINDOW = 1e-8


class RunResult:
    def __init__(self, job: JobConfig):
        self.job = job
        self.artifacts: list[Path] = []
        self.summary: dict = {}
        self.tolerances: dict = dict(job.document["integration"])
        self.failed_checks: list[str] = []

    def add(self, path: Path) -> Path:
        self.artifacts.append(path)
        log.info("wrote %s", path)
        return path


def _meta(job: JobConfig) -> dict:
    return {"kind": job.kind, "version": __version__, "config_sha256": job.content_hash()}


# --- run kinds ---------------------------------------------------------------

def _spectrum_table(job, res, out_dir, result):
    data = np.column_stack([res.omega_grid, res.d3E, res.avg_R.real, res.avg_R.imag])
    return result.add(write_table(
        out_dir / "spectrum.csv", "spectrum", _meta(job),
        ["omega_K", "d3E", "Re_avg_R", "Im_avg_R"], ["E0", "a.u.", "a.u.", "a.u."], data))


def _spectrum_summary(job, res):
    cfg = job.scattering
    return {"omega_at_maximum": float(res.omega_grid[int(np.argmax(res.d3E))]),
            "field_free_peak": cfg.peak_energy,
            "cutoff": cutoff(cfg, True),
            "cutoff_dipole": cutoff(cfg, False)}


def _run_spectrum(job: JobConfig, out_dir: Path, result: RunResult):
    res = scan_spectrum(job.scattering, job.spectrum_grid(), job.integration, job.workers)
    path = _spectrum_table(job, res, out_dir, result)
    result.add(emit_plot_script("spectrum", {"spectrum": path}, out_dir))
    result.summary.update(_spectrum_summary(job, res))


def _run_angular_map(job: JobConfig, out_dir: Path, result: RunResult):
    thetas, omegas = job.theta_grid(), job.map_omega_grid()
    M = angular_map(job.scattering, thetas, omegas, job.integration, job.workers)
    path = result.add(write_matrix(out_dir / "angular_map.csv", "angular-map", _meta(job), thetas, omegas, M,
                                   "theta_p [rad]", "omega_K [E0]", "d3E [a.u.]"))
    result.add(emit_plot_script("angular-map", {"angular_map": path}, out_dir))
    i, j = np.unravel_index(int(np.argmax(M)), M.shape)
    result.summary.update({"theta_at_maximum_pi": float(thetas[i] / math.pi),
                           "omega_at_maximum": float(omegas[j])})


def _saddle_table(job, out_dir, result):
    curve = saddle_curve(job.scattering, job.saddle_t_grid())
    data = np.column_stack([curve.t_grid, curve.omega_dipole, curve.omega_full])
    return result.add(write_table(out_dir / "saddle.csv", "saddle", _meta(job),
                                  ["t", "omega_dipole", "omega_full"], ["t0", "E0", "E0"], data))


def _run_spectrogram(job: JobConfig, out_dir: Path, result: RunResult):
    res = scan_spectrum(job.scattering, job.spectrum_grid(), job.integration, job.workers)
    spectrum_path = _spectrum_table(job, res, out_dir, result)
    result.add(emit_plot_script("spectrum", {"spectrum": spectrum_path}, out_dir))
    sg_cfg = job.spectrogram_config()
    sg = spectrogram(res.omega_grid, res.avg_R, sg_cfg)
    sg_path = result.add(write_matrix(out_dir / "spectrogram.csv", "spectrogram", _meta(job), sg.t_grid,
                                      sg.omega_K_grid, sg.S, "t [t0]", "omega_K [E0]", "S [a.u.]"))
    saddle_path = _saddle_table(job, out_dir, result)
    result.add(emit_plot_script("spectrogram", {"spectrogram": sg_path, "saddle": saddle_path}, out_dir,
                                T_p=job.pulse.T_p))
    result.summary.update(_spectrum_summary(job, res))
    result.summary["window_width"] = sg_cfg.window_width
    result.tolerances.update({"xi_T": sg_cfg.xi_T, "xi_W": sg_cfg.xi_W})


def _run_saddle(job: JobConfig, out_dir: Path, result: RunResult):
    _saddle_table(job, out_dir, result)
    cfg = job.scattering
    per_cycle = job.document["saddle"]["samples_per_cycle"]
    result.summary.update({"field_free_peak": cfg.peak_energy,
                           "cutoff": cutoff(cfg, True, per_cycle),
                           "cutoff_dipole": cutoff(cfg, False, per_cycle)})


def _run_classical(job: JobConfig, out_dir: Path, result: RunResult):
    opts = job.document["classical"]
    cfg, pulse = job.scattering, job.pulse
    p = cfg.p_vec
    residuals, speeds = [], []
    for factor in opts["c_factors"]:
        c_value = factor * cfg.c_au
        traj = integrate_trajectory(p, pulse, c_value, rtol=opts["rtol"], atol=opts["atol"],
                                    samples=opts["t_points"])
        analytic = analytic_momentum(p, pulse, traj.t, traj.r_dipole, c_value)
        resid = np.linalg.norm(traj.pi - analytic, axis=0)
        data = np.column_stack([traj.t, traj.r.T, traj.pi.T, analytic.T, resid])
        cols = ["t", "r_x", "r_y", "r_z", "pi_x", "pi_y", "pi_z",
                "pi_analytic_x", "pi_analytic_y", "pi_analytic_z", "residual"]
        units = ["t0"] + ["a0"] * 3 + ["p0"] * 7
        result.add(write_table(out_dir / f"trajectory_c{factor:g}.csv", "classical-check", _meta(job),
                               cols, units, data))
        residuals.append(float(resid.max()))
        speeds.append(c_value)
    t = np.linspace(0.0, pulse.T_p, 2001)
    eA = np.multiply.outer(pulse.eps_pol, eA_amplitude(pulse, t))
    terms = kinetic_energy_terms(p, pulse, t, np.zeros((3, t.size)), cfg.c_au)
    identity = float(np.max(np.abs(terms.recoil - recoil_correction(p, cfg.n, eA, cfg.c_au))))
    result.summary.update({"c_values": speeds, "max_residual": residuals,
                           "recoil_term_max_difference": identity})
    if len(speeds) > 1:
        result.summary["residual_slope"] = loglog_slope(speeds, residuals)
    result.tolerances.update({"trajectory_rtol": opts["rtol"], "trajectory_atol": opts["atol"]})


def _run_pulse_preview(job: JobConfig, out_dir: Path, result: RunResult):
    t, E, eA = sample(job.pulse, job.document["pulse_preview"]["samples_per_cycle"])
    path = result.add(write_table(out_dir / "pulse.csv", "pulse-preview", _meta(job), ["t", "E", "eA"],
                                  ["t0", "field0", "p0"], np.column_stack([t, E, eA])))
    result.add(emit_plot_script("pulse-preview", {"pulse": path}, out_dir))
    result.summary.update({"T_p": job.pulse.T_p, "max_abs_E": float(np.max(np.abs(E))),
                           "eA_min": float(eA.min()), "eA_max": float(eA.max())})


def _kernel_checks(v: dict):
    rng = np.random.default_rng(v["seed"])
    moderate = [random_moderate_args(rng) for _ in range(v["quadrature_samples"])]
    fd_sets = {name: [(gen(rng), random_unit(rng), 3.0 * rng.normal(size=3), random_unit(rng),
                       5.0 * rng.normal(size=3)) for _ in range(v["fd_samples"])]
               for name, gen in (("moderate", random_moderate_args), ("physical", random_physical_args))}
    checks = [run_check("nordsieck_f vs 3D quadrature",
                        lambda: [relative_error(nordsieck_f(a), quadrature_oracle_f(a)) for a in moderate],
                        TOL_QUADRATURE_F, len(moderate))]
    for regime, cases in fd_sets.items():
        checks.append(run_check(f"kernel_B vs finite differences ({regime})",
                                lambda c=cases: [relative_error(kernel_B(a, e), kernel_B_fd(a, e))
                                                 for a, e, _, _, _ in c], TOL_B, len(cases)))
        checks.append(run_check(f"kernel_C vs finite differences ({regime})",
                                lambda c=cases: [relative_error(kernel_C(a, e, E, n), kernel_C_fd(a, e, E, n))
                                                 for a, e, E, n, _ in c], TOL_C, len(cases)))
        checks.append(run_check(f"dB/dt vs finite differences ({regime})",
                                lambda c=cases: [relative_error(kernel_B_time_derivative(a, e, qd),
                                                                kernel_B_time_derivative_fd(a, e, qd))
                                                 for a, e, _, _, qd in c], TOL_DB_DT, len(cases)))
    return checks


def _amplitude_omegas(job: JobConfig, count: int):
    if "spectrum" in job.document:
        grid = job.spectrum_grid()
        return grid[np.linspace(0, grid.size - 1, count).round().astype(int)]
    return job.scattering.peak_energy * np.linspace(0.6, 1.6, count)


def _run_validate(job: JobConfig, out_dir: Path, result: RunResult):
    v = job.document["validate"]
    checks = _kernel_checks(v)
    omegas = _amplitude_omegas(job, v["amplitude_samples"])
    cfg, opts = job.scattering, job.integration
    checks.append(run_check("R1 fast path vs Gauss-Legendre quadrature",
                            lambda: [relative_error(integrate_amplitude(cfg, w, opts).R1, quadrature_R1(cfg, w))
                                     for w in omegas], TOL_R1, len(omegas)))

    def slopes():
        out = []
        for toy in boca_florescu_toys():
            eps, err = boca_florescu_errors(toy)
            out.append(abs(loglog_slope(eps, err) - 1.0))
        return out

    checks.append(run_check("regularised integral convergence |slope - 1|", slopes, TOL_SLOPE, 3))
    widths = np.logspace(-1, 1, 5)
    checks.append(run_check("spectrogram window normalisation",
                            lambda: [abs(window_integral(dx) - 1.0) for dx in widths], TOL_WINDOW, widths.size))
    rows = [c.as_row() for c in checks]
    path = out_dir / "validation.csv"
    with path.open("w") as fh:
        meta = _meta(job)
        fh.write("# larr validate-kernels\n")
        for key, value in meta.items():
            fh.write(f"# {key}: {value}\n")
        fh.write("# units: worst and tolerance are relative errors except the slope check; seconds [s]\n")
        fh.write("# check,samples,worst,tolerance,passed,seconds\n")
        for name, samples, worst, tol, passed, _ in rows:
            # wall time stays out of the data file to keep it reproducible
            fh.write(f"{name},{samples},{worst:.17g},{tol:.17g},{passed},nan\n")
    result.add(path)
    result.summary["checks"] = [{"name": c.name, "samples": c.samples, "worst": c.worst,
                                 "tolerance": c.tolerance, "passed": c.passed, "seconds": c.seconds}
                                for c in checks]
    result.failed_checks = [c.name for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: worst {c.worst:.3g} (tolerance {c.tolerance:g}, "
              f"{c.samples} samples, {c.seconds:.1f} s)")


RUNNERS = {
    "spectrum": _run_spectrum,
    "angular-map": _run_angular_map,
    "spectrogram": _run_spectrogram,
    "saddle": _run_saddle,
    "classical-check": _run_classical,
    "pulse-preview": _run_pulse_preview,
    "validate-kernels": _run_validate,
}


def run(job: JobConfig) -> RunResult:
    """Execute a job and write its artifacts; raises on failure."""
    out_dir = job.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    result = RunResult(job)
    start = time.perf_counter()
    RUNNERS[job.kind](job, out_dir, result)
    wall = time.perf_counter() - start
    payload = {
        "kind": job.kind,
        "name": job.name,
        "version": __version__,
        "config": job.to_dict(),
        "config_sha256": job.content_hash(),
        "workers": job.workers,
        "tolerances": result.tolerances,
        "artifacts": [p.name for p in result.artifacts],
        "summary": result.summary,
    }
    result.add(write_sidecar(out_dir / f"{job.kind}.meta.json", payload, wall))
    if result.failed_checks:
        raise NumericalFailure("validation checks failed: " + "; ".join(result.failed_checks))
    return result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="larr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"larr {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="subcommand")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} job")
        p.add_argument("--config", required=True,
                       help=f"job file (JSON) or preset name: {', '.join(preset_names())}")
        p.add_argument("--workers", type=int, default=None, help="worker processes (overrides the config)")
        p.add_argument("--out", default=None, help="output directory (overrides the config)")
        p.add_argument("-v", "--verbose", action="store_true", help="log written files")
    sub.add_parser("presets", help="list the bundled preset names")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.kind == "presets":
        print("\n".join(preset_names()))
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        job = load_config(args.config, args.kind, args.workers, args.out)
        result = run(job)
    except ConfigError as exc:
        print(f"larr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        indices = f" (grid indices: {exc.indices})" if exc.indices else ""
        print(f"larr: numerical failure: {exc}{indices}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"larr: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"larr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"larr {job.kind}: wrote {len(result.artifacts)} file(s) to {job.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
