"""Emit self-contained matplotlib scripts that plot CLI result files.

The package itself never imports matplotlib; the generated scripts do, and
read their inputs relative to their own location.
"""

from __future__ import annotations

from pathlib import Path

_PRELUDE = '''from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent


def load_matrix(name):
    body = np.loadtxt(HERE / name, delimiter=",", ndmin=2)
    return body[1:, 0], body[0, 1:], body[1:, 1:]

'''

_SPECTRUM = '''data = np.loadtxt(HERE / {csv!r}, delimiter=",", ndmin=2)
fig, ax = plt.subplots(figsize=(7, 4))
ax.semilogy(data[:, 0], data[:, 1], lw=0.8)
ax.set_xlabel(r"$\\omega_K$ [$E_0$]")
ax.set_ylabel(r"$d^3E/(d\\omega_K\\, d^2\\Omega_K)$ [a.u.]")
fig.tight_layout()
fig.savefig(HERE / {png!r}, dpi=150)
'''

_ANGULAR = '''theta, omega, d3E = load_matrix({csv!r})
fig, ax = plt.subplots(figsize=(7, 4))
level = np.log10(np.clip(d3E, d3E.max() * 1e-12, None))
mesh = ax.pcolormesh(omega, theta / np.pi, level, shading="nearest", cmap="viridis")
fig.colorbar(mesh, ax=ax, label=r"$\\log_{{10}}\\, d^3E/(d\\omega_K\\, d^2\\Omega_K)$")
ax.set_xlabel(r"$\\omega_K$ [$E_0$]")
ax.set_ylabel(r"$\\theta_p$ [$\\pi$]")
fig.tight_layout()
fig.savefig(HERE / {png!r}, dpi=150)
'''

_SPECTROGRAM = '''t, omega, S = load_matrix({csv!r})
saddle = np.loadtxt(HERE / {saddle!r}, delimiter=",", ndmin=2)
fig, ax = plt.subplots(figsize=(6, 5))
ax.pcolormesh(omega, t, S / S.max(), shading="nearest", cmap="magma_r")
ax.plot(saddle[:, 2], saddle[:, 0], color="red", lw=1.0)
for edge in (0.0, {T_p!r}):
    ax.axhline(edge, color="black", lw=0.6)
ax.set_xlim(omega[0], omega[-1])
ax.set_xlabel(r"$\\omega_K$ [$E_0$]")
ax.set_ylabel(r"$t$ [$t_0$]")
fig.tight_layout()
fig.savefig(HERE / {png!r}, dpi=150)
'''

_PULSE = '''data = np.loadtxt(HERE / {csv!r}, delimiter=",", ndmin=2)
fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
top.plot(data[:, 0], data[:, 1], lw=0.8)
top.set_ylabel(r"$\\mathcal{{E}}(t)$ [$\\mathcal{{E}}_0$]")
bottom.plot(data[:, 0], data[:, 2], lw=0.8)
bottom.set_ylabel(r"$eA(t)$ [$p_0$]")
bottom.set_xlabel(r"$t$ [$t_0$]")
fig.tight_layout()
fig.savefig(HERE / {png!r}, dpi=150)
'''


def _require(paths):
    missing = [str(p) for p in paths if not Path(p).is_file()]
    if missing:
        raise FileNotFoundError(f"cannot emit plot script, missing result file(s): {', '.join(missing)}")


def emit_plot_script(kind: str, results: dict, out_dir, T_p: float | None = None) -> Path:
    """Write ``plot_<kind>.py`` next to the result files and return its path.

    ``results`` maps roles to result paths: ``spectrum`` for spectra,
    ``angular_map`` for polar-angle maps, ``spectrogram`` plus ``saddle`` for
    spectrograms and ``pulse`` for pulse previews. Result files must live in
    ``out_dir``.
    """
    out_dir = Path(out_dir)
    _require(results.values())
    names = {role: Path(p).name for role, p in results.items()}
    png = f"{kind.replace('-', '_')}.png"
    if kind == "spectrum":
        body = _SPECTRUM.format(csv=names["spectrum"], png=png)
    elif kind == "angular-map":
        body = _ANGULAR.format(csv=names["angular_map"], png=png)
    elif kind == "spectrogram":
        if T_p is None:
            raise ValueError("the spectrogram plot needs the pulse duration")
        body = _SPECTROGRAM.format(csv=names["spectrogram"], saddle=names["saddle"], T_p=float(T_p), png=png)
    elif kind == "pulse-preview":
        body = _PULSE.format(csv=names["pulse"], png=png)
    else:
        raise ValueError(f"no plot script for {kind!r}")
    doc = f'"""Plot {", ".join(names.values())} (generated by larr)."""\n\n'
    path = out_dir / f"plot_{kind.replace('-', '_')}.py"
    path.write_text(doc + _PRELUDE + "\n" + body)
    return path
