"""Delimited output and figure rendering for the command-line runs.

CSV files are RFC-4180 style with a header row, '.' decimal separator and
floats printed at 17 significant digits, so identical configurations produce
bit-identical tables.  Each table is also rendered to a PNG figure next to it
(disable with --no-plot); figures are a convenience view, the CSVs are the
product.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

TWO_PI = 2.0 * math.pi


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) or isinstance(value, np.floating):
        if math.isnan(value):
            return "nan"
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\r\n")
    return path


def _finish(fig, ax, path: Path, xlabel: str, ylabel: str, title: str) -> Path:
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_spectra(path: Path, tables: dict, gamma_ref: float) -> Path:
    """Overlaid photon-count signals, max-normalized, detuning in gamma units."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for name, table in tables.items():
        ax.plot(table.detunings / gamma_ref, table.normalized_signal(),
                lw=1.0, label=name)
    return _finish(fig, ax, path, r"detuning $\delta_L/\gamma_{\rm ref}$",
                   r"$S/S_{\max}$", "photon-count signal")


def plot_shift_curves(path: Path, curves: dict) -> Path:
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for name, curve in curves.items():
        r_um = np.asarray(curve.distances) * 1e6
        ax.plot(r_um, curve.shift_12, "o-", ms=3, lw=1.0, label=f"{name}: line 1-2")
        ax.plot(r_um, curve.shift_13, "s--", ms=3, lw=1.0, label=f"{name}: line 1-3")
    ax.set_xscale("log")
    return _finish(fig, ax, path, r"separation $R$ ($\mu$m)", "line shift (Hz)",
                   "zero-drive line shifts vs distance")


def plot_cg_rows(path: Path, rows_by_r: dict) -> Path:
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for r, rows in rows_by_r.items():
        dts = [row.dt_large for row in rows]
        ax.plot(dts, [row.rel_shift_line1 for row in rows], "^-", ms=5, lw=1.0,
                label=f"R={r * 1e6:g} um, line 1-2")
        ax.plot(dts, [row.rel_shift_line2 for row in rows], "v--", ms=5, lw=1.0,
                label=f"R={r * 1e6:g} um, line 1-3")
    ax.set_xscale("log")
    ax.set_yscale("log")
    return _finish(fig, ax, path, "coarse-graining time (s)",
                   "relative shift variation", "coarse-graining stability")


def plot_single_atom(path: Path, rows: list[dict], gamma_ref: float) -> Path:
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    variants = sorted({row["variant"] for row in rows})
    for variant in variants:
        sub = [row for row in rows if row["variant"] == variant]
        g = [row["g_rad_s"] / gamma_ref for row in sub]
        ax.plot(g, [row["shift12_vs_eigen_hz"] for row in sub], "o-", ms=4,
                lw=1.0, label=f"{variant}: line 1-2")
        ax.plot(g, [row["shift13_vs_eigen_hz"] for row in sub], "s--", ms=4,
                lw=1.0, label=f"{variant}: line 1-3")
    ax.set_xscale("log")
    return _finish(fig, ax, path, r"drive $g/\gamma_{\rm ref}$",
                   "line displacement (Hz)", "single-emitter shifts vs drive")
