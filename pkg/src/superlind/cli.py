"""Command-line front end.

Subcommands map to the reproduction pipelines: ``spectrum`` (signal vs
detuning for chosen interference variants), ``shifts`` (zero-drive line shifts
vs emitter separation), ``cg-scan`` (stability under the coarse-graining
time), ``single-atom`` (shift vs drive strength for one emitter) and
``coeffs`` (dump of the master-equation coefficient set).  Every command reads
one YAML configuration, writes CSV tables (plus PNG figures unless --no-plot)
into the output directory, and finishes with a machine-readable manifest.

Exit codes: 0 success, 1 fatal error, 2 completed with per-point failures
(partial output written).
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .analysis import (VARIANTS, cg_sensitivity, measure_line_shifts,
                       predict_peak_offsets, sweep_distance, variant_toggles,
                       zero_drive_line_shifts)
from .coefficients import build_coefficient_set, coefficient_rows
from .config import ConfigError, ParsedConfig, parse_config
from .model import pair_array, proportional_drive
from .spectrum import (default_detuning_grid, gamma_reference, scan_detuning,
                       transition_gap)
from . import report

TWO_PI = 2.0 * math.pi


@dataclass
class RunManifest:
    config_hash: str
    command: str
    outputs: list[str] = field(default_factory=list)
    wall_time: float = 0.0
    threads: int = 1
    seed: int | None = None
    version: str = __version__

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        for rel in self.outputs:
            if not (out_dir / rel).exists():
                raise RuntimeError(f"manifest lists missing output {rel}")
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=True, dir_okay=False),
                      help="YAML run configuration.")(fn)
    fn = click.option("--out", "out_dir", required=True,
                      type=click.Path(file_okay=False),
                      help="Output directory (created if missing).")(fn)
    fn = click.option("--variant", "variants", multiple=True,
                      type=click.Choice(sorted(VARIANTS)),
                      help="Interference variant(s); overrides the config.")(fn)
    fn = click.option("--no-smoothing", is_flag=True,
                      help="Use the raw sinc resonance factor instead of its "
                           "Gaussian smoothing.")(fn)
    fn = click.option("--threads", type=int, default=None,
                      envvar="SUPERLIND_THREADS",
                      help="Worker threads for sweeps (default 1; env "
                           "SUPERLIND_THREADS).")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="RNG seed, recorded in the manifest (used only by "
                           "noise-injection test utilities).")(fn)
    fn = click.option("--no-plot", is_flag=True,
                      help="Skip PNG figure rendering.")(fn)
    return fn


@dataclass
class RunContext:
    parsed: ParsedConfig
    out_dir: Path
    threads: int
    seed: int | None
    plot: bool
    manifest: RunManifest

    def add_output(self, path: Path) -> None:
        self.manifest.outputs.append(str(Path(path).relative_to(self.out_dir)))


def _setup(config_path, out_dir, no_smoothing, threads, seed, no_plot,
           command: str) -> RunContext:
    try:
        parsed = parse_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from None
    if no_smoothing:
        parsed.config = replace(parsed.config, smoothing=False)
        parsed.normalized["smoothing"] = False
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config_hash=parsed.config_hash, command=command,
                           threads=threads or 1, seed=seed)
    return RunContext(parsed=parsed, out_dir=out, threads=threads or 1,
                      seed=seed, plot=not no_plot, manifest=manifest)


def _drive(ctx: RunContext, g13: float | None = None):
    parsed = ctx.parsed
    cfg = parsed.config
    overrides = None
    if parsed.g12_override is not None:
        overrides = {0: parsed.g12_override}
    return proportional_drive(cfg.scheme, cfg.n_emitters,
                              parsed.g13 if g13 is None else g13,
                              overrides=overrides)


@click.group()
@click.version_option(version=__version__, prog_name="superlind")
def main():
    """Steady-state spectra and interference line shifts of multilevel
    superradiant emitters."""


@main.command()
@_common_options
def spectrum(config_path, out_dir, variants, no_smoothing, threads, seed, no_plot):
    """Photon-count signal versus laser detuning, one CSV per variant."""
    t0 = time.time()
    ctx = _setup(config_path, out_dir, no_smoothing, threads, seed, no_plot,
                 "spectrum")
    parsed = ctx.parsed
    cfg = parsed.config
    opts = parsed.options
    names = list(variants) if variants else list(opts.spectrum_variants)
    gamma = gamma_reference(cfg.scheme)

    grid = default_detuning_grid(cfg.scheme, points=opts.spectrum_points,
                                 pad=opts.spectrum_pad_gamma)
    if opts.delta_min is not None or opts.delta_max is not None:
        lo = opts.delta_min if opts.delta_min is not None else grid[0]
        hi = opts.delta_max if opts.delta_max is not None else grid[-1]
        grid = np.linspace(lo, hi, opts.spectrum_points)

    drive = _drive(ctx)
    tables = {}
    all_rows = []
    for name in names:
        table = scan_detuning(cfg.with_toggles(variant_toggles(name)), drive,
                              grid, threads=ctx.threads,
                              refine=opts.spectrum_refine,
                              meta={"variant": name})
        tables[name] = table
        norm = table.normalized_signal()
        rows = [(d / TWO_PI, s, name, ns) for d, s, ns in
                zip(table.detunings, table.signal, norm)]
        all_rows.extend(rows)
        path = report.write_csv(ctx.out_dir / f"spectrum_{name}.csv",
                                ["delta_hz", "signal", "variant",
                                 "signal_over_max"], rows)
        ctx.add_output(path)
        click.echo(f"spectrum[{name}]: {len(rows)} points "
                   f"(max S = {table.signal.max():.6g} rad/s)")
    path = report.write_csv(ctx.out_dir / "spectrum_all.csv",
                            ["delta_hz", "signal", "variant", "signal_over_max"],
                            all_rows)
    ctx.add_output(path)
    if ctx.plot:
        ctx.add_output(report.plot_spectra(ctx.out_dir / "spectrum.png",
                                           tables, gamma))
    ctx.manifest.wall_time = time.time() - t0
    ctx.manifest.write(ctx.out_dir)


@main.command()
@_common_options
@click.option("--fit-diagnostics", is_flag=True,
              help="Write per-point fit diagnostics as JSON lines.")
def shifts(config_path, out_dir, variants, no_smoothing, threads, seed,
           no_plot, fit_diagnostics):
    """Zero-drive line shifts versus emitter separation, one CSV per variant."""
    t0 = time.time()
    ctx = _setup(config_path, out_dir, no_smoothing, threads, seed, no_plot,
                 "shifts")
    parsed = ctx.parsed
    cfg = parsed.config
    opts = parsed.options
    names = list(variants) if variants else list(opts.shifts_variants)
    gamma = gamma_reference(cfg.scheme)

    if opts.r_spacing == "log":
        r_grid = np.geomspace(opts.r_min, opts.r_max, opts.r_points)
    else:
        r_grid = np.linspace(opts.r_min, opts.r_max, opts.r_points)

    any_failures = False
    curves = {}
    for name in names:
        curve = sweep_distance(cfg, r_grid, name, g_over_gamma=opts.g_list,
                               window_halfwidth=opts.window_gamma * gamma,
                               points_per_window=opts.window_points,
                               threads=ctx.threads,
                               g12_override=parsed.g12_override)
        curves[name] = curve
        rows = [(r, s12, s13, name, conv) for r, s12, s13, conv in
                zip(curve.distances, curve.shift_12, curve.shift_13,
                    curve.converged)]
        path = report.write_csv(ctx.out_dir / f"shifts_{name}.csv",
                                ["r_m", "shift12_hz", "shift13_hz", "variant",
                                 "converged"], rows)
        ctx.add_output(path)

        per_g_rows = []
        for r, measurements in zip(curve.distances, curve.per_g):
            for m in measurements:
                per_g_rows.append((r, m.g_ref, m.g_ref / gamma, m.shift12_hz,
                                   m.shift13_hz, m.fit_full.residual_norm,
                                   m.fit_reference.residual_norm))
        path = report.write_csv(
            ctx.out_dir / f"shifts_{name}_per_g.csv",
            ["r_m", "g_rad_s", "g_over_gamma", "shift12_hz", "shift13_hz",
             "residual_full", "residual_reference"], per_g_rows)
        ctx.add_output(path)

        if fit_diagnostics:
            diag_path = ctx.out_dir / f"fit_diagnostics_{name}.jsonl"
            with open(diag_path, "w") as fh:
                for r, measurements in zip(curve.distances, curve.per_g):
                    for m in measurements:
                        fh.write(json.dumps({
                            "r_m": r, "g_rad_s": m.g_ref,
                            "full": m.fit_full.__dict__,
                            "reference": m.fit_reference.__dict__,
                        }, default=float) + "\n")
            ctx.add_output(diag_path)

        for r, msg in curve.failures:
            click.echo(f"shifts[{name}]: point R={r:g} m failed: {msg}", err=True)
        any_failures = any_failures or bool(curve.failures)
        click.echo(f"shifts[{name}]: {len(curve.distances)} distances, "
                   f"{len(curve.failures)} failures")

    if ctx.plot:
        ctx.add_output(report.plot_shift_curves(ctx.out_dir / "shifts.png",
                                                curves))
    ctx.manifest.wall_time = time.time() - t0
    ctx.manifest.write(ctx.out_dir)
    if any_failures:
        sys.exit(2)


@main.command(name="cg-scan")
@_common_options
def cg_scan(config_path, out_dir, variants, no_smoothing, threads, seed, no_plot):
    """Line-shift stability against the coarse-graining time."""
    t0 = time.time()
    ctx = _setup(config_path, out_dir, no_smoothing, threads, seed, no_plot,
                 "cg-scan")
    parsed = ctx.parsed
    cfg = parsed.config
    opts = parsed.options
    variant = variants[0] if variants else "full"

    rows_by_r = {}
    raw_rows = []
    for r in opts.cg_r_list:
        cfg_r = cfg.with_array(pair_array(r))
        rows, raw = cg_sensitivity(cfg_r, opts.cg_dt_list, variant=variant,
                                   g_over_gamma=opts.cg_g,
                                   points_per_window=opts.window_points,
                                   threads=ctx.threads)
        rows_by_r[r] = rows
        path = report.write_csv(
            ctx.out_dir / f"cg_scan_r{r * 1e9:.0f}nm.csv",
            ["dt_s", "rel_shift_line1", "rel_shift_line2"],
            [(row.dt_large, row.rel_shift_line1, row.rel_shift_line2)
             for row in rows])
        ctx.add_output(path)
        raw_rows.extend((r, d["dt_s"], d["shift12_hz"], d["shift13_hz"],
                         d["x2_rad_s"] / TWO_PI, d["x3_rad_s"] / TWO_PI)
                        for d in raw)
    path = report.write_csv(ctx.out_dir / "cg_scan_raw.csv",
                            ["r_m", "dt_s", "shift12_hz", "shift13_hz",
                             "x2_hz", "x3_hz"], raw_rows)
    ctx.add_output(path)
    if ctx.plot:
        ctx.add_output(report.plot_cg_rows(ctx.out_dir / "cg_scan.png",
                                           rows_by_r))
    ctx.manifest.wall_time = time.time() - t0
    ctx.manifest.write(ctx.out_dir)


@main.command(name="single-atom")
@_common_options
def single_atom(config_path, out_dir, variants, no_smoothing, threads, seed,
                no_plot):
    """Single-emitter line displacements versus drive strength."""
    t0 = time.time()
    ctx = _setup(config_path, out_dir, no_smoothing, threads, seed, no_plot,
                 "single-atom")
    parsed = ctx.parsed
    cfg = parsed.config
    opts = parsed.options
    if cfg.n_emitters != 1:
        raise click.ClickException(
            "single-atom requires a one-emitter configuration "
            f"(got {cfg.n_emitters} positions)")
    gamma = gamma_reference(cfg.scheme)
    names = list(variants) if variants else list(opts.single_atom_variants)

    # interference-free eigenfrequencies are the displacement reference
    eigen = predict_peak_offsets(cfg.with_toggles(variant_toggles("no-cross")))

    rows = []
    for f in opts.g_list:
        m = measure_line_shifts(cfg, "full", f * gamma,
                                window_halfwidth=opts.window_gamma * gamma,
                                points_per_window=opts.window_points,
                                threads=ctx.threads,
                                g12_override=parsed.g12_override)
        by_variant = {"full": m.fit_full, "no-cross": m.fit_reference}
        for name in names:
            fit = by_variant[name]
            rows.append({
                "variant": name, "g_over_gamma": f, "g_rad_s": f * gamma,
                "shift12_vs_eigen_hz": (fit.x2 - eigen[0]) / TWO_PI,
                "shift13_vs_eigen_hz": (fit.x3 - (eigen[1] - fit.omega0)) / TWO_PI,
                "shift12_vs_reffit_hz": m.shift12_hz if name == "full" else 0.0,
                "shift13_vs_reffit_hz": m.shift13_hz if name == "full" else 0.0,
                "residual_norm": fit.residual_norm,
                "converged": fit.converged,
            })
    header = ["variant", "g_over_gamma", "g_rad_s", "shift12_vs_eigen_hz",
              "shift13_vs_eigen_hz", "shift12_vs_reffit_hz",
              "shift13_vs_reffit_hz", "residual_norm", "converged"]
    path = report.write_csv(ctx.out_dir / "single_atom_shifts.csv", header,
                            [[row[k] for k in header] for row in rows])
    ctx.add_output(path)

    ext12, ext13, _ = zero_drive_line_shifts(
        cfg, "full", g_over_gamma=tuple(opts.g_list),
        window_halfwidth=opts.window_gamma * gamma,
        points_per_window=opts.window_points, threads=ctx.threads,
        g12_override=parsed.g12_override)
    path = report.write_csv(
        ctx.out_dir / "single_atom_zero_drive.csv",
        ["shift12_hz", "spread12_hz", "shift13_hz", "spread13_hz", "converged"],
        [(ext12.value, ext12.spread, ext13.value, ext13.spread,
          ext12.converged and ext13.converged)])
    ctx.add_output(path)
    click.echo(f"single-atom zero-drive shifts: {ext12.value:+.2f} Hz, "
               f"{ext13.value:+.2f} Hz")
    if ctx.plot:
        ctx.add_output(report.plot_single_atom(
            ctx.out_dir / "single_atom.png", rows, gamma))
    ctx.manifest.wall_time = time.time() - t0
    ctx.manifest.write(ctx.out_dir)


@main.command()
@_common_options
def coeffs(config_path, out_dir, variants, no_smoothing, threads, seed, no_plot):
    """Dump the master-equation coefficient set as CSV."""
    t0 = time.time()
    ctx = _setup(config_path, out_dir, no_smoothing, threads, seed, no_plot,
                 "coeffs")
    cfg = ctx.parsed.config
    name = variants[0] if variants else None
    if name is not None:
        cfg = cfg.with_toggles(variant_toggles(name))
    cset = build_coefficient_set(cfg)
    path = report.write_csv(ctx.out_dir / "coeffs.csv",
                            ["alpha", "beta", "i", "j", "re", "im", "kind"],
                            coefficient_rows(cset))
    ctx.add_output(path)
    min_eig, max_eig = cset.min_gamma_eigenvalue()
    click.echo(f"damping matrix eigenvalue range: [{min_eig:.6g}, {max_eig:.6g}] rad/s")
    ctx.manifest.wall_time = time.time() - t0
    ctx.manifest.write(ctx.out_dir)


def run(argv=None) -> int:
    """Programmatic entry point returning the exit code."""
    try:
        main.main(args=argv, standalone_mode=False)
        return 0
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError, click.ClickException) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(run())
