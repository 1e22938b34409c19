"""Photon-count signal and detuning scans.

The signal is the total steady-state emission rate over the full solid angle:
the double sum of damping coefficients times Tr[zeta_j rho zeta_i^dag], using
the same (smoothed, toggled) coefficient set as the dissipator.  Scans solve
one steady state per grid point; the detuning enters the generator linearly
through a diagonal, so scans share one base generator and run as batched
linear solves.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSet, build_coefficient_set
from .liouvillian import (all_lowering_operators, assemble_liouvillian,
                          detuning_generator, hamiltonian_superoperator,
                          rotating_frame_hamiltonian, unvec, vec)
from .model import DriveConfig, InterferenceToggles, SimConfig
from .steadystate import steady_state_batch


@dataclass(frozen=True)
class SpectrumTable:
    """(detuning, signal) samples for one toggle configuration."""

    detunings: np.ndarray   # rad/s, strictly increasing
    signal: np.ndarray      # rad/s (photon rate)
    toggles: InterferenceToggles
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        det = np.asarray(self.detunings, dtype=float)
        sig = np.asarray(self.signal, dtype=float)
        if det.shape != sig.shape:
            raise ValueError("detuning and signal arrays must align")
        if det.size and np.any(np.diff(det) <= 0):
            raise ValueError("detunings must be strictly increasing")
        smax = sig.max() if sig.size else 0.0
        if sig.size and sig.min() < -1e-10 * max(smax, 1e-300):
            raise ValueError(f"negative photon rate beyond float noise: {sig.min()!r}")
        det.flags.writeable = False
        sig.flags.writeable = False
        object.__setattr__(self, "detunings", det)
        object.__setattr__(self, "signal", sig)

    def normalized_signal(self) -> np.ndarray:
        smax = self.signal.max()
        return self.signal / smax if smax > 0 else self.signal.copy()


def signal_matrix(coeffs: CoefficientSet, scheme, array) -> np.ndarray:
    """E such that the photon rate is tr(E rho).

    S = sum Gamma[a,b,e,e'] tr(zeta_e^{a dag} zeta_e'^b rho); E is hermitian
    because the damping-coefficient matrix is, so the rate is real on any
    hermitian state.
    """
    ops = all_lowering_operators(scheme, array)
    n, t = len(ops), len(ops[0])
    d = ops[0][0].shape[0]
    e_mat = np.zeros((d, d), dtype=complex)
    for alpha in range(n):
        for beta in range(n):
            for e in range(t):
                for e2 in range(t):
                    g = coeffs.gamma[alpha, beta, e, e2]
                    if g != 0.0:
                        e_mat += g * (ops[alpha][e].conj().T @ ops[beta][e2])
    return e_mat


def photon_signal(rho_st: np.ndarray, coeffs: CoefficientSet, scheme, array) -> float:
    """Steady-state photon rate (rad/s) for one density matrix."""
    e_mat = signal_matrix(coeffs, scheme, array)
    value = complex(np.trace(e_mat @ rho_st))
    if abs(value.imag) > 1e-10 * max(abs(value), 1e-300):
        raise AssertionError(f"photon rate has a non-negligible imaginary part: {value!r}")
    return float(value.real)


class DetuningScanEngine:
    """Shared machinery for scanning the steady state over laser detuning.

    The generator is split as L(delta) = L(0) + delta * diag(D); the base part
    is assembled once per configuration and every grid point is then one
    bordered linear solve.
    """

    def __init__(self, config: SimConfig, drive: DriveConfig,
                 coeffs: CoefficientSet | None = None, threads: int = 1):
        self.config = config
        self.coeffs = coeffs if coeffs is not None else build_coefficient_set(config)
        self.drive0 = drive.with_detuning(0.0)
        self.l_base = assemble_liouvillian(config, self.drive0, self.coeffs)
        h1d = np.real(np.diag(detuning_generator(config)))
        # diagonal of -i (I kron H1 - H1^T kron I) for the real diagonal H1,
        # in column-stacking order (index c*d + r carries h1d[r] - h1d[c])
        ones = np.ones_like(h1d)
        self.diag_direction = -1j * (np.kron(ones, h1d) - np.kron(h1d, ones))
        self.e_signal = signal_matrix(self.coeffs, config.scheme, config.array)
        self.threads = max(1, threads)

    def steady_vectors(self, deltas: np.ndarray) -> np.ndarray:
        deltas = np.asarray(deltas, dtype=float)
        if self.threads == 1 or len(deltas) < 64:
            return steady_state_batch(self.l_base, self.diag_direction, deltas)
        chunks = np.array_split(np.arange(len(deltas)), self.threads)
        out = np.empty((len(deltas), self.l_base.shape[0]), dtype=complex)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            futures = [(idx, pool.submit(steady_state_batch, self.l_base,
                                         self.diag_direction, deltas[idx]))
                       for idx in chunks if len(idx)]
            for idx, fut in futures:
                out[idx] = fut.result()
        return out

    def signals(self, deltas: np.ndarray) -> np.ndarray:
        vecs = self.steady_vectors(deltas)
        d = self.e_signal.shape[0]
        # vec index c*d + r holds rho[r, c], so the C-order reshape is rho^T;
        # hermitize before tracing against the hermitian signal matrix
        rho_t = vecs.reshape(len(vecs), d, d)
        rho_t = 0.5 * (rho_t + np.conj(rho_t.transpose(0, 2, 1)))
        values = np.einsum("mn,kmn->k", self.e_signal, rho_t)
        worst_imag = np.abs(values.imag).max() if values.size else 0.0
        scale = max(np.abs(values).max(), 1e-300)
        if worst_imag > 1e-10 * scale:
            raise AssertionError(f"photon rate lost reality in scan: {worst_imag:.3e}")
        sig = values.real
        # clip isolated float-noise negatives at the -1e-10*max level
        smax = max(sig.max(), 0.0)
        return np.where(sig > -1e-10 * smax, np.maximum(sig, 0.0), sig)

    def table(self, deltas: np.ndarray, meta: dict | None = None) -> SpectrumTable:
        deltas = np.asarray(deltas, dtype=float)
        return SpectrumTable(detunings=deltas, signal=self.signals(deltas),
                             toggles=self.config.toggles, meta=meta or {})


def gamma_reference(scheme) -> float:
    """Scale for detuning grids: the largest decay rate in the scheme."""
    return max(t.decay_rate for t in scheme.transitions)


def transition_gap(scheme) -> float:
    """Frequency gap between the outermost transitions (0 for a single one)."""
    freqs = [t.frequency for t in scheme.transitions]
    return max(freqs) - min(freqs)


def default_detuning_grid(scheme, points: int = 2001,
                          pad: float = 100.0) -> np.ndarray:
    """Uniform grid spanning pad*gamma below the first resonance to pad*gamma
    above the last one."""
    g = gamma_reference(scheme)
    return np.linspace(-pad * g, transition_gap(scheme) + pad * g, points)


def find_local_maxima(detunings: np.ndarray, signal: np.ndarray,
                      floor_rel: float = 1e-12) -> list[tuple[float, float]]:
    """Strict interior local maxima above a relative floor, tallest first."""
    smax = signal.max() if signal.size else 0.0
    out = []
    for k in range(1, len(signal) - 1):
        if signal[k] > signal[k - 1] and signal[k] > signal[k + 1] \
                and signal[k] > floor_rel * smax:
            out.append((float(detunings[k]), float(signal[k])))
    out.sort(key=lambda p: -p[1])
    return out


def scan_detuning(config: SimConfig, drive_template: DriveConfig,
                  delta_grid: np.ndarray, threads: int = 1,
                  refine: bool = False, meta: dict | None = None) -> SpectrumTable:
    """Steady-state photon rate over a detuning grid.

    With ``refine`` a second pass adds a 10x denser mesh within 10 linewidths
    of each detected maximum, for fit-quality resolution of narrow peaks.
    """
    delta_grid = np.asarray(delta_grid, dtype=float)
    if delta_grid.size == 0:
        raise ValueError("detuning grid is empty")
    if np.any(np.diff(delta_grid) <= 0):
        raise ValueError("detuning grid must be strictly increasing")
    engine = DetuningScanEngine(config, drive_template, threads=threads)
    signal = engine.signals(delta_grid)
    if refine and delta_grid.size >= 3:
        g = gamma_reference(config.scheme)
        spacing = np.median(np.diff(delta_grid))
        extra: list[np.ndarray] = []
        for center, _ in find_local_maxima(delta_grid, signal, floor_rel=1e-6)[:6]:
            n_fine = int(round(20.0 * g / (spacing / 10.0))) + 1
            extra.append(np.linspace(center - 10.0 * g, center + 10.0 * g, n_fine))
        if extra:
            fine = np.unique(np.concatenate(extra))
            fine = fine[(fine > delta_grid[0]) & (fine < delta_grid[-1])]
            fine = np.setdiff1d(fine, delta_grid)
            if fine.size:
                fine_sig = engine.signals(fine)
                merged = np.concatenate([delta_grid, fine])
                order = np.argsort(merged)
                delta_grid = merged[order]
                signal = np.concatenate([signal, fine_sig])[order]
    return SpectrumTable(detunings=delta_grid, signal=signal,
                         toggles=config.toggles, meta=meta or {})


def scan_variants(config: SimConfig, drive_template: DriveConfig,
                  delta_grid: np.ndarray, variants: dict[str, InterferenceToggles],
                  threads: int = 1, refine: bool = False) -> dict[str, SpectrumTable]:
    """One scan per named toggle configuration, deterministic order."""
    out: dict[str, SpectrumTable] = {}
    for name, toggles in variants.items():
        cfg = config.with_toggles(toggles)
        out[name] = scan_detuning(cfg, drive_template, delta_grid,
                                  threads=threads, refine=refine,
                                  meta={"variant": name})
    return out
