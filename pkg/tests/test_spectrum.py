import math

import numpy as np
import pytest

from superlind.coefficients import build_coefficient_set
from superlind.liouvillian import all_lowering_operators, assemble_liouvillian
from superlind.model import (DriveConfig, InterferenceToggles, SimConfig,
                             hydrogen_2s4p_preset, pair_array,
                             proportional_drive, single_emitter_array,
                             two_level_scheme)
from superlind.spectrum import (DetuningScanEngine, SpectrumTable,
                                default_detuning_grid, find_local_maxima,
                                gamma_reference, photon_signal, scan_detuning,
                                scan_variants, transition_gap)
from superlind.steadystate import solve_null_space

TWO_PI = 2.0 * math.pi
GAMMA = TWO_PI * 511e3


def test_signal_vanishes_on_ground_state():
    cfg = SimConfig(1e-11, hydrogen_2s4p_preset(), pair_array(0.1e-6))
    coeffs = build_coefficient_set(cfg)
    rho = np.zeros((9, 9), dtype=complex)
    rho[0, 0] = 1.0
    assert photon_signal(rho, coeffs, cfg.scheme, cfg.array) == 0.0


def test_signal_two_level_is_rate_times_population():
    s = two_level_scheme(GAMMA)
    cfg = SimConfig(1e-11, s, single_emitter_array())
    coeffs = build_coefficient_set(cfg)
    lind = assemble_liouvillian(cfg, DriveConfig(rabi={(0, 0): 0.4 * GAMMA}))
    rho = solve_null_space(lind).rho
    s_got = photon_signal(rho, coeffs, cfg.scheme, cfg.array)
    assert s_got == pytest.approx(GAMMA * rho[1, 1].real, rel=1e-12)


def test_signal_brute_force_double_sum_oracle():
    cfg = SimConfig(1e-11, hydrogen_2s4p_preset(), pair_array(0.03e-6))
    coeffs = build_coefficient_set(cfg)
    drive = proportional_drive(cfg.scheme, 2, 1.5 * GAMMA).with_detuning(0.2 * GAMMA)
    rho = solve_null_space(assemble_liouvillian(cfg, drive, coeffs)).rho
    ops = all_lowering_operators(cfg.scheme, cfg.array)
    expected = 0.0
    for a in range(2):
        for b in range(2):
            for e in range(2):
                for e2 in range(2):
                    expected += (coeffs.gamma[a, b, e, e2]
                                 * np.trace(ops[b][e2] @ rho
                                            @ ops[a][e].conj().T)).real
    got = photon_signal(rho, coeffs, cfg.scheme, cfg.array)
    assert got == pytest.approx(expected, rel=1e-12)


def test_signal_collective_enhancement_at_contact():
    # symmetric single-excitation state of two near-contact two-level atoms
    # emits at twice the single-atom excited rate
    s = two_level_scheme(GAMMA)
    cfg = SimConfig(1e-11, s, pair_array(1e-10))  # kR ~ 1e-3
    coeffs = build_coefficient_set(cfg)
    plus = np.zeros(4, dtype=complex)
    plus[1] = plus[2] = 1 / math.sqrt(2)  # (|ge> + |eg>)/sqrt(2)
    rho = np.outer(plus, plus.conj())
    got = photon_signal(rho, coeffs, s, cfg.array)
    assert got == pytest.approx(2.0 * GAMMA, rel=1e-5)
    # single excited atom
    cfg1 = SimConfig(1e-11, s, single_emitter_array())
    rho1 = np.diag([0.0, 1.0]).astype(complex)
    got1 = photon_signal(rho1, build_coefficient_set(cfg1), s, cfg1.array)
    assert got1 == pytest.approx(GAMMA, rel=1e-12)


def test_scan_requires_increasing_nonempty_grid():
    cfg = SimConfig(1e-11, hydrogen_2s4p_preset(), single_emitter_array())
    drive = proportional_drive(cfg.scheme, 1, 0.1 * GAMMA)
    with pytest.raises(ValueError):
        scan_detuning(cfg, drive, np.array([]))
    with pytest.raises(ValueError):
        scan_detuning(cfg, drive, np.array([1.0, 1.0, 2.0]))


def test_spectrum_table_invariants():
    with pytest.raises(ValueError):
        SpectrumTable(detunings=np.array([0.0, 1.0]),
                      signal=np.array([1.0, -0.5]),
                      toggles=InterferenceToggles())
    with pytest.raises(ValueError):
        SpectrumTable(detunings=np.array([0.0, 1.0, 1.0]),
                      signal=np.array([1.0, 1.0, 1.0]),
                      toggles=InterferenceToggles())


def test_scan_deterministic():
    cfg = SimConfig(1e-11, hydrogen_2s4p_preset(), pair_array(0.1e-6))
    drive = proportional_drive(cfg.scheme, 2, 2.0 * GAMMA)
    grid = np.linspace(-5 * GAMMA, 5 * GAMMA, 31)
    a = scan_detuning(cfg, drive, grid)
    b = scan_detuning(cfg, drive, grid.copy())
    assert np.array_equal(a.signal, b.signal)


def test_two_independent_emitters_double_single_signal():
    # with every inter-emitter toggle off the pair is exactly two copies
    s = hydrogen_2s4p_preset()
    off = InterferenceToggles.all_off()
    cfg2 = SimConfig(1e-11, s, pair_array(100 * 0.468e-6), toggles=off)
    cfg1 = SimConfig(1e-11, s, single_emitter_array(), toggles=off)
    g3 = gamma_reference(s)
    grid = np.linspace(-3 * g3, 3 * g3, 21)
    d2 = proportional_drive(s, 2, 0.5 * g3)
    d1 = proportional_drive(s, 1, 0.5 * g3)
    s2 = scan_detuning(cfg2, d2, grid).signal
    s1 = scan_detuning(cfg1, d1, grid).signal
    assert np.allclose(s2, 2.0 * s1, rtol=1e-6)


def test_signal_invariant_under_emitter_exchange():
    s = hydrogen_2s4p_preset()
    g3 = gamma_reference(s)
    grid = np.linspace(-2 * g3, 2 * g3, 11)
    drive = proportional_drive(s, 2, 1.0 * g3)
    axis = np.array([1.0, 0.0, 0.0])
    arr_a = pair_array(0.08e-6, axis)
    # same pair with labels swapped (positions reversed)
    from superlind.model import EmitterArray
    arr_b = EmitterArray(positions=arr_a.positions[::-1].copy())
    sa = scan_detuning(SimConfig(1e-11, s, arr_a), drive, grid).signal
    sb = scan_detuning(SimConfig(1e-11, s, arr_b), drive, grid).signal
    assert np.allclose(sa, sb, rtol=1e-10)


def test_default_grid_span_and_size():
    s = hydrogen_2s4p_preset()
    grid = default_detuning_grid(s)
    g3 = gamma_reference(s)
    w0 = transition_gap(s)
    assert grid.size == 2001
    assert grid[0] == pytest.approx(-100 * g3)
    assert grid[-1] == pytest.approx(w0 + 100 * g3)


def test_refinement_adds_points_near_peaks():
    s = hydrogen_2s4p_preset()
    cfg = SimConfig(1e-11, s, single_emitter_array())
    g3 = gamma_reference(s)
    drive = proportional_drive(s, 1, 2.0 * g3)
    coarse = np.linspace(-20 * g3, transition_gap(s) + 20 * g3, 301)
    plain = scan_detuning(cfg, drive, coarse, refine=False)
    refined = scan_detuning(cfg, drive, coarse, refine=True)
    assert refined.detunings.size > plain.detunings.size
    # refined grid still strictly increasing with physical signal
    assert np.all(np.diff(refined.detunings) > 0)
    assert refined.signal.min() >= -1e-10 * refined.signal.max()


def test_find_local_maxima_orders_by_height():
    x = np.linspace(0, 10, 101)
    y = np.exp(-((x - 3) ** 2) / 0.1) + 0.5 * np.exp(-((x - 7) ** 2) / 0.1)
    peaks = find_local_maxima(x, y)
    assert len(peaks) == 2
    assert peaks[0][0] == pytest.approx(3.0, abs=0.1)
    assert peaks[1][0] == pytest.approx(7.0, abs=0.1)
    assert peaks[0][1] > peaks[1][1]


def test_scan_variants_returns_all_requested():
    s = hydrogen_2s4p_preset()
    cfg = SimConfig(1e-11, s, pair_array(0.1e-6))
    g3 = gamma_reference(s)
    drive = proportional_drive(s, 2, 1.0 * g3)
    grid = np.linspace(-g3, g3, 5)
    from superlind.analysis import VARIANTS
    wanted = {k: VARIANTS[k] for k in ("full", "no-cross", "case-i", "case-ii")}
    tables = scan_variants(cfg, drive, grid, wanted)
    assert list(tables) == ["full", "no-cross", "case-i", "case-ii"]
    for name, table in tables.items():
        assert table.meta["variant"] == name
        assert table.signal.shape == grid.shape


def test_threaded_scan_matches_serial():
    s = hydrogen_2s4p_preset()
    cfg = SimConfig(1e-11, s, pair_array(0.1e-6))
    g3 = gamma_reference(s)
    drive = proportional_drive(s, 2, 1.0 * g3)
    grid = np.linspace(-3 * g3, 3 * g3, 101)
    serial = DetuningScanEngine(cfg, drive, threads=1).signals(grid)
    threaded = DetuningScanEngine(cfg, drive, threads=4).signals(grid)
    assert np.array_equal(serial, threaded)
