import json
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from superlind.cli import run
from superlind.config import (ConfigError, parse_config, parse_config_dict,
                              serialize_config)
from superlind.model import hydrogen_2s4p_preset

TWO_PI = 2.0 * math.pi

PAIR_DOC = {
    "preset": "hydrogen_2s4p",
    "coarse_grain_dt_s": 1e-11,
    "positions_m": [[0.0, 0.0, 0.0], [1e-7, 0.0, 0.0]],
    "drive": {"g13_in_gamma3": 2.0},
    "spectrum": {"points": 101, "refine": False, "variants": ["full", "no-cross"],
                 "delta_min_gamma": -5.0, "delta_max_gamma": 5.0},
}


def _write(tmp_path, doc, name="config.yaml") -> str:
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return str(path)


# --- parsing ------------------------------------------------------------------

def test_parse_preset_matches_builtin():
    parsed = parse_config_dict({"preset": "hydrogen_2s4p"})
    builtin = hydrogen_2s4p_preset()
    got = parsed.config.scheme
    assert got.num_levels == builtin.num_levels
    for a, b in zip(got.transitions, builtin.transitions):
        assert a.frequency == b.frequency
        assert a.decay_rate == b.decay_rate
        assert a.dipole_sign_amplitude == b.dipole_sign_amplitude
    assert got.diagonal_shifts == builtin.diagonal_shifts


def test_parse_unknown_key_is_hard_error():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_dict({"preset": "hydrogen_2s4p", "bogus_key": 1})
    with pytest.raises(ConfigError, match="drive"):
        parse_config_dict({"preset": "hydrogen_2s4p", "drive": {"g14_hz": 1.0}})


def test_parse_negative_dt_names_field():
    with pytest.raises(ConfigError, match="coarse_grain_dt_s"):
        parse_config_dict({"preset": "hydrogen_2s4p", "coarse_grain_dt_s": -1e-11})


def test_parse_requires_exactly_one_scheme_source():
    with pytest.raises(ConfigError):
        parse_config_dict({})
    with pytest.raises(ConfigError):
        parse_config_dict({"preset": "hydrogen_2s4p",
                           "scheme": {"num_levels": 2, "ground": 0,
                                      "transitions": []}})


def test_parse_hz_conversion():
    parsed = parse_config_dict({"preset": "hydrogen_2s4p",
                                "drive": {"g13_hz": 1000.0, "detuning_hz": -50.0}})
    assert parsed.g13 == pytest.approx(TWO_PI * 1000.0)
    assert parsed.detuning == pytest.approx(-TWO_PI * 50.0)


def test_parse_rejects_both_drive_units():
    with pytest.raises(ConfigError):
        parse_config_dict({"preset": "hydrogen_2s4p",
                           "drive": {"g13_hz": 1.0, "g13_in_gamma3": 1.0}})


def test_parse_custom_scheme():
    doc = {
        "scheme": {
            "num_levels": 2, "ground": 0,
            "transitions": [{"lower": 0, "upper": 1, "frequency_hz": 6.4e14,
                             "decay_rate_hz": 5e5, "direction": [0, 0, 1],
                             "amplitude": 1.0}],
            "diagonal_shifts_hz": {0: 0.0},
        },
    }
    parsed = parse_config_dict(doc)
    assert parsed.config.scheme.num_levels == 2
    assert parsed.config.scheme.transitions[0].frequency == pytest.approx(
        TWO_PI * 6.4e14)


def test_roundtrip_hash_identity():
    parsed = parse_config_dict(PAIR_DOC)
    again = parse_config_dict(yaml.safe_load(serialize_config(parsed)))
    assert parsed.config_hash == again.config_hash
    # and the round trip is idempotent at the YAML level too
    assert serialize_config(parsed) == serialize_config(again)


def test_preset_fields_bit_exact_through_config_format():
    parsed = parse_config_dict({"preset": "hydrogen_2s4p"})
    again = parse_config_dict(yaml.safe_load(serialize_config(parsed)))
    a, b = parsed.config.scheme, again.config.scheme
    for ta, tb in zip(a.transitions, b.transitions):
        assert ta.frequency == tb.frequency
        assert ta.decay_rate == tb.decay_rate
        assert ta.dipole_sign_amplitude == tb.dipole_sign_amplitude
        assert np.array_equal(ta.dipole_direction, tb.dipole_direction)
    assert a.diagonal_shifts == b.diagonal_shifts


# --- commands -----------------------------------------------------------------

def test_spectrum_command_outputs(tmp_path):
    cfg = _write(tmp_path, PAIR_DOC)
    out = tmp_path / "out"
    assert run(["spectrum", "--config", cfg, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "spectrum"
    for rel in manifest["outputs"]:
        assert (out / rel).exists()
    header = (out / "spectrum_full.csv").read_text().splitlines()[0]
    assert header.split(",")[:3] == ["delta_hz", "signal", "variant"]
    assert (out / "spectrum.png").exists()


def test_spectrum_command_deterministic_bytes(tmp_path):
    cfg = _write(tmp_path, PAIR_DOC)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert run(["spectrum", "--config", cfg, "--out", str(out1), "--no-plot"]) == 0
    assert run(["spectrum", "--config", cfg, "--out", str(out2), "--no-plot"]) == 0
    a = (out1 / "spectrum_full.csv").read_bytes()
    b = (out2 / "spectrum_full.csv").read_bytes()
    assert a == b


def test_spectrum_no_smoothing_changes_output(tmp_path):
    cfg = _write(tmp_path, PAIR_DOC)
    out1, out2 = tmp_path / "s", tmp_path / "r"
    assert run(["spectrum", "--config", cfg, "--out", str(out1), "--no-plot"]) == 0
    assert run(["spectrum", "--config", cfg, "--out", str(out2), "--no-plot",
                "--no-smoothing"]) == 0
    a = (out1 / "spectrum_full.csv").read_bytes()
    b = (out2 / "spectrum_full.csv").read_bytes()
    assert a != b
    # the interference-free reference does not depend on the kernel choice
    a_ref = (out1 / "spectrum_no-cross.csv").read_bytes()
    b_ref = (out2 / "spectrum_no-cross.csv").read_bytes()
    assert a_ref == b_ref


def test_variant_flag_overrides_config(tmp_path):
    cfg = _write(tmp_path, PAIR_DOC)
    out = tmp_path / "out"
    assert run(["spectrum", "--config", cfg, "--out", str(out), "--no-plot",
                "--variant", "case-i", "--variant", "case-ii"]) == 0
    assert (out / "spectrum_case-i.csv").exists()
    assert (out / "spectrum_case-ii.csv").exists()
    assert not (out / "spectrum_full.csv").exists()


def test_shifts_command(tmp_path):
    doc = dict(PAIR_DOC)
    doc["shifts"] = {"variants": ["cross-damping-only"], "r_min_m": 5e-7,
                     "r_max_m": 1e-6, "points": 2, "g_list_gamma3": [0.1, 0.03, 0.01],
                     "window_points": 301}
    cfg = _write(tmp_path, doc)
    out = tmp_path / "out"
    assert run(["shifts", "--config", cfg, "--out", str(out), "--no-plot"]) == 0
    lines = (out / "shifts_cross-damping-only.csv").read_text().splitlines()
    assert lines[0] == "r_m,shift12_hz,shift13_hz,variant,converged"
    assert len(lines) == 3
    per_g = (out / "shifts_cross-damping-only_per_g.csv").read_text().splitlines()
    assert len(per_g) == 1 + 2 * 3  # two distances, three drives


def test_shifts_fit_diagnostics(tmp_path):
    doc = dict(PAIR_DOC)
    doc["shifts"] = {"variants": ["full"], "r_min_m": 1e-6, "r_max_m": 2e-6,
                     "points": 2, "g_list_gamma3": [0.1, 0.03, 0.01],
                     "window_points": 301}
    cfg = _write(tmp_path, doc)
    out = tmp_path / "out"
    assert run(["shifts", "--config", cfg, "--out", str(out), "--no-plot",
                "--fit-diagnostics"]) == 0
    diag = (out / "fit_diagnostics_full.jsonl").read_text().splitlines()
    assert len(diag) == 2 * 3
    record = json.loads(diag[0])
    assert "full" in record and "reference" in record


def test_single_atom_command(tmp_path):
    doc = {"preset": "hydrogen_2s4p",
           "positions_m": [[0.0, 0.0, 0.0]],
           "shifts": {"g_list_gamma3": [0.1, 0.03, 0.01], "window_points": 301}}
    cfg = _write(tmp_path, doc)
    out = tmp_path / "out"
    assert run(["single-atom", "--config", cfg, "--out", str(out), "--no-plot"]) == 0
    rows = (out / "single_atom_shifts.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 3  # two variants x three drives
    zd = (out / "single_atom_zero_drive.csv").read_text().splitlines()
    vals = zd[1].split(",")
    assert float(vals[0]) == pytest.approx(-193.2, abs=10)
    assert float(vals[2]) == pytest.approx(+193.1, abs=10)


def test_single_atom_rejects_pair_config(tmp_path):
    cfg = _write(tmp_path, PAIR_DOC)
    out = tmp_path / "out"
    assert run(["single-atom", "--config", cfg, "--out", str(out)]) == 1


def test_cg_scan_command(tmp_path):
    doc = dict(PAIR_DOC)
    doc["cg"] = {"dt_list_s": [1e-10, 1e-11, 1e-12], "r_list_m": [1e-7],
                 "g_gamma3": 0.01}
    doc["shifts"] = {"window_points": 301}
    cfg = _write(tmp_path, doc)
    out = tmp_path / "out"
    assert run(["cg-scan", "--config", cfg, "--out", str(out), "--no-plot"]) == 0
    lines = (out / "cg_scan_r100nm.csv").read_text().splitlines()
    assert lines[0] == "dt_s,rel_shift_line1,rel_shift_line2"
    assert len(lines) == 3  # two consecutive pairs
    raw = (out / "cg_scan_raw.csv").read_text().splitlines()
    assert len(raw) == 4


def test_coeffs_command(tmp_path):
    cfg = _write(tmp_path, PAIR_DOC)
    out = tmp_path / "out"
    assert run(["coeffs", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "coeffs.csv").read_text().splitlines()
    assert lines[0] == "alpha,beta,i,j,re,im,kind"
    kinds = {line.split(",")[-1] for line in lines[1:]}
    assert kinds == {"gamma", "shift_intra", "shift_inter", "thermal"}


def test_missing_config_is_fatal(tmp_path):
    assert run(["spectrum", "--config", str(tmp_path / "nope.yaml"),
                "--out", str(tmp_path / "out")]) != 0


def test_invalid_config_is_fatal(tmp_path):
    cfg = _write(tmp_path, {"preset": "hydrogen_2s4p", "bogus": 1})
    assert run(["coeffs", "--config", cfg, "--out", str(tmp_path / "out")]) == 1
