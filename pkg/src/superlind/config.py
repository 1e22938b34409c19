"""Run-configuration parsing: strict YAML with Hz-to-angular conversion.

The file format is nested key-value YAML.  Every frequency-valued key carries
an ``_hz`` suffix (or an ``_in_gamma3`` / ``_gamma3`` suffix for values in
units of the largest decay rate) and is converted to rad/s on parse; unknown
keys are hard errors naming the full key path.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .model import (EmitterArray, InterferenceToggles, LevelScheme, SimConfig,
                    Transition, hydrogen_2s4p_preset)

TWO_PI = 2.0 * math.pi

PRESETS = {"hydrogen_2s4p": hydrogen_2s4p_preset}


class ConfigError(ValueError):
    """Configuration file is malformed; the message names the offending key."""


def _canon_omega(value: float) -> float:
    # snap to the Hz grid so values derived from non-Hz keys serialize and
    # re-parse bit-exactly (the map x -> 2pi*(x/2pi) is idempotent)
    return TWO_PI * (value / TWO_PI)


def _require_keys(section: dict, allowed: set[str], path: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in '{path}' "
                          f"(allowed: {sorted(allowed)})")


def _get_number(section: dict, key: str, path: str, default=None,
                positive: bool = False):
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key '{path}.{key}'")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{path}.{key}' must be a number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(f"'{path}.{key}' must be positive, got {value}")
    return float(value)


@dataclass
class RunOptions:
    """Command-level options carried by the config file (CLI flags may
    override individual entries)."""

    # spectrum command
    spectrum_points: int = 2001
    spectrum_pad_gamma: float = 100.0
    spectrum_refine: bool = True
    spectrum_variants: tuple[str, ...] = ("full", "no-cross")
    delta_min: float | None = None   # rad/s, optional grid override
    delta_max: float | None = None
    # shifts command
    shifts_variants: tuple[str, ...] = ("full",)
    r_min: float = 5.0e-8
    r_max: float = 1.0e-6
    r_points: int = 25
    r_spacing: str = "log"
    g_list: tuple[float, ...] = (0.3, 0.1, 0.03, 0.01)  # units of gamma_ref
    window_gamma: float = 10.0
    window_points: int = 401
    # cg-scan command
    cg_dt_list: tuple[float, ...] = (1e-8, 1e-9, 1e-10, 1e-11, 1e-12)
    cg_r_list: tuple[float, ...] = (1e-7, 1e-6)
    cg_g: float = 0.01
    # single-atom command
    single_atom_variants: tuple[str, ...] = ("full", "no-cross")


@dataclass
class ParsedConfig:
    config: SimConfig
    g13: float                    # rad/s, drive on the highest transition
    g12_override: float | None    # rad/s, or None to infer from amplitudes
    detuning: float               # rad/s
    options: RunOptions
    normalized: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.normalized)


def config_hash(normalized: dict) -> str:
    blob = json.dumps(normalized, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _parse_scheme(section: dict, path: str = "scheme") -> LevelScheme:
    _require_keys(section, {"num_levels", "ground", "transitions",
                            "diagonal_shifts_hz"}, path)
    num_levels = section.get("num_levels")
    if not isinstance(num_levels, int) or num_levels < 2:
        raise ConfigError(f"'{path}.num_levels' must be an integer >= 2")
    ground = section.get("ground", 0)
    transitions = []
    for k, tsec in enumerate(section.get("transitions", [])):
        tpath = f"{path}.transitions[{k}]"
        _require_keys(tsec, {"lower", "upper", "frequency_hz", "decay_rate_hz",
                             "direction", "amplitude"}, tpath)
        try:
            transitions.append(Transition(
                lower=int(tsec["lower"]), upper=int(tsec["upper"]),
                frequency=TWO_PI * _get_number(tsec, "frequency_hz", tpath, positive=True),
                decay_rate=TWO_PI * _get_number(tsec, "decay_rate_hz", tpath, positive=True),
                dipole_direction=np.asarray(tsec["direction"], dtype=float),
                dipole_sign_amplitude=_get_number(tsec, "amplitude", tpath)))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid transition at '{tpath}': {exc}") from None
    shifts_raw = section.get("diagonal_shifts_hz", {})
    shifts = {int(k): TWO_PI * float(v) for k, v in shifts_raw.items()}
    try:
        return LevelScheme(num_levels=num_levels, ground=ground,
                           transitions=tuple(transitions), diagonal_shifts=shifts)
    except ValueError as exc:
        raise ConfigError(f"invalid '{path}': {exc}") from None


_TOP_KEYS = {"preset", "scheme", "coarse_grain_dt_s", "temperature_k",
             "smoothing", "cross_shift_sign", "positions_m", "toggles",
             "drive", "spectrum", "shifts", "cg", "single_atom"}
_TOGGLE_KEYS = {"intra_cross_damping", "inter_cross_damping",
                "intra_cross_shift", "inter_cross_shift", "inter_diagonal"}
_DRIVE_KEYS = {"g13_hz", "g13_in_gamma3", "g12_hz", "detuning_hz"}
_SPECTRUM_KEYS = {"points", "pad_gamma", "refine", "variants",
                  "delta_min_gamma", "delta_max_gamma",
                  "delta_min_hz", "delta_max_hz"}
_SHIFTS_KEYS = {"variants", "r_min_m", "r_max_m", "points", "spacing",
                "g_list_gamma3", "window_gamma", "window_points"}
_CG_KEYS = {"dt_list_s", "r_list_m", "g_gamma3"}
_SINGLE_KEYS = {"variants"}


def parse_config_dict(raw: dict) -> ParsedConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a mapping")
    _require_keys(raw, _TOP_KEYS, "<top>")

    if ("preset" in raw) == ("scheme" in raw):
        raise ConfigError("exactly one of 'preset' or 'scheme' must be given")
    if "preset" in raw:
        name = raw["preset"]
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r} (available: {sorted(PRESETS)})")
        scheme = PRESETS[name]()
    else:
        scheme = _parse_scheme(raw["scheme"])

    dt = _get_number(raw, "coarse_grain_dt_s", "<top>", default=1e-11)
    if dt <= 0:
        raise ConfigError(f"'coarse_grain_dt_s' must be positive, got {dt}")
    temperature = _get_number(raw, "temperature_k", "<top>", default=300.0)
    if temperature < 0:
        raise ConfigError(f"'temperature_k' must be >= 0, got {temperature}")
    smoothing = bool(raw.get("smoothing", True))
    cross_shift_sign = int(raw.get("cross_shift_sign", 1))
    if cross_shift_sign not in (1, -1):
        raise ConfigError("'cross_shift_sign' must be +1 or -1")

    positions = raw.get("positions_m", [[0.0, 0.0, 0.0]])
    try:
        array = EmitterArray(positions=np.asarray(positions, dtype=float))
    except ValueError as exc:
        raise ConfigError(f"invalid 'positions_m': {exc}") from None

    tsec = raw.get("toggles", {})
    _require_keys(tsec, _TOGGLE_KEYS, "toggles")
    toggles = InterferenceToggles(**{k: bool(tsec.get(k, True)) for k in _TOGGLE_KEYS})

    gamma_ref = max(t.decay_rate for t in scheme.transitions)
    dsec = raw.get("drive", {})
    _require_keys(dsec, _DRIVE_KEYS, "drive")
    if "g13_hz" in dsec and "g13_in_gamma3" in dsec:
        raise ConfigError("'drive' takes g13_hz or g13_in_gamma3, not both")
    if "g13_hz" in dsec:
        g13 = TWO_PI * _get_number(dsec, "g13_hz", "drive")
    else:
        g13 = _canon_omega(
            _get_number(dsec, "g13_in_gamma3", "drive", default=0.01) * gamma_ref)
    g12_override = None
    if dsec.get("g12_hz") is not None:
        g12_override = TWO_PI * _get_number(dsec, "g12_hz", "drive")
    detuning = TWO_PI * _get_number(dsec, "detuning_hz", "drive", default=0.0)

    options = RunOptions()
    ssec = raw.get("spectrum", {})
    _require_keys(ssec, _SPECTRUM_KEYS, "spectrum")
    options.spectrum_points = int(ssec.get("points", options.spectrum_points))
    if options.spectrum_points < 2:
        raise ConfigError("'spectrum.points' must be at least 2")
    options.spectrum_pad_gamma = _get_number(ssec, "pad_gamma", "spectrum",
                                             default=options.spectrum_pad_gamma)
    options.spectrum_refine = bool(ssec.get("refine", True))
    options.spectrum_variants = tuple(ssec.get("variants", options.spectrum_variants))
    for side in ("min", "max"):
        key_g, key_hz = f"delta_{side}_gamma", f"delta_{side}_hz"
        if ssec.get(key_g) is not None and ssec.get(key_hz) is not None:
            raise ConfigError(f"'spectrum' takes {key_g} or {key_hz}, not both")
        value = None
        if ssec.get(key_g) is not None:
            value = _canon_omega(float(ssec[key_g]) * gamma_ref)
        elif ssec.get(key_hz) is not None:
            value = TWO_PI * float(ssec[key_hz])
        setattr(options, f"delta_{side}", value)

    hsec = raw.get("shifts", {})
    _require_keys(hsec, _SHIFTS_KEYS, "shifts")
    options.shifts_variants = tuple(hsec.get("variants", options.shifts_variants))
    options.r_min = _get_number(hsec, "r_min_m", "shifts", default=options.r_min,
                                positive=True)
    options.r_max = _get_number(hsec, "r_max_m", "shifts", default=options.r_max,
                                positive=True)
    options.r_points = int(hsec.get("points", options.r_points))
    options.r_spacing = str(hsec.get("spacing", options.r_spacing))
    if options.r_spacing not in ("log", "linear"):
        raise ConfigError("'shifts.spacing' must be 'log' or 'linear'")
    options.g_list = tuple(float(g) for g in hsec.get("g_list_gamma3", options.g_list))
    options.window_gamma = _get_number(hsec, "window_gamma", "shifts",
                                       default=options.window_gamma, positive=True)
    options.window_points = int(hsec.get("window_points", options.window_points))

    csec = raw.get("cg", {})
    _require_keys(csec, _CG_KEYS, "cg")
    options.cg_dt_list = tuple(float(x) for x in csec.get("dt_list_s", options.cg_dt_list))
    options.cg_r_list = tuple(float(x) for x in csec.get("r_list_m", options.cg_r_list))
    options.cg_g = _get_number(csec, "g_gamma3", "cg", default=options.cg_g,
                               positive=True)

    qsec = raw.get("single_atom", {})
    _require_keys(qsec, _SINGLE_KEYS, "single_atom")
    options.single_atom_variants = tuple(qsec.get("variants",
                                                  options.single_atom_variants))

    config = SimConfig(coarse_grain_dt=dt, scheme=scheme, array=array,
                       toggles=toggles, temperature=temperature,
                       smoothing=smoothing, cross_shift_sign=cross_shift_sign)
    normalized = normalize_config(config, g13, g12_override, detuning, options, raw)
    return ParsedConfig(config=config, g13=g13, g12_override=g12_override,
                        detuning=detuning, options=options, normalized=normalized)


def parse_config(path: str) -> ParsedConfig:
    """Load and validate a YAML run configuration."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"cannot parse {path}{where}: {exc}") from None
    if raw is None:
        raise ConfigError(f"{path} is empty")
    return parse_config_dict(raw)


def normalize_config(config: SimConfig, g13: float, g12_override: float | None,
                     detuning: float, options: RunOptions, raw: dict) -> dict:
    """Canonical dictionary of everything that determines the outputs.

    Internal values (rad/s) are used so that equivalent inputs expressed in
    different unit keys hash identically.
    """
    scheme = config.scheme
    return {
        "scheme": {
            "num_levels": scheme.num_levels,
            "ground": scheme.ground,
            "transitions": [
                {"lower": t.lower, "upper": t.upper, "frequency": t.frequency,
                 "decay_rate": t.decay_rate,
                 "direction": list(t.dipole_direction),
                 "amplitude": t.dipole_sign_amplitude}
                for t in scheme.transitions],
            "diagonal_shifts": {str(k): v for k, v in
                                sorted(scheme.diagonal_shifts.items())},
        },
        "coarse_grain_dt": config.coarse_grain_dt,
        "temperature": config.temperature,
        "smoothing": config.smoothing,
        "cross_shift_sign": config.cross_shift_sign,
        "positions": [list(p) for p in config.array.positions],
        "toggles": {k: getattr(config.toggles, k) for k in sorted(_TOGGLE_KEYS)},
        "drive": {"g13": g13, "g12_override": g12_override, "detuning": detuning},
        "options": {
            "spectrum": [options.spectrum_points, options.spectrum_pad_gamma,
                         options.spectrum_refine, list(options.spectrum_variants),
                         options.delta_min, options.delta_max],
            "shifts": [list(options.shifts_variants), options.r_min, options.r_max,
                       options.r_points, options.r_spacing, list(options.g_list),
                       options.window_gamma, options.window_points],
            "cg": [list(options.cg_dt_list), list(options.cg_r_list), options.cg_g],
            "single_atom": [list(options.single_atom_variants)],
        },
    }


def serialize_config(parsed: ParsedConfig) -> str:
    """Round-trippable YAML for a parsed configuration.

    Frequencies are written back in Hz; floats survive the round trip exactly
    (shortest-repr YAML floats parse back to the same binary values).
    """
    config, scheme = parsed.config, parsed.config.scheme
    doc: dict = {
        "scheme": {
            "num_levels": scheme.num_levels,
            "ground": scheme.ground,
            "transitions": [
                {"lower": t.lower, "upper": t.upper,
                 "frequency_hz": t.frequency / TWO_PI,
                 "decay_rate_hz": t.decay_rate / TWO_PI,
                 "direction": [float(x) for x in t.dipole_direction],
                 "amplitude": t.dipole_sign_amplitude}
                for t in scheme.transitions],
            "diagonal_shifts_hz": {k: v / TWO_PI for k, v in
                                   sorted(scheme.diagonal_shifts.items())},
        },
        "coarse_grain_dt_s": config.coarse_grain_dt,
        "temperature_k": config.temperature,
        "smoothing": config.smoothing,
        "cross_shift_sign": config.cross_shift_sign,
        "positions_m": [[float(x) for x in p] for p in config.array.positions],
        "toggles": {k: getattr(config.toggles, k) for k in sorted(_TOGGLE_KEYS)},
        "drive": {"g13_hz": parsed.g13 / TWO_PI,
                  "detuning_hz": parsed.detuning / TWO_PI},
        "spectrum": {"points": parsed.options.spectrum_points,
                     "pad_gamma": parsed.options.spectrum_pad_gamma,
                     "refine": parsed.options.spectrum_refine,
                     "variants": list(parsed.options.spectrum_variants),
                     **({"delta_min_hz": parsed.options.delta_min / TWO_PI}
                        if parsed.options.delta_min is not None else {}),
                     **({"delta_max_hz": parsed.options.delta_max / TWO_PI}
                        if parsed.options.delta_max is not None else {})},
        "shifts": {"variants": list(parsed.options.shifts_variants),
                   "r_min_m": parsed.options.r_min,
                   "r_max_m": parsed.options.r_max,
                   "points": parsed.options.r_points,
                   "spacing": parsed.options.r_spacing,
                   "g_list_gamma3": list(parsed.options.g_list),
                   "window_gamma": parsed.options.window_gamma,
                   "window_points": parsed.options.window_points},
        "cg": {"dt_list_s": list(parsed.options.cg_dt_list),
               "r_list_m": list(parsed.options.cg_r_list),
               "g_gamma3": parsed.options.cg_g},
        "single_atom": {"variants": list(parsed.options.single_atom_variants)},
    }
    if parsed.g12_override is not None:
        doc["drive"]["g12_hz"] = parsed.g12_override / TWO_PI
    return yaml.safe_dump(doc, sort_keys=False)
