"""Domain types for multilevel emitters, geometry, drive and run configuration.

All frequencies are angular (rad/s) internally.  The command-line layer accepts
plain Hz and multiplies by 2*pi at the boundary, so a single convention holds
everywhere in the numerics.  Dipoles are stored as a unit direction plus a
signed relative amplitude; absolute dipole magnitudes never enter because every
coupling constant is expressed through the decay rates and normalized dipole
products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.constants

SPEED_OF_LIGHT = scipy.constants.c  # m/s
HBAR = scipy.constants.hbar         # J*s
KB = scipy.constants.k              # J/K

TWO_PI = 2.0 * math.pi


def _as_unit_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"dipole direction must be a 3-vector, got shape {v.shape}")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"dipole direction must be a unit vector, |v| = {norm!r}")
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class Transition:
    """One electric-dipole transition of an emitter.

    ``lower`` / ``upper`` are level indices within the emitter's level scheme,
    ``frequency`` the (positive) transition angular frequency and ``decay_rate``
    the spontaneous-emission rate of the upper level along this transition.
    ``dipole_sign_amplitude`` is the signed dipole amplitude relative to an
    arbitrary common scale; only ratios and signs of these amplitudes matter.
    """

    lower: int
    upper: int
    frequency: float            # rad/s, > 0
    decay_rate: float           # rad/s, > 0
    dipole_direction: np.ndarray  # real unit 3-vector
    dipole_sign_amplitude: float  # dimensionless, != 0

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError(f"transition frequency must be positive, got {self.frequency}")
        if self.decay_rate <= 0:
            raise ValueError(f"decay rate must be positive, got {self.decay_rate}")
        if self.dipole_sign_amplitude == 0:
            raise ValueError("dipole amplitude must be nonzero")
        object.__setattr__(self, "dipole_direction", _as_unit_vector(self.dipole_direction))


@dataclass(frozen=True)
class LevelScheme:
    """Electronic levels of one emitter and the transitions that couple them.

    ``diagonal_shifts`` maps a transition index to the radiative shift (rad/s)
    of that transition's upper level; these are external inputs (measured or
    computed elsewhere), not derived here.
    """

    num_levels: int
    ground: int
    transitions: tuple[Transition, ...]
    diagonal_shifts: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))
        if not (0 <= self.ground < self.num_levels):
            raise ValueError(f"ground level {self.ground} outside 0..{self.num_levels - 1}")
        seen = set()
        for t in self.transitions:
            for lvl in (t.lower, t.upper):
                if not (0 <= lvl < self.num_levels):
                    raise ValueError(f"transition references level {lvl} outside scheme")
            if t.upper == self.ground:
                raise ValueError("transition upper level coincides with the ground state")
            key = (t.lower, t.upper)
            if key in seen:
                raise ValueError(f"duplicate transition {key}")
            seen.add(key)
        for idx in self.diagonal_shifts:
            if not (0 <= idx < len(self.transitions)):
                raise ValueError(f"diagonal shift given for unknown transition index {idx}")

    @property
    def num_transitions(self) -> int:
        return len(self.transitions)

    def diagonal_shift(self, i: int) -> float:
        """Radiative shift of transition ``i``'s upper level (rad/s)."""
        try:
            return self.diagonal_shifts[i]
        except KeyError:
            raise KeyError(f"no diagonal shift configured for transition {i}") from None


def dipole_product(scheme: LevelScheme, i: int, j: int) -> float:
    """Normalized dipole product of transitions ``i`` and ``j``.

    Returns sign(a_i * a_j) * (d_i . d_j) for unit directions d and signed
    amplitudes a; equals +1 for i == j and lies in [-1, 1].
    """
    n = scheme.num_transitions
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"transition index out of range: ({i}, {j}) with {n} transitions")
    if i == j:
        return 1.0
    ti, tj = scheme.transitions[i], scheme.transitions[j]
    sign = 1.0 if ti.dipole_sign_amplitude * tj.dipole_sign_amplitude > 0 else -1.0
    return sign * float(np.dot(ti.dipole_direction, tj.dipole_direction))


def amplitude_ratio(scheme: LevelScheme, i: int, j: int) -> float:
    """|a_j / a_i| for the signed dipole amplitudes of transitions i, j."""
    ai = scheme.transitions[i].dipole_sign_amplitude
    aj = scheme.transitions[j].dipole_sign_amplitude
    return abs(aj / ai)


@dataclass(frozen=True)
class EmitterArray:
    """Fixed emitter positions (meters)."""

    positions: np.ndarray  # shape (N, 3)

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must have shape (N, 3), got {pos.shape}")
        for a in range(len(pos)):
            for b in range(a + 1, len(pos)):
                if np.linalg.norm(pos[a] - pos[b]) <= 0.0:
                    raise ValueError(f"emitters {a} and {b} coincide")
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def separation(self, alpha: int, beta: int) -> np.ndarray:
        """R_alpha - R_beta."""
        return self.positions[alpha] - self.positions[beta]


@dataclass(frozen=True)
class InterferenceToggles:
    """Switches for the vacuum-interference terms of the master equation.

    ``intra_cross_*`` control the same-emitter couplings between different
    transitions with parallel dipoles, ``inter_cross_*`` the cross-transition
    couplings between different emitters, and ``inter_diagonal`` the standard
    dipole-dipole terms coupling identical transitions of different emitters.
    Same-emitter, same-transition terms are never switched off.
    """

    intra_cross_damping: bool = True
    inter_cross_damping: bool = True
    intra_cross_shift: bool = True
    inter_cross_shift: bool = True
    inter_diagonal: bool = True

    @classmethod
    def all_on(cls) -> "InterferenceToggles":
        return cls()

    @classmethod
    def all_off(cls) -> "InterferenceToggles":
        return cls(False, False, False, False, False)


@dataclass(frozen=True)
class DriveConfig:
    """Laser drive: per-emitter, per-transition Rabi frequencies and detuning.

    ``rabi`` maps (emitter, transition) -> coupling g (rad/s); g may be complex
    in general although physical configurations here use real values.  The
    detuning is measured from transition 0 of the scheme.
    """

    rabi: dict[tuple[int, int], complex]
    detuning: float = 0.0  # rad/s

    def __post_init__(self):
        for key, g in self.rabi.items():
            if not np.isfinite(complex(g)):
                raise ValueError(f"non-finite Rabi frequency at {key}")
        object.__setattr__(self, "rabi", dict(self.rabi))

    def g(self, alpha: int, transition: int) -> complex:
        return self.rabi.get((alpha, transition), 0.0)

    def with_detuning(self, detuning: float) -> "DriveConfig":
        return replace(self, detuning=detuning)

    def scaled(self, factor: complex) -> "DriveConfig":
        return DriveConfig({k: v * factor for k, v in self.rabi.items()}, self.detuning)


def proportional_drive(scheme: LevelScheme, n_emitters: int, g_ref: complex,
                       ref_transition: int = -1,
                       overrides: dict[int, complex] | None = None) -> DriveConfig:
    """Uniform drive with Rabi frequencies proportional to the dipole amplitudes.

    A single linearly polarized field driving all transitions couples to each
    with strength proportional to its signed dipole amplitude, so
    g_t = g_ref * a_t / a_ref.  ``overrides`` replaces the inferred value for
    individual transitions (the amplitude-ratio rule is an inference, not a
    measured input, so it must stay overridable).
    """
    if ref_transition < 0:
        ref_transition += scheme.num_transitions
    a_ref = scheme.transitions[ref_transition].dipole_sign_amplitude
    rabi: dict[tuple[int, int], complex] = {}
    for t, tr in enumerate(scheme.transitions):
        g_t = g_ref * tr.dipole_sign_amplitude / a_ref
        if overrides and t in overrides:
            g_t = overrides[t]
        for alpha in range(n_emitters):
            rabi[(alpha, t)] = g_t
    return DriveConfig(rabi=rabi)


@dataclass(frozen=True)
class SimConfig:
    """Full static configuration of one simulation.

    ``coarse_grain_dt`` is the averaging window of the generator; ``smoothing``
    selects the Gaussian-smoothed resonance factor instead of the raw sinc.
    ``cross_shift_sign`` optionally flips the sign of the same-emitter cross
    shift (+1 keeps the value inferred from the diagonal shifts and dipole
    signs; the quoted literature value is reproduced with +1).
    """

    coarse_grain_dt: float                  # seconds, > 0
    scheme: LevelScheme
    array: EmitterArray
    toggles: InterferenceToggles = InterferenceToggles()
    temperature: float = 300.0              # kelvin
    speed_of_light: float = SPEED_OF_LIGHT  # m/s
    smoothing: bool = True
    cross_shift_sign: int = +1

    def __post_init__(self):
        if self.coarse_grain_dt <= 0:
            raise ValueError(f"coarse_grain_dt must be positive, got {self.coarse_grain_dt}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.cross_shift_sign not in (+1, -1):
            raise ValueError("cross_shift_sign must be +1 or -1")

    @property
    def n_emitters(self) -> int:
        return len(self.array)

    @property
    def hilbert_dim(self) -> int:
        return self.scheme.num_levels ** self.n_emitters

    def with_toggles(self, toggles: InterferenceToggles) -> "SimConfig":
        return replace(self, toggles=toggles)

    def with_array(self, array: EmitterArray) -> "SimConfig":
        return replace(self, array=array)

    def with_dt(self, dt: float) -> "SimConfig":
        return replace(self, coarse_grain_dt=dt)


# --- presets -----------------------------------------------------------------

# Hydrogen 2S(1/2) -> 4P(1/2), 4P(3/2) parameter set.  The two optical dipoles
# are parallel (both along z); their fine-structure gap is nu0.  Signed dipole
# amplitudes are 1/3 and -sqrt(2)/3 in units of the shared radial integral.
HYDROGEN_2S4P_WAVELENGTH = 0.468e-6       # m, 2S -> 4P(1/2)
HYDROGEN_2S4P_NU0 = 1.367e9               # Hz, 4P fine-structure splitting
HYDROGEN_2S4P_GAMMA2 = TWO_PI * 511e3     # rad/s, 4P(1/2) decay
HYDROGEN_2S4P_GAMMA3 = TWO_PI * 1022e3    # rad/s, 4P(3/2) decay
HYDROGEN_2S4P_SHIFT2 = -TWO_PI * 1401.52e3  # rad/s, 4P(1/2) radiative shift
HYDROGEN_2S4P_SHIFT3 = +TWO_PI * 1767.30e3  # rad/s, 4P(3/2) radiative shift


def hydrogen_2s4p_preset() -> LevelScheme:
    """Three-level hydrogen scheme: |0> = 2S(1/2), |1> = 4P(1/2), |2> = 4P(3/2).

    Transition 0 drives |0> -> |1> and transition 1 drives |0> -> |2>; both
    dipoles point along z, with signed amplitudes 1/3 and -sqrt(2)/3 of the
    common radial integral (1.28 atomic units, which drops out of all
    observables used here).
    """
    z = np.array([0.0, 0.0, 1.0])
    omega12 = TWO_PI * SPEED_OF_LIGHT / HYDROGEN_2S4P_WAVELENGTH
    omega13 = omega12 + TWO_PI * HYDROGEN_2S4P_NU0
    t12 = Transition(lower=0, upper=1, frequency=omega12,
                     decay_rate=HYDROGEN_2S4P_GAMMA2,
                     dipole_direction=z, dipole_sign_amplitude=1.0 / 3.0)
    t13 = Transition(lower=0, upper=2, frequency=omega13,
                     decay_rate=HYDROGEN_2S4P_GAMMA3,
                     dipole_direction=z, dipole_sign_amplitude=-math.sqrt(2.0) / 3.0)
    return LevelScheme(num_levels=3, ground=0, transitions=(t12, t13),
                       diagonal_shifts={0: HYDROGEN_2S4P_SHIFT2, 1: HYDROGEN_2S4P_SHIFT3})


def two_level_scheme(gamma: float, frequency: float | None = None,
                     diagonal_shift: float = 0.0) -> LevelScheme:
    """Minimal two-level emitter, mainly for reductions to textbook results."""
    if frequency is None:
        frequency = TWO_PI * SPEED_OF_LIGHT / HYDROGEN_2S4P_WAVELENGTH
    t = Transition(lower=0, upper=1, frequency=frequency, decay_rate=gamma,
                   dipole_direction=np.array([0.0, 0.0, 1.0]),
                   dipole_sign_amplitude=1.0)
    return LevelScheme(num_levels=2, ground=0, transitions=(t,),
                       diagonal_shifts={0: diagonal_shift})


def single_emitter_array() -> EmitterArray:
    return EmitterArray(positions=np.zeros((1, 3)))


def pair_array(distance: float, axis=(1.0, 0.0, 0.0)) -> EmitterArray:
    """Two emitters separated by ``distance`` along ``axis`` (default x, so the
    default z-polarized dipoles are perpendicular to the separation)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return EmitterArray(positions=np.stack([np.zeros(3), distance * axis]))
