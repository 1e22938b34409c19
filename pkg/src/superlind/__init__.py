"""Coarse-grained Lindblad engine for multilevel superradiant emitters."""

from .model import (DriveConfig, EmitterArray, InterferenceToggles, LevelScheme,
                    SimConfig, Transition, dipole_product, hydrogen_2s4p_preset,
                    pair_array, proportional_drive, single_emitter_array,
                    two_level_scheme)
from .coefficients import (CoefficientSet, bose_occupation, build_coefficient_set,
                           damping_coefficient, geometric_factor, inter_shift,
                           intra_shift, smoothed_theta, spherical_bessel,
                           theta_sinc)
from .liouvillian import (assemble_liouvillian, dissipator_superoperator,
                          lowering_operator, rotating_frame_hamiltonian, unvec,
                          vec)
from .steadystate import (DegenerateSteadyStateError, SteadyState, propagate,
                          solve_null_space, steady_state_fast)
from .spectrum import (SpectrumTable, default_detuning_grid, photon_signal,
                       scan_detuning, scan_variants)
from .analysis import (FitResult, LineShiftCurve, VARIANTS, cg_sensitivity,
                       extrapolate_zero_drive, fit_double_lorentzian, line_shift,
                       sweep_distance, zero_drive_line_shifts)

__version__ = "0.1.0"

__all__ = [
    "DriveConfig", "EmitterArray", "InterferenceToggles", "LevelScheme",
    "SimConfig", "Transition", "dipole_product", "hydrogen_2s4p_preset",
    "pair_array", "proportional_drive", "single_emitter_array",
    "two_level_scheme",
    "CoefficientSet", "bose_occupation", "build_coefficient_set",
    "damping_coefficient", "geometric_factor", "inter_shift", "intra_shift",
    "smoothed_theta", "spherical_bessel", "theta_sinc",
    "assemble_liouvillian", "dissipator_superoperator", "lowering_operator",
    "rotating_frame_hamiltonian", "unvec", "vec",
    "DegenerateSteadyStateError", "SteadyState", "propagate",
    "solve_null_space", "steady_state_fast",
    "SpectrumTable", "default_detuning_grid", "photon_signal", "scan_detuning",
    "scan_variants",
    "FitResult", "LineShiftCurve", "VARIANTS", "cg_sensitivity",
    "extrapolate_zero_drive", "fit_double_lorentzian", "line_shift",
    "sweep_distance", "zero_drive_line_shifts",
    "__version__",
]
