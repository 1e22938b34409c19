"""Operators on the product Hilbert space and the vectorized Lindblad generator.

Vectorization is column-stacking throughout: vec(rho) stacks the columns of
rho, so vec(A X B) = (B^T kron A) vec(X) and the commutator part of the
generator is -i (I kron H - H^T kron I).  Matrices are dense; the intended
regime is a handful of emitters with a few levels each (the dimension guard
rejects anything beyond d^2 = 1e6).
"""

from __future__ import annotations

import numpy as np

from .coefficients import CoefficientSet, build_coefficient_set
from .model import DriveConfig, LevelScheme, SimConfig

MAX_SUPEROP_DIM = 10**6


def _check_dims(d: int) -> None:
    if d * d > MAX_SUPEROP_DIM:
        raise ValueError(f"Hilbert dimension {d} too large for dense superoperators")


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a density matrix."""
    return rho.reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    return v.reshape((d, d), order="F")


def trace_vector(d: int) -> np.ndarray:
    """Row vector w with w . vec(rho) = tr(rho)."""
    return vec(np.eye(d)).astype(complex)


def embed(op: np.ndarray, n_emitters: int, alpha: int) -> np.ndarray:
    """Embed a single-emitter operator at slot alpha via identity tensor factors."""
    if not (0 <= alpha < n_emitters):
        raise IndexError(f"emitter index {alpha} out of range")
    levels = op.shape[0]
    out = np.array([[1.0 + 0.0j]])
    for slot in range(n_emitters):
        factor = op if slot == alpha else np.eye(levels)
        out = np.kron(out, factor)
    return out


def lowering_operator(scheme: LevelScheme, array, alpha: int, transition: int) -> np.ndarray:
    """|ground><upper| of one transition, embedded at emitter slot alpha."""
    n_emitters = len(array)
    if not (0 <= transition < scheme.num_transitions):
        raise IndexError(f"transition index {transition} out of range")
    t = scheme.transitions[transition]
    single = np.zeros((scheme.num_levels, scheme.num_levels), dtype=complex)
    single[scheme.ground, t.upper] = 1.0
    d = scheme.num_levels ** n_emitters
    _check_dims(d)
    return embed(single, n_emitters, alpha)


def level_projector(scheme: LevelScheme, n_emitters: int, alpha: int, level: int) -> np.ndarray:
    single = np.zeros((scheme.num_levels, scheme.num_levels), dtype=complex)
    single[level, level] = 1.0
    return embed(single, n_emitters, alpha)


def all_lowering_operators(scheme: LevelScheme, array) -> list[list[np.ndarray]]:
    """ops[alpha][t] = lowering operator of transition t at emitter alpha."""
    return [[lowering_operator(scheme, array, alpha, t)
             for t in range(scheme.num_transitions)]
            for alpha in range(len(array))]


def rotating_frame_hamiltonian(config: SimConfig, drive: DriveConfig,
                               coeffs: CoefficientSet | None = None) -> np.ndarray:
    """Time-independent Hamiltonian (units of rad/s) in the frame rotating at
    the laser frequency.

    The frame removes the optical frequencies: the upper level of transition t
    sits at omega_t - omega_L = (omega_t - omega_0th) - detuning, measured from
    transition 0.  The drive enters as -(g zeta^dag + g* zeta); the radiative
    shift couplings act on zeta_i^dag zeta_j, same-emitter terms with a plus
    sign and emitter-pair terms with a minus sign.
    """
    scheme, array = config.scheme, config.array
    n = len(array)
    d = scheme.num_levels ** n
    _check_dims(d)
    if coeffs is None:
        coeffs = build_coefficient_set(config)
    omega_ref = scheme.transitions[0].frequency
    zeta = all_lowering_operators(scheme, array)

    h = np.zeros((d, d), dtype=complex)
    for alpha in range(n):
        for t, tr in enumerate(scheme.transitions):
            proj = level_projector(scheme, n, alpha, tr.upper)
            h += (tr.frequency - omega_ref - drive.detuning) * proj
            g = drive.g(alpha, t)
            if g != 0.0:
                h -= g * zeta[alpha][t].conj().T + np.conj(g) * zeta[alpha][t]
        for i in range(scheme.num_transitions):
            for j in range(scheme.num_transitions):
                w = coeffs.shift_intra[alpha, i, j]
                if w != 0.0:
                    h += w * (zeta[alpha][i].conj().T @ zeta[alpha][j])
        for beta in range(n):
            if beta == alpha:
                continue
            for e in range(scheme.num_transitions):
                for e2 in range(scheme.num_transitions):
                    x = coeffs.shift_inter[alpha, beta, e, e2]
                    if x != 0.0:
                        h -= x * (zeta[alpha][e].conj().T @ zeta[beta][e2])

    herm_defect = np.abs(h - h.conj().T).max()
    if herm_defect > 1e-12 * max(1.0, np.abs(h).max()):
        raise AssertionError(f"Hamiltonian assembly lost hermiticity: {herm_defect:.3e}")
    return h


def detuning_generator(config: SimConfig) -> np.ndarray:
    """dH/d(detuning): minus the total excited-state projector (diagonal, real)."""
    scheme, n = config.scheme, config.n_emitters
    d = scheme.num_levels ** n
    h1 = np.zeros((d, d), dtype=complex)
    for alpha in range(n):
        for tr in scheme.transitions:
            h1 -= level_projector(scheme, n, alpha, tr.upper)
    return h1


def hamiltonian_superoperator(h: np.ndarray) -> np.ndarray:
    """-i (I kron H - H^T kron I) on column-stacked density matrices."""
    d = h.shape[0]
    eye = np.eye(d)
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def dissipator_superoperator(coeffs: CoefficientSet,
                             lowering_ops: list[list[np.ndarray]]) -> np.ndarray:
    """Vectorized dissipator.

    Sum over emitter/transition pairs of

        (1+n) Gamma [ zeta_j rho zeta_i^dag - {zeta_i^dag zeta_j, rho}/2 ]
        +  n  Gamma* [ zeta_j^dag rho zeta_i - {zeta_i zeta_j^dag, rho}/2 ]

    which annihilates the trace term by term.
    """
    n_em = len(lowering_ops)
    n_tr = len(lowering_ops[0])
    d = lowering_ops[0][0].shape[0]
    if coeffs.gamma.shape != (n_em, n_em, n_tr, n_tr):
        raise ValueError(
            f"coefficient set shape {coeffs.gamma.shape} does not match "
            f"{n_em} emitters x {n_tr} transitions")
    eye = np.eye(d)
    lind = np.zeros((d * d, d * d), dtype=complex)
    for alpha in range(n_em):
        for beta in range(n_em):
            for i in range(n_tr):
                for j in range(n_tr):
                    g = coeffs.gamma[alpha, beta, i, j]
                    if g == 0.0:
                        continue
                    n_th = coeffs.thermal_occupation[i, j]
                    zi = lowering_ops[alpha][i]
                    zj = lowering_ops[beta][j]
                    zi_dag = zi.conj().T
                    # decay channel: jump zeta_j, weight (1+n) Gamma
                    op = zi_dag @ zj
                    lind += (1.0 + n_th) * g * (
                        np.kron(zi.conj(), zj)
                        - 0.5 * (np.kron(eye, op) + np.kron(op.T, eye)))
                    if n_th != 0.0:
                        # heating channel: jump zeta_j^dag, weight n Gamma*
                        op_h = zi @ zj.conj().T
                        lind += n_th * np.conj(g) * (
                            np.kron(zi.T, zj.conj().T)
                            - 0.5 * (np.kron(eye, op_h) + np.kron(op_h.T, eye)))
    return lind


def assemble_liouvillian(config: SimConfig, drive: DriveConfig,
                         coeffs: CoefficientSet | None = None) -> np.ndarray:
    """Full generator L with d/dt vec(rho) = L vec(rho)."""
    if coeffs is None:
        coeffs = build_coefficient_set(config)
    h = rotating_frame_hamiltonian(config, drive, coeffs)
    ops = all_lowering_operators(config.scheme, config.array)
    return hamiltonian_superoperator(h) + dissipator_superoperator(coeffs, ops)


def check_superoperator(lind: np.ndarray, rng: np.random.Generator | None = None) -> dict:
    """Diagnostics: trace annihilation and hermiticity preservation.

    Returns the relative trace defect ||vec(1)^T L|| / ||L|| and the worst
    mismatch between L[rho]^dag and L[rho^dag] on a random matrix.
    """
    d2 = lind.shape[0]
    d = int(round(np.sqrt(d2)))
    w = trace_vector(d)
    norm = np.linalg.norm(lind)
    trace_defect = float(np.linalg.norm(w @ lind) / norm) if norm > 0 else 0.0
    rng = rng or np.random.default_rng(0)
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    lhs = unvec(lind @ vec(m)).conj().T
    rhs = unvec(lind @ vec(m.conj().T))
    herm_defect = float(np.abs(lhs - rhs).max() / max(np.abs(lhs).max(), 1e-300))
    return {"trace_defect": trace_defect, "hermiticity_defect": herm_defect}
