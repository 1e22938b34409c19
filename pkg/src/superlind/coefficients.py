"""Scalar kernels of the coarse-grained master equation.

Every coupling constant is reduced to decay rates, normalized dipole products
and dimensionless geometry factors, so no absolute dipole moments or hbar
appear.  The same-emitter, same-transition damping coefficient is the bare
decay rate by construction; all other coefficients are corrections multiplying
combinations of sqrt(gamma_i * gamma_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .model import (EmitterArray, InterferenceToggles, LevelScheme, SimConfig,
                    HBAR, KB, amplitude_ratio, dipole_product)

FOUR_PI = 4.0 * math.pi
EIGHT_PI_3 = 8.0 * math.pi / 3.0


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def theta_sinc(omega_i: float, omega_j: float, dt: float) -> float:
    """Resonance selection factor sin(g*dt/2)/(g*dt/2) with g = omega_i - omega_j.

    Equals 1 for resonant pairs; the removable singularity is handled by a
    series for small arguments.
    """
    if dt <= 0:
        raise ValueError(f"coarse-graining time must be positive, got {dt}")
    x = 0.5 * (omega_i - omega_j) * dt
    if abs(x) < 1e-6:
        x2 = x * x
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return math.sin(x) / x


@lru_cache(maxsize=4096)
def _smoothed_theta_cached(a: float) -> float:
    # a = |g| * dt / 2; integrand rewritten on u = x/dt so only a remains.
    if a < 1e-6:
        return 1.0 - a * a / 12.0

    def integrand(u: float) -> float:
        au = a * u
        s = math.sin(au) / au if abs(au) > 1e-9 else 1.0 - au * au / 6.0
        return s * math.exp(-u * u)

    value, abserr = integrate.quad(integrand, 0.0, 10.0, limit=4000,
                                   epsabs=0.0, epsrel=1e-10)
    half_gauss = 0.5 * math.sqrt(math.pi) * math.erf(10.0)  # integral of exp(-u^2) on [0, 10]
    result = value / half_gauss
    achieved = abserr / half_gauss
    if achieved > 1e-8 * max(abs(result), 1e-3):
        raise QuadratureError(
            f"smoothed resonance factor did not converge: achieved abs error "
            f"{achieved:.3e} at argument {a!r}")
    return result


def smoothed_theta(omega_gap: float, dt: float) -> float:
    """Gaussian-smoothed resonance factor.

    Convolution of the sinc selection factor with a Gaussian window of width
    dt, normalized so the resonant value is exactly 1:

        F_c(g) = int_0^inf sinc(g x / 2) exp(-x^2/dt^2) dx
                 / int_0^inf exp(-x^2/dt^2) dx

    Even in g, bounded by 1, and strictly positive, which is what keeps the
    coefficient matrix positive semidefinite for any level spacing.
    """
    if dt <= 0:
        raise ValueError(f"coarse-graining time must be positive, got {dt}")
    a = 0.5 * abs(omega_gap) * dt
    if a == 0.0:
        return 1.0
    return _smoothed_theta_cached(a)


def resonance_factor(omega_i: float, omega_j: float, dt: float, smoothing: bool) -> float:
    """Dispatch between the raw sinc and its Gaussian smoothing."""
    if smoothing:
        return smoothed_theta(omega_i - omega_j, dt)
    return theta_sinc(omega_i, omega_j, dt)


def spherical_bessel(kind: str, order: int, x: float) -> float:
    """Spherical Bessel functions j0, j1 (kind='first') and y0, y1 (kind='second').

    The first kind switches to a series below x = 1e-2 so the x -> 0 limits are
    finite (j0 -> 1, j1/x -> 1/3) and so that j1(x)/x keeps full precision: the
    closed form loses ~eps/x^2 to cancellation, which at the crossover is
    already down at 1e-12.  The second kind diverges at 0 and rejects x <= 0.
    """
    if order not in (0, 1):
        raise ValueError(f"only orders 0 and 1 are supported, got {order}")
    if kind == "first":
        if x < 0:
            raise ValueError(f"argument must be >= 0 for kind='first', got {x}")
        if x < 1e-2:
            x2 = x * x
            if order == 0:
                return 1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0
            return x * (1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0
                        - x2 * x2 * x2 / 45360.0)
        if order == 0:
            return math.sin(x) / x
        return math.sin(x) / (x * x) - math.cos(x) / x
    if kind == "second":
        if x <= 0:
            raise ValueError(f"argument must be > 0 for kind='second', got {x}")
        if order == 0:
            return -math.cos(x) / x
        return -math.cos(x) / (x * x) - math.sin(x) / x
    raise ValueError(f"kind must be 'first' or 'second', got {kind!r}")


def geometric_factor(kind: str, k: float, r_vec, d_i, d_j) -> float:
    """Orientation-resolved dipole-dipole geometry factor.

    4*pi * ( b0(kR) [1 - (d_i.R^)(d_j.R^)] - b1(kR)/(kR) [1 - 3 (d_i.R^)(d_j.R^)] )

    with b = j (kind='first') or y (kind='second').  For kind='first' the
    R -> 0 limit is 8*pi/3 independent of the orientations.
    """
    if k <= 0:
        raise ValueError(f"wave number must be positive, got {k}")
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if r == 0.0:
        if kind == "second":
            raise ValueError("second-kind geometry factor diverges at zero distance")
        return EIGHT_PI_3
    x = k * r
    r_hat = r_vec / r
    c = float(np.dot(np.asarray(d_i, dtype=float), r_hat)
              * np.dot(np.asarray(d_j, dtype=float), r_hat))
    b0 = spherical_bessel(kind, 0, x)
    b1 = spherical_bessel(kind, 1, x)
    return FOUR_PI * (b0 * (1.0 - c) - (b1 / x) * (1.0 - 3.0 * c))


def _frequency_factor(omega_i: float, omega_j: float) -> float:
    # omega_ij^3 / (omega_i^{3/2} omega_j^{3/2}) with omega_ij the arithmetic
    # mean; equals 1 on resonance and 1 + O((gap/omega)^2) here.
    if omega_i == omega_j:
        return 1.0
    omega_ij = 0.5 * (omega_i + omega_j)
    return omega_ij**3 / (omega_i**1.5 * omega_j**1.5)


def damping_coefficient(scheme: LevelScheme, array: EmitterArray,
                        alpha: int, beta: int, i: int, j: int,
                        dt: float, smoothing: bool = True,
                        speed_of_light: float | None = None) -> float:
    """Collective damping coefficient for transitions i of emitter alpha and
    j of emitter beta.

    Reduces exactly to gamma_i for alpha == beta, i == j; cross terms carry the
    resonance factor, the normalized dipole product, the mean-frequency
    correction and (between emitters) the propagation geometry normalized to
    its zero-distance value.
    """
    from .model import SPEED_OF_LIGHT
    c_light = SPEED_OF_LIGHT if speed_of_light is None else speed_of_light
    n = scheme.num_transitions
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"transition index out of range: ({i}, {j})")
    if not (0 <= alpha < len(array) and 0 <= beta < len(array)):
        raise IndexError(f"emitter index out of range: ({alpha}, {beta})")
    ti, tj = scheme.transitions[i], scheme.transitions[j]
    if alpha == beta and i == j:
        return ti.decay_rate

    if i == j:
        s = 1.0
        root_gg = ti.decay_rate
        dp = 1.0
        ff = 1.0
    else:
        s = resonance_factor(ti.frequency, tj.frequency, dt, smoothing)
        root_gg = math.sqrt(ti.decay_rate * tj.decay_rate)
        dp = dipole_product(scheme, i, j)
        ff = _frequency_factor(ti.frequency, tj.frequency)

    if alpha == beta:
        geom = 1.0
    else:
        k_ij = 0.5 * (ti.frequency + tj.frequency) / c_light
        geom = geometric_factor("first", k_ij, array.separation(alpha, beta),
                                ti.dipole_direction, tj.dipole_direction) / EIGHT_PI_3
    return s * root_gg * dp * ff * geom


def intra_shift(scheme: LevelScheme, i: int, j: int, dt: float,
                smoothing: bool = True) -> float:
    """Same-emitter shift coefficient (rad/s) entering the Hamiltonian on
    zeta_i^dagger zeta_j.

    Diagonal entries return the configured radiative level shifts verbatim.
    Cross entries are inferred from the diagonal ones through the dipole
    structure: the shift operator scales with D_i.D_j, so dividing out the
    dipole magnitudes weighs each diagonal shift by the amplitude ratio,

        0.5 * S_ij * (d_i.d_j) * [ (a_j/a_i) Delta_ii + (a_i/a_j) Delta_jj ].

    With the hydrogen preset this reproduces the quoted cross shift of
    2*pi*366.2 kHz, sign included.
    """
    if i == j:
        return scheme.diagonal_shift(i)
    ti, tj = scheme.transitions[i], scheme.transitions[j]
    d_ii = scheme.diagonal_shift(i)
    d_jj = scheme.diagonal_shift(j)
    s = resonance_factor(ti.frequency, tj.frequency, dt, smoothing)
    ddot = float(np.dot(ti.dipole_direction, tj.dipole_direction))
    a_i = ti.dipole_sign_amplitude
    a_j = tj.dipole_sign_amplitude
    return 0.5 * s * ddot * ((a_j / a_i) * d_ii + (a_i / a_j) * d_jj)


def inter_shift(scheme: LevelScheme, array: EmitterArray,
                alpha: int, beta: int, e: int, e2: int,
                dt: float, smoothing: bool = True,
                speed_of_light: float | None = None) -> float:
    """Vacuum-mediated coupling between transition e of emitter alpha and
    transition e2 of emitter beta (rad/s), two distinct emitters.

    This is the retarded dipole-dipole energy expressed through decay rates,

        S * (3/4) sqrt(gamma_e gamma_e2) * dp * ff * F_y / (4 pi),

    where F_y is the second-kind geometry factor; for dipoles perpendicular to
    the separation it reduces to y0(kR) - y1(kR)/(kR).  The Hamiltonian applies
    this coupling with a leading minus sign.
    """
    from .model import SPEED_OF_LIGHT
    c_light = SPEED_OF_LIGHT if speed_of_light is None else speed_of_light
    if alpha == beta:
        raise ValueError("inter-emitter shift requires two distinct emitters")
    r_vec = array.separation(alpha, beta)
    if np.linalg.norm(r_vec) == 0.0:
        raise ValueError("inter-emitter shift diverges at zero separation")
    te, te2 = scheme.transitions[e], scheme.transitions[e2]
    s = resonance_factor(te.frequency, te2.frequency, dt, smoothing)
    root_gg = te.decay_rate if e == e2 else math.sqrt(te.decay_rate * te2.decay_rate)
    dp = dipole_product(scheme, e, e2)
    ff = _frequency_factor(te.frequency, te2.frequency)
    k = 0.5 * (te.frequency + te2.frequency) / c_light
    geom = geometric_factor("second", k, r_vec,
                            te.dipole_direction, te2.dipole_direction) / FOUR_PI
    return s * 0.75 * root_gg * dp * ff * geom


def bose_occupation(omega: float, temperature: float) -> float:
    """Mean thermal photon number 1/(exp(hbar*omega/kB*T) - 1)."""
    if omega <= 0:
        raise ValueError(f"frequency must be positive, got {omega}")
    if temperature == 0.0:
        return 0.0
    x = HBAR * omega / (KB * temperature)
    if x > 700.0:  # exp would overflow; occupation is indistinguishable from 0
        return 0.0
    return 1.0 / math.expm1(x)


# Thermal occupations below this are stored as exact zeros: at optical
# frequencies and room temperature n ~ 1e-45, far below double rounding noise.
_THERMAL_CLAMP = 1e-30


@dataclass(frozen=True)
class CoefficientSet:
    """All master-equation coefficients for one configuration.

    ``gamma[alpha, beta, i, j]`` are the damping coefficients, with the matrix
    indexed by composite (alpha, i) x (beta, j) positive semidefinite for the
    smoothed, fully enabled configuration.  ``shift_intra[alpha, i, j]`` are
    the same-emitter Hamiltonian shifts (entering with a plus sign) and
    ``shift_inter[alpha, beta, e, e']`` the emitter-pair couplings (entering
    with a minus sign); ``thermal_occupation[i, j]`` the mean photon numbers at
    the pair frequencies.
    """

    gamma: np.ndarray               # complex (N, N, T, T), rad/s
    shift_intra: np.ndarray         # float (N, T, T), rad/s
    shift_inter: np.ndarray         # float (N, N, T, T), rad/s; zero for alpha == beta
    thermal_occupation: np.ndarray  # float (T, T), dimensionless

    def composite_gamma_matrix(self) -> np.ndarray:
        """Damping coefficients as a (N*T, N*T) matrix over (emitter, transition)."""
        n, _, t, _ = self.gamma.shape
        return self.gamma.transpose(0, 2, 1, 3).reshape(n * t, n * t)

    def min_gamma_eigenvalue(self) -> tuple[float, float]:
        """(smallest, largest-magnitude) eigenvalue of the composite matrix."""
        vals = np.linalg.eigvalsh(self.composite_gamma_matrix())
        return float(vals.min()), float(np.abs(vals).max())


def build_coefficient_set(config: SimConfig,
                          toggles: InterferenceToggles | None = None) -> CoefficientSet:
    """Evaluate all kernels for one configuration, applying the toggles.

    Entries switched off by a toggle are exactly zero; the same-emitter,
    same-transition damping coefficients and diagonal shifts are never zeroed.
    """
    scheme, array = config.scheme, config.array
    tg = config.toggles if toggles is None else toggles
    n, t = len(array), scheme.num_transitions
    dt, smoothing = config.coarse_grain_dt, config.smoothing
    c_light = config.speed_of_light

    gamma = np.zeros((n, n, t, t), dtype=complex)
    shift_intra = np.zeros((n, t, t))
    shift_inter = np.zeros((n, n, t, t))
    occupation = np.zeros((t, t))

    for i in range(t):
        for j in range(t):
            omega_ij = 0.5 * (scheme.transitions[i].frequency
                              + scheme.transitions[j].frequency)
            occ = bose_occupation(omega_ij, config.temperature)
            occupation[i, j] = 0.0 if occ < _THERMAL_CLAMP else occ

    for alpha in range(n):
        for i in range(t):
            shift_intra[alpha, i, i] = scheme.diagonal_shift(i)
            for j in range(i + 1, t):
                if tg.intra_cross_shift:
                    val = config.cross_shift_sign * intra_shift(scheme, i, j, dt, smoothing)
                    shift_intra[alpha, i, j] = val
                    shift_intra[alpha, j, i] = val
        for beta in range(n):
            for i in range(t):
                for j in range(t):
                    if alpha == beta:
                        enabled = (i == j) or tg.intra_cross_damping
                    else:
                        enabled = tg.inter_diagonal if i == j else tg.inter_cross_damping
                    if enabled:
                        gamma[alpha, beta, i, j] = damping_coefficient(
                            scheme, array, alpha, beta, i, j, dt, smoothing, c_light)
            if alpha != beta:
                for e in range(t):
                    for e2 in range(t):
                        enabled = tg.inter_diagonal if e == e2 else tg.inter_cross_shift
                        if enabled:
                            shift_inter[alpha, beta, e, e2] = inter_shift(
                                scheme, array, alpha, beta, e, e2, dt, smoothing, c_light)

    for a in (gamma, shift_intra, shift_inter, occupation):
        a.flags.writeable = False
    return CoefficientSet(gamma=gamma, shift_intra=shift_intra,
                          shift_inter=shift_inter, thermal_occupation=occupation)


def coefficient_rows(coeffs: CoefficientSet):
    """Flatten a coefficient set into (alpha, beta, i, j, re, im, kind) rows."""
    rows = []
    n, _, t, _ = coeffs.gamma.shape
    for alpha in range(n):
        for beta in range(n):
            for i in range(t):
                for j in range(t):
                    g = coeffs.gamma[alpha, beta, i, j]
                    rows.append((alpha, beta, i, j, g.real, g.imag, "gamma"))
    for alpha in range(n):
        for i in range(t):
            for j in range(t):
                rows.append((alpha, alpha, i, j,
                             coeffs.shift_intra[alpha, i, j], 0.0, "shift_intra"))
    for alpha in range(n):
        for beta in range(n):
            if alpha == beta:
                continue
            for i in range(t):
                for j in range(t):
                    rows.append((alpha, beta, i, j,
                                 coeffs.shift_inter[alpha, beta, i, j], 0.0, "shift_inter"))
    for i in range(t):
        for j in range(t):
            rows.append((0, 0, i, j, coeffs.thermal_occupation[i, j], 0.0, "thermal"))
    return rows
