"""Steady states of the Lindblad generator, with a propagation cross-check.

Two routes: a rank-revealing SVD solve used for careful single solves (it also
measures the numerical null-space dimension), and a fast bordered linear solve
used inside detuning scans, where one row of L is replaced by the trace
constraint.  The bordered route is validated by its residual and falls back to
the SVD route when that check fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .liouvillian import trace_vector, unvec, vec

NULL_SPACE_RTOL = 1e-9  # singular values below this times sigma_max count as null


class DegenerateSteadyStateError(RuntimeError):
    """The generator has a multi-dimensional null space (dark-state manifold)."""


@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray      # unit-trace hermitian density matrix
    residual: float      # ||L vec(rho)|| / ||L||
    null_dim: int        # numerical null-space dimension of L

    def population(self, level_index: int) -> float:
        return float(self.rho[level_index, level_index].real)


def _finalize(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho)
    if abs(tr) < 1e-300:
        raise RuntimeError("candidate steady state has vanishing trace")
    return rho / tr


def solve_null_space(lind: np.ndarray, on_degenerate: str = "raise") -> SteadyState:
    """Steady state as the null vector of L, via singular value decomposition.

    The candidate is hermitized and trace-normalized.  A null-space dimension
    above one signals a dark-state manifold; by default that is an error, with
    ``on_degenerate='max_entropy'`` the element closest to the maximally mixed
    state within the null space is returned instead.
    """
    d2 = lind.shape[0]
    d = int(round(np.sqrt(d2)))
    _, s, vh = np.linalg.svd(lind)
    sigma_max = s[0] if s.size else 0.0
    null_dim = int(np.sum(s < NULL_SPACE_RTOL * sigma_max))
    if null_dim == 0:
        # fall back to the smallest singular vector; residual will expose trouble
        null_dim = 1
    if null_dim > 1:
        if on_degenerate == "raise":
            raise DegenerateSteadyStateError(
                f"null space has dimension {null_dim}; steady state not unique "
                "(undriven or decay-free subspace?)")
        basis = vh[-null_dim:].conj()  # rows span the (right) null space
        target = vec(np.eye(d) / d)
        coef, *_ = np.linalg.lstsq(basis.T, target, rcond=None)
        v = basis.T @ coef
    else:
        v = vh[-1].conj()
    rho = _finalize(unvec(v))
    lnorm = np.linalg.norm(lind)
    residual = float(np.linalg.norm(lind @ vec(rho)) / lnorm) if lnorm > 0 else 0.0
    return SteadyState(rho=rho, residual=residual, null_dim=null_dim)


def steady_state_fast(lind: np.ndarray, residual_rtol: float = 1e-8) -> SteadyState:
    """Bordered-solve steady state with SVD fallback.

    Row 0 of L (the ground-population row, which is linearly dependent on the
    other diagonal rows through trace preservation) is replaced by the trace
    constraint and the resulting square system solved directly.
    """
    d2 = lind.shape[0]
    d = int(round(np.sqrt(d2)))
    m = lind.copy()
    m[0, :] = trace_vector(d)
    rhs = np.zeros(d2, dtype=complex)
    rhs[0] = 1.0
    try:
        v = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError:
        return solve_null_space(lind)
    lnorm = np.linalg.norm(lind)
    residual = float(np.linalg.norm(lind @ v) / (lnorm * np.linalg.norm(v)))
    if not np.isfinite(residual) or residual > residual_rtol:
        return solve_null_space(lind)
    rho = _finalize(unvec(v))
    residual = float(np.linalg.norm(lind @ vec(rho)) / lnorm) if lnorm > 0 else 0.0
    return SteadyState(rho=rho, residual=residual, null_dim=1)


def steady_state_batch(l_base: np.ndarray, diag_direction: np.ndarray,
                       deltas: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Steady states of L(delta) = l_base + delta * diag(diag_direction).

    Returns vec'd, trace-normalized (not hermitized) solutions with shape
    (len(deltas), d^2).  Residuals are checked against the bordered system; a
    failed point is re-solved through the careful route.
    """
    d2 = l_base.shape[0]
    d = int(round(np.sqrt(d2)))
    w = trace_vector(d)
    m_base = l_base.copy()
    m_base[0, :] = w
    dd = diag_direction.astype(complex).copy()
    dd[0] = 0.0  # row 0 carries the trace constraint, not dynamics
    rhs = np.zeros(d2, dtype=complex)
    rhs[0] = 1.0

    out = np.empty((len(deltas), d2), dtype=complex)
    for start in range(0, len(deltas), chunk):
        dl = np.asarray(deltas[start:start + chunk], dtype=float)
        stack = np.broadcast_to(m_base, (len(dl), d2, d2)).copy()
        idx = np.arange(d2)
        stack[:, idx, idx] += dl[:, None] * dd[None, :]
        sols = np.linalg.solve(stack, np.broadcast_to(rhs, (len(dl), d2))[:, :, None])[:, :, 0]
        # residual against the true generator, per point
        l_stack = np.broadcast_to(l_base, (len(dl), d2, d2)).copy()
        l_stack[:, idx, idx] += dl[:, None] * diag_direction[None, :].astype(complex)
        res = np.linalg.norm(np.einsum("nij,nj->ni", l_stack, sols), axis=1)
        scale = np.linalg.norm(l_base) * np.linalg.norm(sols, axis=1)
        bad = ~np.isfinite(res) | (res > 1e-8 * scale)
        for k in np.flatnonzero(bad):
            sols[k] = vec(solve_null_space(l_stack[k]).rho)
        traces = sols @ np.conj(w)  # w real; conj for clarity
        out[start:start + len(dl)] = sols / traces[:, None]
    return out


def propagate(lind: np.ndarray, rho0: np.ndarray, t_final: float,
              dt_step: float | None = None) -> np.ndarray:
    """Propagate rho under d/dt vec(rho) = L vec(rho) by stepped matrix
    exponentials.

    The exponential of L*dt_step is formed once and applied repeatedly; a final
    partial step covers any remainder.  Trace drift beyond 1e-10 aborts, since
    the propagation of a trace-preserving generator must conserve it.
    """
    if t_final < 0:
        raise ValueError("t_final must be >= 0")
    if dt_step is None:
        dt_step = t_final / 64.0 if t_final > 0 else 1.0
    if dt_step <= 0:
        raise ValueError("dt_step must be positive")
    v = vec(rho0).astype(complex)
    tr0 = np.trace(rho0)
    n_full = int(t_final / dt_step)
    remainder = t_final - n_full * dt_step
    if n_full > 0:
        step = expm(lind * dt_step)
        for _ in range(n_full):
            v = step @ v
    if remainder > 1e-18 * max(t_final, dt_step):
        v = expm(lind * remainder) @ v
    rho = unvec(v)
    drift = abs(np.trace(rho) - tr0)
    if drift > 1e-10 * max(1.0, abs(tr0)):
        raise RuntimeError(f"trace drifted by {drift:.3e} during propagation; "
                           f"reduce dt_step")
    return rho
