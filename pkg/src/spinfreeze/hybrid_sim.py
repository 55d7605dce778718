"""Hybrid evolution: classical flow of D_1^cl driving a spin observable.

x' = dD_1/dp, p' = -dD_1/dx and A' = i[Q(x, p), A] with Q the partial
classical order-hbar term of D~_1. Fixed-step RK4 with a step-doubling
error monitor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .classical_rs import PhasePoint, d_classical, flow_data
from .freezing import partial_classical_order1
from .r_matrices import ModelParams, RKind

log = logging.getLogger(__name__)

LOCAL_TOL = 1e-6


class StepRejected(ArithmeticError):
    pass


@dataclass(frozen=True)
class HybridState:
    pt: PhasePoint
    A: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("observable must be a square matrix")
        if not np.all(np.isfinite(A)):
            raise ValueError("non-finite observable")
        object.__setattr__(self, "A", A)


def spin_generator(pt: PhasePoint, kind, params: ModelParams) -> np.ndarray:
    """Q(x, p) = -i eps sum_i A_i(x) P_{(1..i)}^{-1} d_i P_{(1..i)} e^{eps p_i}."""
    return partial_classical_order1(1, pt.x, pt.p, RKind.parse(kind), params)


def _rhs(y, kind, params: ModelParams, N: int, dim: int):
    x, p = y[:N], y[N : 2 * N]
    A = y[2 * N :].reshape(dim, dim)
    pt = PhasePoint(x, p)
    vel, jerk = flow_data(1, pt, params)
    Q = spin_generator(pt, kind, params)
    dA = 1j * (Q @ A - A @ Q)
    return np.concatenate([vel, jerk, dA.ravel()])


def _rk4(y, dt, f):
    k1 = f(y)
    k2 = f(y + dt / 2 * k1)
    k3 = f(y + dt / 2 * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _pack(state: HybridState) -> np.ndarray:
    return np.concatenate([state.pt.x, state.pt.p, state.A.ravel()])


def _unpack(y, N: int, dim: int, t: float) -> HybridState:
    return HybridState(PhasePoint(y[:N], y[N : 2 * N]), y[2 * N :].reshape(dim, dim), t)


def evolve(
    state0: HybridState,
    kind,
    params: ModelParams,
    t_end: float,
    dt: float,
    n: int = 1,
    sample_every: int = 1,
    monitor_every: int = 1,
    local_tol: float = LOCAL_TOL,
) -> list:
    """RK4 co-integration; returns states at t = 0 and every sample_every steps.

    Every monitor_every steps the step is repeated as two half steps; if the
    two results differ by more than 15 local_tol (Richardson estimate of the
    local error above local_tol) StepRejected is raised.
    """
    if n != 1:
        raise NotImplementedError("only the n = 1 flow is integrated")
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    N = state0.pt.N
    dim = state0.A.shape[0]
    f = lambda y: _rhs(y, kind, params, N, dim)
    qn = np.linalg.norm(spin_generator(state0.pt, kind, params), 2)
    if qn * dt >= 0.1:
        log.warning("|Q| dt = %.3f exceeds 0.1", qn * dt)
    steps = int(round(t_end / dt))
    y = _pack(state0)
    out = [_unpack(y, N, dim, state0.t)]
    for k in range(1, steps + 1):
        y_new = _rk4(y, dt, f)
        if monitor_every and k % monitor_every == 0:
            y_half = _rk4(_rk4(y, dt / 2, f), dt / 2, f)
            err = float(np.max(np.abs(y_half - y_new))) / 15
            if err > local_tol * max(1.0, float(np.max(np.abs(y_half)))):
                raise StepRejected(f"local error {err:.3e} at t = {state0.t + k * dt:.4f}")
            y_new = y_half
        if not np.all(np.isfinite(y_new)):
            raise StepRejected(f"non-finite state at t = {state0.t + k * dt:.4f}")
        y = y_new
        if k % sample_every == 0 or k == steps:
            out.append(_unpack(y, N, dim, state0.t + k * dt))
    return out


def conserved_quantities(pt: PhasePoint, params: ModelParams) -> dict:
    N = pt.N
    return {m: d_classical(m, pt, params) for m in [*range(1, N + 1), *range(-N, 0)]}


def conservation_report(traj, params: ModelParams) -> dict:
    """Relative drifts of all D_m^cl, of the relative coordinates and of tr A^k (k = 1..3).

    tr A^k is conserved by any similarity flow; Q is not hermitian in general,
    so the Frobenius norm of A is not.
    """
    c0 = conserved_quantities(traj[0].pt, params)
    y0 = np.diff(traj[0].pt.x)
    tr0 = [np.trace(np.linalg.matrix_power(traj[0].A, k)) for k in (1, 2, 3)]
    rep = {"D": {m: 0.0 for m in c0}, "relative_coordinates": 0.0, "trace_powers": 0.0}
    for s in traj[1:]:
        c = conserved_quantities(s.pt, params)
        for m in c0:
            rep["D"][m] = max(rep["D"][m], abs(c[m] - c0[m]) / max(abs(c0[m]), 1e-300))
        rep["relative_coordinates"] = max(rep["relative_coordinates"], float(np.max(np.abs(np.diff(s.pt.x) - y0))))
        for k, t0 in zip((1, 2, 3), tr0):
            tk = np.trace(np.linalg.matrix_power(s.A, k))
            rep["trace_powers"] = max(rep["trace_powers"], abs(tk - t0) / max(abs(t0), 1.0))
    return rep


def exact_conjugation(H: np.ndarray, A0: np.ndarray, t: float) -> np.ndarray:
    """exp(iHt) A0 exp(-iHt)."""
    U = expm(1j * t * H)
    return U @ A0 @ np.linalg.inv(U)
