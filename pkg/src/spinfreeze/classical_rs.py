"""Classical Ruijsenaars-Schneider functions, brackets, flows and equilibria."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .difference_ops import coeff_A, dlog_coeff_A
from .r_matrices import ModelParams
from .spin_permutations import subsets

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=complex)
        p = np.asarray(self.p, dtype=complex)
        if x.shape != p.shape or x.ndim != 1:
            raise ValueError("x and p must be vectors of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise ValueError("non-finite phase point")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def N(self) -> int:
        return len(self.x)

    def gamma(self, eps) -> np.ndarray:
        return np.exp(eps * self.p)


def _terms(n: int, pt: PhasePoint, params: ModelParams):
    """(I, A_I(x; +-eta), gamma_I^{+-1}) for the n-th function."""
    N = pt.N
    if not 1 <= abs(n) <= N:
        raise ValueError(f"n = {n} out of range for N = {N}")
    sgn = 1 if n > 0 else -1
    g = pt.gamma(params.epsilon) ** sgn
    for I in subsets(N, abs(n)):
        idx = np.array(I) - 1
        yield I, coeff_A(I, pt.x, sgn * params.eta, params.tau), complex(np.prod(g[idx]))


def d_classical(n: int, pt: PhasePoint, params: ModelParams) -> complex:
    """D_n^cl = sum_{|I|=n} A_I gamma_I; negative n uses (eta, gamma) -> (-eta, 1/gamma)."""
    return complex(sum(a * g for _, a, g in _terms(n, pt, params)))


def momentum_energy(pt: PhasePoint, params: ModelParams):
    """(P^cl, H^cl) = ((D_1 - D_-1)/2, (D_1 + D_-1)/2)."""
    d1 = d_classical(1, pt, params)
    dm1 = d_classical(-1, pt, params)
    return (d1 - dm1) / 2, (d1 + dm1) / 2


def flow_data(n: int, pt: PhasePoint, params: ModelParams):
    """Velocities dD_n/dp and jerks -dD_n/dx along the n-th Hamiltonian flow."""
    N = pt.N
    sgn = 1 if n > 0 else -1
    vel = np.zeros(N, dtype=complex)
    jerk = np.zeros(N, dtype=complex)
    for I, a, g in _terms(n, pt, params):
        idx = np.array(I) - 1
        vel[idx] += sgn * params.epsilon * a * g
        jerk -= a * g * dlog_coeff_A(I, pt.x, sgn * params.eta, params.tau)
    return vel, jerk


def term_scale(n: int, pt: PhasePoint, params: ModelParams) -> float:
    """Largest |A_I gamma_I|, used to normalise residuals."""
    return max(abs(a * g) for _, a, g in _terms(n, pt, params))


def holo_derivative(f, z0: complex, h: float = 1e-3, m: int = 16):
    """Derivative of a holomorphic f at z0 by an m-point contour average.

    Truncation error is O(h^m), so unlike finite differences this does not
    trade truncation against cancellation. f may return arrays.
    """
    k = np.arange(m)
    w = np.exp(2j * np.pi * k / m)
    acc = 0
    for wk in w:
        acc = acc + np.asarray(f(z0 + h * wk)) / wk
    return acc / (m * h)


class NonAnalyticError(ArithmeticError):
    pass


def checked_derivative(f, z0: complex, h: float = 1e-3, rtol: float = 1e-6):
    """holo_derivative cross-checked at two radii; disagreement flags non-analytic input.

    The contour rule returns the Wirtinger derivative d/dz, so a dependence on
    conj(z) that is linear is invisible to it; higher-order or non-polynomial
    dependence changes with the radius and is caught.
    """
    d1 = holo_derivative(f, z0, h)
    d2 = holo_derivative(f, z0, h / 2)
    scale = max(float(np.max(np.abs(d1))), 1.0)
    if float(np.max(np.abs(d1 - d2))) > rtol * scale:
        raise NonAnalyticError("contour derivatives at two radii disagree")
    return d2


def central_difference(f, z0: complex, h: float = 1e-6):
    return (np.asarray(f(z0 + h)) - np.asarray(f(z0 - h))) / (2 * h)


def gradients(f, pt: PhasePoint, check: bool = True):
    """(df/dx_j, df/dp_j) for all j, as arrays stacked on the first axis."""
    diff = checked_derivative if check else holo_derivative
    N = pt.N
    gx, gp = [], []
    for j in range(N):
        e = np.zeros(N)
        e[j] = 1
        gx.append(diff(lambda z: f(PhasePoint(pt.x + (z - pt.x[j]) * e, pt.p)), pt.x[j]))
        gp.append(diff(lambda z: f(PhasePoint(pt.x, pt.p + (z - pt.p[j]) * e)), pt.p[j]))
    return np.array(gx), np.array(gp)


def poisson_bracket(f, g, pt: PhasePoint, check: bool = True):
    """{f, g} = sum_j df/dx_j dg/dp_j - df/dp_j dg/dx_j, f and g holomorphic in (x, p)."""
    fx, fp = gradients(f, pt, check)
    gx, gp = gradients(g, pt, check)
    return sum(fx[j] * gp[j] - fp[j] * gx[j] for j in range(pt.N))


@dataclass
class EquilibriumReport:
    N: int
    velocities: dict = field(default_factory=dict)
    spread: dict = field(default_factory=dict)
    jerk: dict = field(default_factory=dict)
    dual_residual: dict = field(default_factory=dict)
    parity_residual: dict = field(default_factory=dict)
    tol: float = 1e-10

    def max_residual(self) -> float:
        vals = [*self.spread.values(), *self.jerk.values(), *self.dual_residual.values(), *self.parity_residual.values()]
        return max(vals) if vals else 0.0

    @property
    def accepted(self) -> bool:
        return self.max_residual() < self.tol


def equilibrium_report(pt: PhasePoint, params: ModelParams, mirror: tuple | None = None, tol: float = 1e-10) -> EquilibriumReport:
    """Velocity spread, jerks and v_n symmetry residuals at pt, all relative.

    Spreads and jerks are divided by the largest term |A_I gamma_I| of D_n
    (times |eps| for velocities). mirror = (pt', params') is the same
    equilibrium constructed with eta -> -eta; without it eta is flipped at
    fixed (x, p). v_n is the mean velocity; the dual residual compares
    v_{N-n}/(N-n) with v_n/n.
    """
    N = pt.N
    rep = EquilibriumReport(N, tol=tol)
    mpt, mpar = mirror if mirror is not None else (pt, params.with_(eta=-params.eta))
    vbar, mbar = {}, {}
    for n in range(1, N + 1):
        vel, jerk = flow_data(n, pt, params)
        s = term_scale(n, pt, params)
        vbar[n] = complex(vel.mean())
        rep.velocities[n] = vbar[n]
        rep.spread[n] = float(np.max(np.abs(vel - vbar[n]))) / (abs(params.epsilon) * s)
        rep.jerk[n] = float(np.max(np.abs(jerk))) / s
        mvel, _ = flow_data(n, mpt, mpar)
        mbar[n] = complex(mvel.mean())
    for n in range(1, N):
        scale = max(abs(vbar[n]), 1e-300)
        # v_n counts the C(N-1, n-1) subsets containing i, so the n <-> N-n
        # symmetry holds for v_n / n = eps D_n / N
        rep.dual_residual[n] = abs(vbar[N - n] / (N - n) - vbar[n] / n) / (scale / n)
        rep.parity_residual[n] = abs(mbar[n] - vbar[n]) / scale
    log.debug("equilibrium residual %.3e", rep.max_residual())
    return rep


def v_minus_one(pt: PhasePoint, params: ModelParams) -> complex:
    """eps A_{-i} gamma_i^{-1}, i-independent at an equilibrium (mean returned)."""
    vel, _ = flow_data(-1, pt, params)
    return complex(-vel.mean())


def q_integer_velocity(N: int, eta: complex, eps: complex) -> complex:
    """Trigonometric seed velocity eps [N]_q / N with [N]_q = sin(pi eta)/sin(pi eta/N).

    eta is the unscaled deformation and eps the seed value eps/N.
    """
    return eps * np.sin(np.pi * eta) / (N * np.sin(np.pi * eta / N))
