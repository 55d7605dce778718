"""Difference operators sum_k c_k(x) Gamma^k with matrix-valued coefficients.

Gamma^k acts by x -> x - i hbar eps k on functions to its right, so
f(x) Gamma^k g(x) Gamma^l = f(x) g(x - i hbar eps k) Gamma^{k+l}.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .elliptic_kernel import theta, theta_checked
from .r_matrices import ModelParams, RKind
from .spin_permutations import check_subset, complement, p_subset, subsets
from .tensor_linalg import spin_dim


def coeff_A(I, x, eta, tau) -> complex:
    """A_I(x) = prod_{i in I, j not in I} theta(x_i - x_j + eta) / theta(x_i - x_j)."""
    x = np.asarray(x, dtype=complex)
    N = len(x)
    I = check_subset(I, N)
    J = complement(I, N)
    if not I or not J:
        return 1.0 + 0j
    ii = np.array(I) - 1
    jj = np.array(J) - 1
    d = (x[ii][:, None] - x[jj][None, :]).ravel()
    den = theta_checked(d, tau, "coordinate difference").value
    num = theta(d + eta, tau).value
    return complex(np.prod(num / den))


def dlog_coeff_A(I, x, eta, tau) -> np.ndarray:
    """Gradient of log A_I with respect to x."""
    x = np.asarray(x, dtype=complex)
    N = len(x)
    I = check_subset(I, N)
    J = complement(I, N)
    g = np.zeros(N, dtype=complex)
    if not I or not J:
        return g
    ii = np.array(I) - 1
    jj = np.array(J) - 1
    d = x[ii][:, None] - x[jj][None, :]
    t0 = theta_checked(d, tau, "coordinate difference")
    t1 = theta(d + eta, tau)
    rho = t1.derivative / t1.value - t0.derivative / t0.value
    np.add.at(g, ii, rho.sum(axis=1))
    np.subtract.at(g, jj, rho.sum(axis=0))
    return g


def indicator(I, N: int) -> tuple:
    k = [0] * N
    for i in I:
        k[i - 1] = 1
    return tuple(k)


@dataclass
class DiffOperator:
    """Finite sum of shift monomials; coefficient functions map x to a dim x dim matrix."""

    N: int
    dim: int
    hbar: complex
    epsilon: complex
    terms: dict = field(default_factory=dict)

    @property
    def step(self) -> complex:
        return 1j * self.hbar * self.epsilon

    def meta(self):
        return (self.N, self.dim, self.hbar, self.epsilon)

    def coefficient(self, k, x) -> np.ndarray:
        return self.terms[tuple(k)](np.asarray(x, dtype=complex))

    def shifted(self, x, k) -> np.ndarray:
        return np.asarray(x, dtype=complex) - self.step * np.asarray(k)


def monomial(k, params: ModelParams, dim: int = 1, N: int | None = None, coeff: Callable | None = None) -> DiffOperator:
    N = params.N if N is None else N
    c = coeff or (lambda x: np.eye(dim, dtype=complex))
    return DiffOperator(N, dim, params.hbar, params.epsilon, {tuple(k): c})


def multiplication(f: Callable, params: ModelParams, dim: int = 1, N: int | None = None) -> DiffOperator:
    """Operator of multiplication by the scalar function f(x)."""
    N = params.N if N is None else N
    return monomial((0,) * N, params, dim, N, lambda x: f(x) * np.eye(dim, dtype=complex))


def build_scalar_D(n: int, params: ModelParams, N: int | None = None) -> DiffOperator:
    """D_n = sum_{|I|=n} A_I Gamma_I; D_{-n} = sum A_I(eta -> -eta) Gamma_I^{-1}."""
    N = params.N if N is None else N
    if not 1 <= abs(n) <= N:
        raise ValueError(f"n = {n} out of range for N = {N}")
    sgn = 1 if n > 0 else -1
    eta, tau = sgn * params.eta, params.tau
    terms = {}
    for I in subsets(N, abs(n)):
        k = tuple(sgn * v for v in indicator(I, N))
        terms[k] = (lambda I: lambda x: np.array([[coeff_A(I, x, eta, tau)]]))(I)
    return DiffOperator(N, 1, params.hbar, params.epsilon, terms)


def spin_coeff(I, x, n_sign: int, kind, params: ModelParams, N: int | None = None, hbar=None) -> np.ndarray:
    """Coefficient of Gamma_I^{+-1} in the spin operator D~_{+-n}.

    n_sign = +1: A_I(x) P_I(x)^{-1} P_I(x - i hbar eps e_I).
    n_sign = -1: A_{-I}(x) P_{-I}(x)^{-1} P_{-I}(x + i hbar eps e_I).
    """
    N = params.N if N is None else N
    hbar = params.hbar if hbar is None else hbar
    x = np.asarray(x, dtype=complex)
    neg = n_sign < 0
    A = coeff_A(I, x, -params.eta if neg else params.eta, params.tau)
    shift = n_sign * 1j * hbar * params.epsilon * np.asarray(indicator(I, N))
    P0 = p_subset(I, x, kind, params, N, negative=neg)
    P1 = p_subset(I, x - shift, kind, params, N, negative=neg)
    return A * np.linalg.solve(P0, P1)


def build_spin_D(n: int, kind, params: ModelParams, N: int | None = None) -> DiffOperator:
    """Spin Ruijsenaars operator D~_n with all P's pushed to the left of Gamma_I."""
    kind = RKind.parse(kind)
    N = params.N if N is None else N
    if not 1 <= abs(n) <= N:
        raise ValueError(f"n = {n} out of range for N = {N}")
    sgn = 1 if n > 0 else -1
    dim = spin_dim(params.r, N)
    terms = {}
    for I in subsets(N, abs(n)):
        k = tuple(sgn * v for v in indicator(I, N))
        terms[k] = (lambda I: lambda x: spin_coeff(I, x, sgn, kind, params, N))(I)
    return DiffOperator(N, dim, params.hbar, params.epsilon, terms)


def compose(A: DiffOperator, B: DiffOperator) -> DiffOperator:
    if A.meta() != B.meta():
        raise ValueError("operators carry different (N, dim, hbar, eps)")
    pairs = defaultdict(list)
    for ka, fa in A.terms.items():
        for kb, fb in B.terms.items():
            k = tuple(a + b for a, b in zip(ka, kb))
            pairs[k].append((ka, fa, fb))
    step = A.step

    def make(plist):
        def coeff(x):
            x = np.asarray(x, dtype=complex)
            return sum(fa(x) @ fb(x - step * np.asarray(ka)) for ka, fa, fb in plist)

        return coeff

    return DiffOperator(A.N, A.dim, A.hbar, A.epsilon, {k: make(v) for k, v in pairs.items()})


def add(A: DiffOperator, B: DiffOperator, scale_b: complex = 1.0) -> DiffOperator:
    if A.meta() != B.meta():
        raise ValueError("operators carry different (N, dim, hbar, eps)")
    terms = dict(A.terms)
    for k, fb in B.terms.items():
        if k in terms:
            fa = terms[k]
            terms[k] = (lambda fa, fb: lambda x: fa(x) + scale_b * fb(x))(fa, fb)
        else:
            terms[k] = (lambda fb: lambda x: scale_b * fb(x))(fb)
    return DiffOperator(A.N, A.dim, A.hbar, A.epsilon, terms)


def commutator(A: DiffOperator, B: DiffOperator) -> DiffOperator:
    return add(compose(A, B), compose(B, A), -1.0)


@dataclass(frozen=True)
class ProbeFunction:
    c: tuple

    def __call__(self, x) -> complex:
        return complex(np.exp(np.dot(np.asarray(self.c), np.asarray(x))))


def apply_to_probe(op: DiffOperator, f: ProbeFunction, spin_vec, x0, return_scale: bool = False):
    """sum_k c_k(x0) f(x0 - i hbar eps k) v; spin_vec=None applies to all basis vectors."""
    x0 = np.asarray(x0, dtype=complex)
    v = np.eye(op.dim, dtype=complex) if spin_vec is None else np.asarray(spin_vec, dtype=complex)
    out = 0
    scale = 0.0
    for k, coeff in op.terms.items():
        term = coeff(x0) @ v * f(op.shifted(x0, k))
        scale = max(scale, float(np.max(np.abs(term))))
        out = out + term
    return (out, scale) if return_scale else out


def commutator_residual(A: DiffOperator, B: DiffOperator, probes, points) -> float:
    """max over probes and points of |[A,B] f| divided by the largest term magnitude.

    The two products are expanded termwise, so the scale is the largest single
    product term encountered.
    """
    worst = 0.0
    for f in probes:
        for x0 in points:
            lhs, s1 = _apply_expanded(A, B, f, x0)
            rhs, s2 = _apply_expanded(B, A, f, x0)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))) / max(s1, s2, 1e-300))
    return worst


def _apply_expanded(A: DiffOperator, B: DiffOperator, f: ProbeFunction, x0):
    x0 = np.asarray(x0, dtype=complex)
    out = 0
    scale = 0.0
    for ka, fa in A.terms.items():
        ca = fa(x0)
        xa = A.shifted(x0, ka)
        for kb, fb in B.terms.items():
            term = ca @ fb(xa) * f(B.shifted(xa, kb))
            scale = max(scale, float(np.max(np.abs(term))))
            out = out + term
    return out, scale
