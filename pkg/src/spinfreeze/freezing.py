"""Order-hbar terms of the spin Ruijsenaars operators and the frozen spin chains.

For |I| = n the coefficient of Gamma_I in D~_n is A_I P_I(x)^{-1} P_I(x - i hbar eps e_I).
Its hbar-derivative is -i eps A_I P_I^{-1} sum_{i in I} d_i P_I. Writing
P_I = F_1 ... F_l with F_k = P_{j_k}(x_a - x_b) and F^{-1}(u) = F(-u), each
d_i F_k turns into an h-insertion h_{j_k}(x_a - x_b) transported through
F_{k+1} ... F_l. H_{n,B} evaluates the partial classical limit (Gamma -> gamma)
at an equilibrium.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .classical_rs import PhasePoint, d_classical, holo_derivative, poisson_bracket
from .difference_ops import coeff_A, spin_coeff
from .elliptic_kernel import theta
from .modular_family import BaseParams, EvalContext, build_eval_context
from .r_matrices import ModelParams, RKind, deformed_permutation, h_interaction
from .spin_permutations import check_subset, factor_list, p_word, subset_word, subsets
from .tensor_linalg import comm_norm, frob, spin_dim

log = logging.getLogger(__name__)


def _overlaps(j: int, lo: int, hi: int) -> bool:
    return j + 1 >= lo and j <= hi


def transported_insertions(I, x, kind, params: ModelParams, negative: bool = False, simplify: bool = True):
    """P^{-1} sum_{i in I} d_i P for P = P_I (or P_{-I}), as a sum of transported h's.

    simplify=True skips conjugation by factors whose sites are disjoint from
    the current support (they commute, including in the face case, because
    every factor preserves the weight of the sites it acts on).
    """
    N = params.N
    I = check_subset(I, N)
    x = np.asarray(x, dtype=complex)
    dim = spin_dim(params.r, N)
    inI = np.zeros(N, dtype=bool)
    inI[np.array(I) - 1] = True
    facs = factor_list(subset_word(I, N, negative), N)
    out = np.zeros((dim, dim), dtype=complex)
    for k, (j, a, b) in enumerate(facs):
        c = int(inI[a]) - int(inI[b])
        if c == 0:
            continue
        u = x[a] - x[b]
        X = h_interaction(kind, j, u, params)
        lo, hi = j, j + 1
        for jm, am, bm in facs[k + 1:]:
            if simplify and not _overlaps(jm, lo, hi):
                continue
            um = x[am] - x[bm]
            X = deformed_permutation(kind, jm, -um, params) @ X @ deformed_permutation(kind, jm, um, params)
            lo, hi = min(lo, jm), max(hi, jm + 1)
        out += c * X
    return out


def transported_insertions_direct(I, x, kind, params: ModelParams, negative: bool = False):
    """Same quantity from the product rule with explicit matrix inverses (debug path)."""
    N = params.N
    I = check_subset(I, N)
    x = np.asarray(x, dtype=complex)
    dim = spin_dim(params.r, N)
    inI = np.zeros(N, dtype=bool)
    inI[np.array(I) - 1] = True
    facs = factor_list(subset_word(I, N, negative), N)
    mats, ders = [], []
    for j, a, b in facs:
        M, dM = deformed_permutation(kind, j, x[a] - x[b], params, deriv=True)
        mats.append(M)
        ders.append((int(inI[a]) - int(inI[b])) * dM)
    P = np.eye(dim, dtype=complex)
    for M in mats:
        P = P @ M
    dP = np.zeros((dim, dim), dtype=complex)
    for k in range(len(mats)):
        term = np.eye(dim, dtype=complex)
        for m, M in enumerate(mats):
            term = term @ (ders[k] if m == k else M)
        dP += term
    return np.linalg.solve(P, dP)


def order1_coefficient(I, x, kind, params: ModelParams, negative: bool = False, simplify: bool = True):
    """Order-hbar coefficient of Gamma_I^{+-1} in D~_{+-n}.

    positive: -i eps A_I(x) P_I^{-1} sum_{i in I} d_i P_I
    negative: +i eps A_{-I}(x) P_{-I}^{-1} sum_{i in I} d_i P_{-I}
    """
    eta = -params.eta if negative else params.eta
    A = coeff_A(I, x, eta, params.tau)
    S = transported_insertions(I, x, kind, params, negative, simplify)
    sign = 1j if negative else -1j
    return sign * params.epsilon * A * S


def order1_oracle(I, x, kind, params: ModelParams, negative: bool = False, method: str = "richardson", delta: float = 1e-4):
    """d/dhbar of the full coefficient at hbar = 0, from the hbar-dependent coefficient itself.

    richardson: central differences at +-delta and +-delta/2 combined to O(delta^4).
    contour: 16-point contour average of radius 10 delta (holomorphic in hbar).
    """
    sgn = -1 if negative else 1
    f = lambda h: spin_coeff(I, x, sgn, kind, params, hbar=h)
    if method == "contour":
        return holo_derivative(f, 0.0, h=10 * delta, m=16)
    if method != "richardson":
        raise ValueError(f"unknown oracle method {method}")
    D = lambda h: (f(h) - f(-h)) / (2 * h)
    return (4 * D(delta / 2) - D(delta)) / 3


def partial_classical_order1(n: int, x, p, kind, params: ModelParams, oracle: str | None = None):
    """c~_0(D~_n^{(1)})(x, p) = sum_I (order-hbar coefficient)(x) gamma_I^{+-1}."""
    N = params.N
    x = np.asarray(x, dtype=complex)
    g = np.exp(params.epsilon * np.asarray(p, dtype=complex))
    neg = n < 0
    out = np.zeros((spin_dim(params.r, N),) * 2, dtype=complex)
    for I in subsets(N, abs(n)):
        gi = complex(np.prod(g[np.array(I) - 1]))
        if neg:
            gi = 1 / gi
        c = order1_oracle(I, x, kind, params, neg, oracle) if oracle else order1_coefficient(I, x, kind, params, neg)
        out += c * gi
    return out


def coefficient_direct(I, ctx: EvalContext, negative: bool = False) -> complex:
    """a_{+-I} = i eps A_{+-I}(x*) gamma_I*^{+-1}."""
    par = ctx.params
    eta = -par.eta if negative else par.eta
    g = np.exp(par.epsilon * ctx.pt.p)[np.array(I) - 1]
    gi = complex(np.prod(g)) ** (-1 if negative else 1)
    return 1j * par.epsilon * coeff_A(I, ctx.pt.x, eta, par.tau) * gi


def coefficient_closed(I, ctx: EvalContext, negative: bool = False) -> complex:
    """i eps (v*/eps)^n prod_{m<m'} theta(d)^2 / (theta(d + eta) theta(d - eta)), d = x_{i_m} - x_{i_m'}."""
    par = ctx.params
    v = ctx.v_m1 if negative else ctx.velocities[1]
    x = ctx.pt.x
    prod = 1.0 + 0j
    for m, a in enumerate(I):
        for b in I[m + 1:]:
            d = x[a - 1] - x[b - 1]
            t = theta(d, par.tau).value
            prod *= t * t / (theta(d + par.eta, par.tau).value * theta(d - par.eta, par.tau).value)
    return 1j * par.epsilon * (v / par.epsilon) ** len(I) * prod


def hamiltonian_explicit(n: int, ctx: EvalContext, kind, simplify: bool = True) -> np.ndarray:
    """H_{n,B} = -sum_I a_I S_I (n > 0) or sum_I a_{-I} S_{-I} (n < 0), with S the transported insertions."""
    par = ctx.params
    N = par.N
    neg = n < 0
    dim = spin_dim(par.r, N)
    H = np.zeros((dim, dim), dtype=complex)
    for I in subsets(N, abs(n)):
        a = coefficient_direct(I, ctx, neg)
        S = transported_insertions(I, ctx.pt.x, kind, par, neg, simplify)
        H += (a if neg else -a) * S
    return H


def hamiltonian_oracle(n: int, ctx: EvalContext, kind, method: str = "richardson") -> np.ndarray:
    """H_{n,B} through the hbar-extraction path (no transported-h combinatorics)."""
    return partial_classical_order1(n, ctx.pt.x, ctx.pt.p, kind, ctx.params, oracle=method)


def gamma_total(ctx: EvalContext) -> complex:
    return complex(np.exp(ctx.params.epsilon * np.sum(ctx.pt.p)))


def hamiltonian(n: int, ctx: EvalContext, kind) -> np.ndarray:
    """H_{n,B}; for |n| > N/2 routed through H_{-(N-|n|)} and the total shift D_N."""
    N = ctx.params.N
    if not 1 <= abs(n) <= N - 1:
        raise ValueError(f"n = {n} out of range 1 <= |n| <= N-1")
    if 2 * abs(n) > N:
        m = -np.sign(n) * (N - abs(n))
        g = gamma_total(ctx)
        return (g if n > 0 else 1 / g) * hamiltonian_explicit(int(m), ctx, kind)
    return hamiltonian_explicit(n, ctx, kind)


def cycle_word(i: int, j: int) -> tuple:
    """Reduced word of the cycle (i i+1 ... j) = s_i s_{i+1} ... s_{j-1}."""
    return tuple(range(i, j))


def hamiltonian_2_regrouped(ctx: EvalContext, kind) -> np.ndarray:
    """H_{2,B} from the regrouped three-sum form (two-site insertions only)."""
    par = ctx.params
    N = par.N
    x = ctx.pt.x
    dim = spin_dim(par.r, N)
    a2 = {}
    for I in subsets(N, 2):
        a2[I] = a2[I[::-1]] = coefficient_direct(I, ctx)

    def P(word, y):
        return p_word(word, y, kind, par)

    H = np.zeros((dim, dim), dtype=complex)
    for i in range(1, N + 1):
        for j in range(i + 1, N + 1):
            w = sum(a2[(j, k)] for k in range(1, i)) + sum(a2[(j, k)] for k in range(j + 1, N + 1))
            if w == 0:
                continue
            T = P(cycle_word(i + 1, j), x)
            h = h_interaction(kind, i, x[i - 1] - x[j - 1], par)
            H += w * np.linalg.solve(T, h @ T)
    for i in range(1, N + 1):
        for j in range(i + 1, N + 1):
            for k in range(j + 1, N + 1):
                y = np.concatenate([x[: i - 1], [x[j - 1]], x[i - 1 : j - 1], x[j:]])
                Q = P(cycle_word(i + 2, k), y)
                T = P(cycle_word(i, j), x)
                h = h_interaction(kind, i + 1, x[i - 1] - x[k - 1], par)
                inner = np.linalg.solve(Q, h @ Q)
                H += a2[(j, k)] * np.linalg.solve(T, inner @ T)
    return H


@dataclass
class FrozenChain:
    kind: RKind
    context: EvalContext
    hamiltonians: dict
    coefficients: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.context.params.N

    def commutator_residuals(self) -> dict:
        out = {}
        ks = sorted(self.hamiltonians)
        for a in range(len(ks)):
            for b in range(a + 1, len(ks)):
                out[(ks[a], ks[b])] = comm_norm(self.hamiltonians[ks[a]], self.hamiltonians[ks[b]])
        return out


def default_n_range(N: int) -> list:
    return [n for n in range(-(N - 1), N) if n != 0]


def freeze(kind, word, base: BaseParams, N: int, r: int = 2, n_range=None, hbar: complex = 0.37, coeff_tol: float = 1e-10) -> FrozenChain:
    """Build H_{n,B} for all n in n_range at the equilibrium labelled by word."""
    kind = RKind.parse(kind)
    if kind is RKind.FACE and not base.a:
        raise ValueError("face kind needs dynamical parameters")
    ctx = build_eval_context(word, base if kind is RKind.FACE else BaseParams(base.eta, base.eps, base.omega), N, r, hbar)
    n_range = default_n_range(N) if n_range is None else list(n_range)
    Hs = {n: hamiltonian(n, ctx, kind) for n in n_range}
    chain = FrozenChain(kind, ctx, Hs)
    worst = 0.0
    for sgn in (1, -1):
        for n in range(1, N):
            for I in subsets(N, n):
                d = coefficient_direct(I, ctx, sgn < 0)
                c = coefficient_closed(I, ctx, sgn < 0)
                chain.coefficients[(sgn * n, I)] = d
                worst = max(worst, abs(d - c) / max(abs(d), 1e-300))
    chain.residuals["coefficient_two_path"] = worst
    if worst > coeff_tol:
        log.warning("two-path coefficient residual %.3e exceeds %.1e", worst, coeff_tol)
    return chain


def translation_invariance_residual(n: int, x, p, kind, params: ModelParams) -> float:
    """|sum_j d_j c~_0(D~_n^{(1)})| relative to its size, via a contour derivative along (1,...,1)."""
    x = np.asarray(x, dtype=complex)
    ones = np.ones_like(x)
    G = partial_classical_order1(n, x, p, kind, params)
    d = holo_derivative(lambda t: partial_classical_order1(n, x + t * ones, p, kind, params), 0.0, h=1e-2, m=8)
    scale = max(float(np.max(np.abs(G))), 1.0)
    return float(np.max(np.abs(d))) / scale


def freezing_bracket_residual(n: int, m: int, ctx: EvalContext, kind, pt: PhasePoint | None = None) -> float:
    """max |{D_n^cl, c~_0(D~_m^{(1)})}| entrywise at the equilibrium (or at pt)."""
    par = ctx.params
    pt = ctx.pt if pt is None else pt
    f = lambda q: d_classical(n, q, par)
    g = lambda q: partial_classical_order1(m, q.x, q.p, kind, par)
    return float(np.max(np.abs(poisson_bracket(f, g, pt, check=False))))


def _traceless_rel(A: np.ndarray, B: np.ndarray) -> float:
    D = A - B
    dim = D.shape[0]
    return frob(D - np.trace(D) / dim * np.eye(dim)) / max(frob(A), frob(B))


def identity_shift_check(base: BaseParams, N: int, n: int = 1) -> dict:
    """Informative: is H_{n,1} - H_{n,S} (vertex, r = 2) a multiple of the identity?

    Reports the traceless part of the difference relative to the chains, for
    raw hamiltonians and for each divided by its velocity scale v_{+-1}*.
    "same_tau" rebuilds the S chain from a base whose S-image shares tau, eta
    and eps with the B = 1 chain.
    """
    def scale(ch):
        return ch.context.velocities[1] if n > 0 else ch.context.v_m1

    c1 = freeze("vertex", "", base, N, 2, [n])
    cS = freeze("vertex", "S", base, N, 2, [n])
    w = base.omega
    same = BaseParams(N * base.eta / w, N * base.eps / w, -N * N / w)
    cT = freeze("vertex", "S", same, N, 2, [n])
    H1, HS, HT = c1.hamiltonians[n], cS.hamiltonians[n], cT.hamiltonians[n]
    return {
        "raw": _traceless_rel(H1, HS),
        "per_velocity": _traceless_rel(H1 / scale(c1), HS / scale(cS)),
        "same_tau_per_velocity": _traceless_rel(H1 / scale(c1), HT / scale(cT)),
    }


FACE_REAL_REGIME = BaseParams(0.3j, 0.6, 1.2j, (0.31j, -0.17j))


def real_spectrum_check(base: BaseParams = FACE_REAL_REGIME, N: int = 4) -> float:
    """Informative: max |Im lambda| of H_{1,S} + H_{-1,S} (face, r = 2), relative to max |lambda|.

    The default regime has real eta and a, imaginary eps and imaginary tau
    in the S chart (imaginary base eta, omega, a and real base eps).
    """
    ch = freeze("face", "S", base, N, 2, [1, -1])
    w = np.linalg.eigvals(ch.hamiltonians[1] + ch.hamiltonians[-1])
    return float(np.max(np.abs(w.imag)) / max(np.max(np.abs(w)), 1e-300))
