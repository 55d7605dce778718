"""Permutation combinatorics and the cocycle operators P_w(x), P_I(x).

Permutations are one-line tuples over 1..N composed as functions
((v w)(k) = v(w(k))); s_j swaps j and j+1. Sites and word letters are
1-based, coordinate vectors are 0-based arrays.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np

from .r_matrices import ModelParams, RKind, deformed_permutation
from .tensor_linalg import spin_dim


@dataclass(frozen=True)
class PermWord:
    oneline: tuple
    word: tuple

    @classmethod
    def from_oneline(cls, w, choice: str = "first") -> "PermWord":
        w = check_perm(w)
        return cls(w, reduced_word(w, choice))


def check_perm(w) -> tuple:
    w = tuple(int(k) for k in w)
    if sorted(w) != list(range(1, len(w) + 1)):
        raise ValueError(f"{w} is not a permutation of 1..{len(w)}")
    return w


def identity_perm(N: int) -> tuple:
    return tuple(range(1, N + 1))


def compose(v, w) -> tuple:
    """(v w)(k) = v(w(k))."""
    return tuple(v[k - 1] for k in w)


def inverse(w) -> tuple:
    out = [0] * len(w)
    for k, wk in enumerate(w, start=1):
        out[wk - 1] = k
    return tuple(out)


def transposition(j: int, N: int) -> tuple:
    w = list(range(1, N + 1))
    w[j - 1], w[j] = w[j], w[j - 1]
    return tuple(w)


def cycle(seq, N: int) -> tuple:
    """Cycle (a b c ...) meaning a -> b -> c -> ... -> a."""
    w = list(range(1, N + 1))
    seq = list(seq)
    for a, b in zip(seq, seq[1:] + seq[:1]):
        w[a - 1] = b
    return tuple(w)


def length(w) -> int:
    return sum(1 for a, b in itertools.combinations(w, 2) if a > b)


def reduced_word(w, choice: str = "first", rng=None) -> tuple:
    """Reduced word j_1..j_l with w = s_{j_1} ... s_{j_l}.

    Letters are peeled off the right end at a right descent w(j) > w(j+1).
    choice selects the first, last or a random descent, giving different
    reduced words for the same permutation.
    """
    w = list(check_perm(w))
    letters = []
    while True:
        desc = [j for j in range(1, len(w)) if w[j - 1] > w[j]]
        if not desc:
            break
        if choice == "first":
            j = desc[0]
        elif choice == "last":
            j = desc[-1]
        elif choice == "random":
            j = desc[int((rng or np.random.default_rng()).integers(len(desc)))]
        else:
            raise ValueError(f"unknown choice {choice}")
        w[j - 1], w[j] = w[j], w[j - 1]
        letters.append(j)
    return tuple(reversed(letters))


def word_to_perm(word, N: int) -> tuple:
    return reduce(compose, (transposition(j, N) for j in word), identity_perm(N))


def check_subset(I, N: int) -> tuple:
    I = tuple(int(i) for i in I)
    if any(b <= a for a, b in zip(I, I[1:])) or (I and (I[0] < 1 or I[-1] > N)):
        raise ValueError(f"invalid subset {I} of 1..{N}")
    return I


def complement(I, N: int) -> tuple:
    s = set(I)
    return tuple(k for k in range(1, N + 1) if k not in s)


def grassmannian(I, N: int) -> tuple:
    """(w_I, w_{-I}) with w_I(k) = i_k for k <= n, order preserving on the rest."""
    I = check_subset(I, N)
    Ic = complement(I, N)
    return I + Ic, Ic + I


def factor_list(word, N: int):
    """Crossings of P_w as (site j, a, b): factor P_{j,j+1}(x_a - x_b), leftmost first.

    The coordinate labels carried by the lines are swapped at every crossing,
    processing the word from the right.
    """
    labels = list(range(N))
    out = []
    for j in reversed(word):
        out.append((j, labels[j - 1], labels[j]))
        labels[j - 1], labels[j] = labels[j], labels[j - 1]
    out.reverse()
    return out


def _prod(mats, dim):
    out = np.eye(dim, dtype=complex)
    for M in mats:
        out = out @ M
    return out


def p_word(word, x, kind, params: ModelParams, N: int | None = None) -> np.ndarray:
    """P_w(x) for w = s_{j_1}...s_{j_l}, via the cocycle recursion."""
    N = params.N if N is None else N
    x = np.asarray(x, dtype=complex)
    dim = spin_dim(params.r, N)
    mats = [deformed_permutation(kind, j, x[a] - x[b], params, N) for j, a, b in factor_list(word, N)]
    return _prod(mats, dim)


@lru_cache(maxsize=8192)
def _p_w_cached(w, x, kind, params, N, choice):
    M = p_word(reduced_word(w, choice), np.asarray(x), kind, params, N)
    M.flags.writeable = False
    return M


def p_w(w, x, kind, params: ModelParams, N: int | None = None, choice: str = "first") -> np.ndarray:
    N = params.N if N is None else N
    w = check_perm(w)
    if len(w) != N:
        raise ValueError("permutation size does not match N")
    return _p_w_cached(w, tuple(complex(z) for z in x), RKind.parse(kind), params, N, choice)


def p_subset(I, x, kind, params: ModelParams, N: int | None = None, negative: bool = False) -> np.ndarray:
    """P_I(x) = P_{w_I^{-1}}(x), or P_{-I}(x) = P_{complement of I}(x)."""
    N = params.N if N is None else N
    I = check_subset(I, N)
    if negative:
        I = complement(I, N)
    w, _ = grassmannian(I, N)
    return p_w(inverse(w), x, kind, params, N)


def subset_word(I, N: int, negative: bool = False) -> tuple:
    """Canonical reduced word of w_I^{-1} (or of w_{I^c}^{-1})."""
    I = check_subset(I, N)
    if negative:
        I = complement(I, N)
    return reduced_word(inverse(grassmannian(I, N)[0]))


def permutation_matrix(w, r: int) -> np.ndarray:
    """Plain action of w on (C^r)^{(x)N}: the colour at site k moves to site w(k)."""
    w = check_perm(w)
    N = len(w)
    dim = spin_dim(r, N)
    M = np.zeros((dim, dim), dtype=complex)
    for idx in range(dim):
        cols = np.unravel_index(idx, (r,) * N)
        new = [0] * N
        for k in range(N):
            new[w[k] - 1] = cols[k]
        M[np.ravel_multi_index(new, (r,) * N), idx] = 1.0
    return M


def subsets(N: int, n: int):
    return [tuple(c) for c in itertools.combinations(range(1, N + 1), n)]


def all_perms(N: int):
    return [tuple(w) for w in itertools.permutations(range(1, N + 1))]


def word_independence_residual(w, x, kind, params: ModelParams, N: int | None = None) -> float:
    """Relative spread of P_w(x) over the first, last and a seeded random reduced word."""
    N = params.N if N is None else N
    x = np.asarray(x, dtype=complex)
    rng = np.random.default_rng(len(w) + sum(k * v for k, v in enumerate(w)))
    mats = [p_word(reduced_word(w, c, rng), x, kind, params, N) for c in ("first", "last", "random")]
    ref = max(np.linalg.norm(M) for M in mats)
    return max(float(np.linalg.norm(M - mats[0])) for M in mats) / ref


def inverse_identity_residual(w, x, kind, params: ModelParams, N: int | None = None) -> float:
    """|| P_w(x) P_{w^{-1}}(x_{w^{-1}(1)}, ..., x_{w^{-1}(N)}) - 1 || / sqrt(dim)."""
    N = params.N if N is None else N
    x = np.asarray(x, dtype=complex)
    wi = inverse(w)
    y = x[np.array(wi) - 1]
    M = p_word(reduced_word(w), x, kind, params, N) @ p_word(reduced_word(wi), y, kind, params, N)
    return float(np.linalg.norm(M - np.eye(M.shape[0]))) / np.sqrt(M.shape[0])


def eta_limit_value(word, x, kind, params: ModelParams, N: int | None = None, radius: float | None = None, m: int = 16) -> np.ndarray:
    """P_w(x) at eta = 0 as the mean over a circle |eta| = radius (the singularity at eta = 0 is removable).

    The nearest other singularity sits at eta = -(x_a - x_b), so the default
    radius is a quarter of the smallest coordinate difference (at most 1e-2).
    """
    N = params.N if N is None else N
    x = np.asarray(x, dtype=complex)
    if radius is None:
        d = np.abs(x[:, None] - x[None, :])[~np.eye(len(x), dtype=bool)]
        radius = min(1e-2, 0.25 * float(d.min())) if d.size else 1e-2
    etas = radius * np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
    return sum(p_word(word, x, kind, params.with_(eta=complex(e)), N) for e in etas) / m


def eta_limit_residual(w, x, kind, params: ModelParams, N: int | None = None) -> float:
    """|| P_w(x)|_{eta -> 0} - permutation_matrix(w) || / sqrt(dim)."""
    M = eta_limit_value(reduced_word(w), x, kind, params, N)
    return float(np.linalg.norm(M - permutation_matrix(w, params.r))) / np.sqrt(M.shape[0])
