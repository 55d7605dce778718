"""SL(2,Z) action on (x, p; eta, eps, a | tau) and equilibrium evaluation contexts.

Words are strings over {S, T, s, t} (lowercase = inverse) read as function
composition: "TS" applies S first, then T.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .classical_rs import EquilibriumReport, PhasePoint, d_classical, equilibrium_report, v_minus_one
from .r_matrices import ModelParams

GEN_MATRIX = {
    "S": np.array([[0, 1], [-1, 0]]),
    "T": np.array([[1, 1], [0, 1]]),
    "s": np.array([[0, -1], [1, 0]]),
    "t": np.array([[1, -1], [0, 1]]),
}


class EquilibriumError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ModularWord:
    word: str = ""

    def __post_init__(self):
        w = "" if self.word is None else str(self.word).strip()
        bad = set(w) - set("STst")
        if bad:
            raise ValueError(f"invalid letters {sorted(bad)} in modular word {w!r}")
        object.__setattr__(self, "word", w)

    @property
    def matrix(self) -> np.ndarray:
        M = np.eye(2, dtype=int)
        for ch in self.word:
            M = M @ GEN_MATRIX[ch]
        return M

    def __str__(self):
        return self.word or "1"


@dataclass(frozen=True)
class ModularData:
    x: np.ndarray
    p: np.ndarray
    eta: complex
    eps: complex
    a: np.ndarray
    tau: complex

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, self.p, [self.eta, self.eps], self.a, [self.tau]])


def _apply_S(d: ModularData) -> ModularData:
    t = d.tau
    N = len(d.x)
    shift = (2j * np.pi * d.eta / d.eps) * (np.sum(d.x) - N * d.x)
    return ModularData(-d.x / t, -t * d.p - shift, -d.eta / t, -d.eps / t, -d.a / t, -1 / t)


def _apply_letter(ch: str, d: ModularData) -> ModularData:
    if ch == "T":
        return replace(d, tau=d.tau + 1)
    if ch == "t":
        return replace(d, tau=d.tau - 1)
    if ch == "S":
        return _apply_S(d)
    return _apply_S(_apply_S(_apply_S(d)))


def act(word, data: ModularData) -> ModularData:
    """Apply a modular word, rightmost letter first."""
    word = word if isinstance(word, ModularWord) else ModularWord(word)
    d = ModularData(
        np.asarray(data.x, dtype=complex),
        np.asarray(data.p, dtype=complex),
        complex(data.eta),
        complex(data.eps),
        np.asarray(data.a, dtype=complex),
        complex(data.tau),
    )
    for ch in reversed(word.word):
        d = _apply_letter(ch, d)
    return d


def mobius(M, tau: complex) -> complex:
    (a, b), (c, d) = M
    return (a * tau + b) / (c * tau + d)


def c_factor(n: int, N: int, eta: complex, tau: complex) -> complex:
    """S-covariance prefactor exp(i pi n(N-n) eta^2 / tau)."""
    return np.exp(1j * np.pi * n * (N - n) * eta ** 2 / tau)


def modular_covariance_residual(letter: str, n: int, pt: PhasePoint, params: ModelParams) -> float:
    """Relative residual of S.D_n = c_n D_n or T.D_n = D_n at pt."""
    if letter not in ("S", "T"):
        raise ValueError("covariance is checked on the generators S and T")
    data = ModularData(pt.x, pt.p, params.eta, params.epsilon, np.zeros(0), params.t)
    d = act(letter, data)
    new_par = params.with_(eta=d.eta, epsilon=d.eps, tau=d.tau, dyn_a=())
    lhs = d_classical(n, PhasePoint(d.x, d.p), new_par)
    base = d_classical(n, pt, params)
    rhs = base * (c_factor(n, pt.N, params.eta, params.t) if letter == "S" else 1.0)
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


@dataclass(frozen=True)
class BaseParams:
    eta: complex
    eps: complex
    omega: complex
    a: tuple = ()


def seed_data(base: BaseParams, N: int) -> ModularData:
    x = np.arange(1, N + 1) / N
    a = np.asarray(base.a, dtype=complex) / N
    return ModularData(x.astype(complex), np.zeros(N, dtype=complex), base.eta / N, base.eps / N, a, base.omega / N)


@dataclass
class EvalContext:
    word: ModularWord
    pt: PhasePoint
    params: ModelParams
    velocities: dict
    v_m1: complex
    report: EquilibriumReport
    base: BaseParams
    extra: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.pt.N


def _context_point(word, base: BaseParams, N: int, r: int, hbar: complex):
    d = act(word, seed_data(base, N))
    params = ModelParams(d.eta, d.eps, d.tau, r=r, N=N, hbar=hbar, dyn_a=tuple(d.a) if len(d.a) else ())
    return PhasePoint(d.x, d.p), params


def build_eval_context(word, base: BaseParams, N: int, r: int = 2, hbar: complex = 0.37, tol: float = 1e-10, check: bool = True) -> EvalContext:
    """Equilibrium obtained by applying word to the seed, with its residual report."""
    word = word if isinstance(word, ModularWord) else ModularWord(word)
    if base.a and len(base.a) != r:
        raise ValueError(f"need {r} dynamical parameters, got {len(base.a)}")
    pt, params = _context_point(word, base, N, r, hbar)
    mirror = _context_point(word, replace(base, eta=-base.eta), N, r, hbar)
    rep = equilibrium_report(pt, params, mirror=mirror, tol=tol)
    if check and not rep.accepted:
        raise EquilibriumError(f"word {word}: equilibrium residual {rep.max_residual():.3e} exceeds {tol:g}")
    return EvalContext(word, pt, params, dict(rep.velocities), v_minus_one(pt, params), rep, base)
