"""Vertex (Baxter-Belavin) and face (Felder) elliptic R-matrices.

Both are normalised so that R|_{eta=0} = 1; the braided versions are
Rc(u) = P R(u), embedded at sites (i, i+1) as deformed permutations.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .elliptic_kernel import POLE_TOL, DegeneracyError, LatticeParam, PoleError, as_lattice, kronecker_phi, kronecker_phi_du, theta
from .tensor_linalg import comm, embed_dynamical, embed_two_site, flip, frob, spin_dim


class RKind(enum.Enum):
    VERTEX = "vertex"
    FACE = "face"
    SCALAR = "scalar"

    @classmethod
    def parse(cls, s) -> "RKind":
        if isinstance(s, cls):
            return s
        return cls(str(s).lower())


@dataclass(frozen=True)
class ModelParams:
    eta: complex
    epsilon: complex
    tau: LatticeParam
    r: int = 2
    N: int = 3
    hbar: complex = 0.37
    dyn_a: tuple = ()
    g: complex | None = None

    def __post_init__(self):
        object.__setattr__(self, "eta", complex(self.eta))
        object.__setattr__(self, "epsilon", complex(self.epsilon))
        object.__setattr__(self, "hbar", complex(self.hbar))
        object.__setattr__(self, "tau", as_lattice(self.tau))
        object.__setattr__(self, "dyn_a", tuple(complex(z) for z in self.dyn_a))
        if self.r < 1 or self.N < 1:
            raise ValueError("need r >= 1 and N >= 1")
        if self.dyn_a and len(self.dyn_a) != self.r:
            raise ValueError(f"dyn_a must have length r={self.r}")
        th = theta(self.eta, self.tau).value
        if abs(th) < 1e-12:
            raise DegeneracyError("eta lies on the period lattice")

    @property
    def t(self) -> complex:
        return self.tau.tau

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def a_vec(self) -> np.ndarray:
        if not self.dyn_a:
            raise ValueError("face kind needs dynamical parameters dyn_a")
        return np.asarray(self.dyn_a, dtype=complex)


def _normaliser(u, eta, tau):
    """phi(u, eta) and its u-derivative; R has a pole where phi vanishes (u = -eta mod lattice)."""
    if abs(theta(u + eta, tau).value) < POLE_TOL:
        raise PoleError(f"R-matrix pole at u = {u} (u + eta on the lattice)")
    return kronecker_phi_du(u, eta, tau)


def _vertex_entries(u, eta, tau, r):
    """Yield (row, col, value, derivative) of R for the vertex kind."""
    lat_r = LatticeParam(r * tau)
    f1, d1 = _normaliser(u, eta, tau)
    for a, b, g in itertools.product(range(r), repeat=3):
        d = (a + g - b) % r
        k, l = g - b, b - a
        c = np.exp(2j * np.pi / r * (k * eta + k * l * tau))
        e = np.exp(2j * np.pi / r * l * u)
        f2, d2 = kronecker_phi_du(u + k * tau, eta + l * tau, lat_r)
        val = c * e * f2 / f1
        der = c * e * ((2j * np.pi * l / r) * f2 / f1 + d2 / f1 - f2 * d1 / f1 ** 2)
        yield a * r + g, b * r + d, val, der


@lru_cache(maxsize=4096)
def _r_vertex_cached(u, eta, tau, r):
    R = np.zeros((r * r, r * r), dtype=complex)
    dR = np.zeros_like(R)
    for i, j, v, d in _vertex_entries(u, eta, tau, r):
        R[i, j] = v
        dR[i, j] = d
    R.flags.writeable = False
    dR.flags.writeable = False
    return R, dR


def r_vertex(u, params: ModelParams):
    """Vertex R(u) and dR/du; r >= 2 uses the rτ-lattice entry formula."""
    r = params.r
    if r == 1:
        return np.ones((1, 1), dtype=complex), np.zeros((1, 1), dtype=complex)
    return _r_vertex_cached(complex(u), params.eta, params.t, r)


@lru_cache(maxsize=8192)
def _r_face_cached(u, a, eta, tau, r):
    a = np.asarray(a)
    for al, be in itertools.combinations(range(r), 2):
        if abs(theta(a[be] - a[al], tau).value) < 1e-12:
            raise DegeneracyError("dynamical parameters coincide modulo the lattice")
    R = np.zeros((r * r, r * r), dtype=complex)
    dR = np.zeros_like(R)
    f1, d1 = _normaliser(u, eta, tau)
    for al in range(r):
        R[al * r + al, al * r + al] = 1.0
        for be in range(r):
            if al == be:
                continue
            diag = kronecker_phi(a[be] - a[al], eta, tau)
            R[al * r + be, al * r + be] = diag / f1
            dR[al * r + be, al * r + be] = -diag * d1 / f1 ** 2
            off, doff = kronecker_phi_du(u, a[be] - a[al], tau)
            R[al * r + be, be * r + al] = off / f1
            dR[al * r + be, be * r + al] = doff / f1 - off * d1 / f1 ** 2
    R.flags.writeable = False
    dR.flags.writeable = False
    return R, dR


def r_face(u, a, params: ModelParams):
    """Face R(u, a) and dR/du."""
    a = tuple(complex(z) for z in a)
    return _r_face_cached(complex(u), a, params.eta, params.t, params.r)


def r_check(kind, u, params: ModelParams, a=None):
    """Braided Rc = P R and its u-derivative on C^r (x) C^r."""
    kind = RKind.parse(kind)
    r = params.r
    if kind is RKind.SCALAR and r != 1:
        raise ValueError("scalar kind requires r = 1")
    if r == 1:
        return np.ones((1, 1), dtype=complex), np.zeros((1, 1), dtype=complex)
    P = flip(r)
    if kind is RKind.VERTEX:
        R, dR = r_vertex(u, params)
    else:
        R, dR = r_face(u, params.a_vec() if a is None else a, params)
    return P @ R, P @ dR


@lru_cache(maxsize=16384)
def _deformed_perm_cached(kind, i, u, params, N):
    r = params.r
    if kind is RKind.SCALAR or r == 1:
        dim = spin_dim(r, N)
        M, dM = np.eye(dim, dtype=complex), np.zeros((dim, dim), dtype=complex)
    elif kind is RKind.VERTEX:
        Rc, dRc = r_check(kind, u, params)
        M = embed_two_site(Rc, i, r, N)
        dM = embed_two_site(dRc, i, r, N)
    else:
        a = params.a_vec()
        eta = params.eta
        M = embed_dynamical(lambda mu: r_check(kind, u, params, a - eta * np.asarray(mu))[0], i, r, N)
        dM = embed_dynamical(lambda mu: r_check(kind, u, params, a - eta * np.asarray(mu))[1], i, r, N)
    M.flags.writeable = False
    dM.flags.writeable = False
    return M, dM


def deformed_permutation(kind, i: int, u, params: ModelParams, N: int | None = None, deriv: bool = False):
    """P_{i,i+1}(u) on (C^r)^{(x)N}; with deriv=True also returns dP/du.

    Face kind: on the block where sites 1..i-1 carry weight mu, the braided
    R-matrix is evaluated at dynamical parameters a - eta*mu.
    """
    kind = RKind.parse(kind)
    N = params.N if N is None else N
    if not 1 <= i <= N - 1:
        raise ValueError(f"site {i} out of range for N={N}")
    M, dM = _deformed_perm_cached(kind, i, complex(u), params, N)
    return (M, dM) if deriv else M


def h_interaction(kind, i: int, u, params: ModelParams, N: int | None = None):
    """h_{i,i+1}(u) = P_{i,i+1}(-u) P'_{i,i+1}(u)."""
    _, dM = deformed_permutation(kind, i, u, params, N, deriv=True)
    return deformed_permutation(kind, i, -u, params, N) @ dM


def ybe_residual(kind, i: int, u, v, params: ModelParams, N: int | None = None) -> float:
    """Normalised residual of the braided Yang-Baxter equation at sites i, i+1, i+2."""
    P = lambda j, w: deformed_permutation(kind, j, w, params, N)
    lhs = P(i, u) @ P(i + 1, u + v) @ P(i, v)
    rhs = P(i + 1, v) @ P(i, u + v) @ P(i + 1, u)
    return frob(lhs - rhs) / max(frob(lhs), frob(rhs))


def unitarity_residual(kind, i: int, u, params: ModelParams, N: int | None = None) -> float:
    M = deformed_permutation(kind, i, u, params, N) @ deformed_permutation(kind, i, -u, params, N)
    return frob(M - np.eye(M.shape[0])) / np.sqrt(M.shape[0])


def distance_commutator(kind, i: int, j: int, u, v, params: ModelParams, N: int | None = None) -> float:
    A = deformed_permutation(kind, i, u, params, N)
    B = deformed_permutation(kind, j, v, params, N)
    return frob(comm(A, B)) / (frob(A) * frob(B))


PAULI = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]]),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_span_residual(h2: np.ndarray) -> float:
    """Distance of a two-site r=2 operator from span{1, P s^a(x)s^a}, relative."""
    P = flip(2)
    basis = [np.eye(4, dtype=complex)] + [P @ np.kron(s, s) for s in PAULI.values()]
    B = np.stack([b.ravel() for b in basis], axis=1)
    coef, *_ = np.linalg.lstsq(B, h2.ravel(), rcond=None)
    return float(np.linalg.norm(B @ coef - h2.ravel()) / max(np.linalg.norm(h2), 1e-300))
