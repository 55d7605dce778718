"""Dense linear algebra on (C^r)^{(x)N}.

Basis convention: site 1 is the slowest-varying tensor index (big-endian),
colours are 0..r-1.
"""
from __future__ import annotations

import struct
from functools import lru_cache

import numpy as np

MAX_DIM = 4096


class DimensionError(ValueError):
    pass


def spin_dim(r: int, N: int) -> int:
    dim = r ** N
    if dim > MAX_DIM:
        raise DimensionError(f"dimension r^N = {dim} exceeds cap {MAX_DIM}")
    return dim


def flip(r: int) -> np.ndarray:
    """Plain flip P on C^r (x) C^r."""
    P = np.zeros((r * r, r * r), dtype=complex)
    for a in range(r):
        for b in range(r):
            P[b * r + a, a * r + b] = 1.0
    return P


def embed_two_site(op: np.ndarray, i: int, r: int, N: int) -> np.ndarray:
    """1^{(i-1)} (x) op (x) 1^{(N-i-1)}; sites are 1-based."""
    if not 1 <= i <= N - 1:
        raise ValueError(f"site {i} out of range for N={N}")
    spin_dim(r, N)
    left = np.eye(r ** (i - 1))
    right = np.eye(r ** (N - i - 1))
    return np.kron(np.kron(left, op), right)


def embed_one_site(op: np.ndarray, i: int, r: int, N: int) -> np.ndarray:
    if not 1 <= i <= N:
        raise ValueError(f"site {i} out of range for N={N}")
    return np.kron(np.kron(np.eye(r ** (i - 1)), op), np.eye(r ** (N - i)))


def basis_colours(index: int, r: int, N: int) -> tuple:
    if not 0 <= index < r ** N:
        raise ValueError(f"basis index {index} out of range")
    digits = []
    for _ in range(N):
        index, d = divmod(index, r)
        digits.append(d)
    return tuple(reversed(digits))


def weight_of_prefix(basis_index: int, i: int, r: int, N: int) -> np.ndarray:
    """Colour occupation counts of the first i-1 sites of a basis state."""
    cols = basis_colours(basis_index, r, N)
    if not 1 <= i <= N + 1:
        raise ValueError(f"prefix site {i} out of range")
    return np.bincount(np.asarray(cols[: i - 1], dtype=int), minlength=r)


@lru_cache(maxsize=None)
def prefix_weights(i: int, r: int) -> tuple:
    """Weights of all r^{i-1} prefix states, in basis order."""
    n = i - 1
    out = []
    for b in range(r ** n):
        digits = []
        for _ in range(n):
            b, d = divmod(b, r)
            digits.append(d)
        out.append(tuple(np.bincount(np.asarray(digits, dtype=int), minlength=r)))
    return tuple(out)


def embed_dynamical(op_of_weight, i: int, r: int, N: int) -> np.ndarray:
    """sum_mu |mu><mu| (x) op(mu) (x) 1, with mu the weight of sites 1..i-1.

    op_of_weight maps a weight tuple to an r^2 x r^2 matrix; it is called once
    per distinct weight.
    """
    if not 1 <= i <= N - 1:
        raise ValueError(f"site {i} out of range for N={N}")
    dim = spin_dim(r, N)
    nl, nr = r ** (i - 1), r ** (N - i - 1)
    out = np.zeros((nl, r * r, nr, nl, r * r, nr), dtype=complex)
    cache = {}
    eye_r = np.eye(nr)
    for b, mu in enumerate(prefix_weights(i, r)):
        blk = cache.get(mu)
        if blk is None:
            blk = cache[mu] = np.asarray(op_of_weight(mu))
        out[b, :, :, b, :, :] = np.einsum("ac,bd->abcd", blk, eye_r)
    return out.reshape(dim, dim)


def frob(A) -> float:
    return float(np.linalg.norm(A))


def comm(A, B):
    return A @ B - B @ A


def comm_norm(A, B) -> float:
    """||AB - BA||_F / (||A||_F ||B||_F)."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    den = frob(A) * frob(B)
    if den == 0:
        return 0.0
    return frob(comm(A, B)) / den


def rel_diff(A, B) -> float:
    """||A - B||_F / max(||A||_F, ||B||_F, tiny)."""
    den = max(frob(A), frob(B), 1e-300)
    return frob(np.asarray(A) - np.asarray(B)) / den


def eig(A):
    """Eigen-decomposition with a reconstruction check."""
    w, V = np.linalg.eig(A)
    return w, V


def reconstruction_residual(A, w, V) -> float:
    return rel_diff(V @ np.diag(w) @ np.linalg.inv(V), A)


def write_matrix_bin(path, M) -> None:
    """uint64 LE dim header, then dim*dim complex128 LE values, row-major."""
    M = np.asarray(M, dtype="<c16")
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError("expected a square matrix")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", M.shape[0]))
        fh.write(np.ascontiguousarray(M).tobytes(order="C"))


def read_matrix_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        (dim,) = struct.unpack("<Q", fh.read(8))
        if dim > MAX_DIM:
            raise DimensionError(f"dimension {dim} exceeds cap")
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != dim * dim:
        raise ValueError(f"expected {dim * dim} entries, found {data.size}")
    return data.reshape(dim, dim).astype(complex)


def matrix_to_json(M) -> list:
    M = np.asarray(M)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(a, b) for a, b in row] for row in rows], dtype=complex)
