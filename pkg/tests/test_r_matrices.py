import itertools

import numpy as np
import pytest

from conftest import model
from spinfreeze.elliptic_kernel import DegeneracyError, PoleError
from spinfreeze.r_matrices import (
    RKind,
    deformed_permutation,
    distance_commutator,
    h_interaction,
    pauli_span_residual,
    r_check,
    r_face,
    r_vertex,
    unitarity_residual,
    ybe_residual,
)
from spinfreeze.tensor_linalg import flip, rel_diff


def u_points(rng, n=6):
    return rng.uniform(0.1, 0.9, n) + 1j * rng.uniform(-0.25, 0.25, n)


@pytest.mark.parametrize("r", [2, 3])
def test_vertex_identities(r, rng):
    par = model(4, r=r)
    for u, v in zip(u_points(rng), u_points(rng)):
        assert unitarity_residual("vertex", 1, u, par) < 1e-12
        assert ybe_residual("vertex", 1, u, v, par) < 1e-12
        assert distance_commutator("vertex", 1, 3, u, v, par) < 1e-14


def test_face_identities(rng):
    par = model(4, face=True)
    for u, v in zip(u_points(rng), u_points(rng)):
        for i in (1, 2):
            assert unitarity_residual("face", i, u, par) < 1e-12
        assert ybe_residual("face", 1, u, v, par) < 1e-12
        assert ybe_residual("face", 2, u, v, par) < 1e-12
        assert distance_commutator("face", 1, 3, u, v, par) < 1e-14


def test_face_shift_sign_is_pinned(rng):
    """The opposite sign of the dynamical shift breaks the braided YBE."""
    from spinfreeze.tensor_linalg import embed_dynamical

    par = model(3, face=True)
    a, eta = par.a_vec(), par.eta
    P = lambda i, w: embed_dynamical(lambda mu: r_check("face", w, par, a + eta * np.asarray(mu))[0], i, 2, 3)
    u, v = u_points(rng, 2)
    lhs = P(1, u) @ P(2, u + v) @ P(1, v)
    rhs = P(2, v) @ P(1, u + v) @ P(2, u)
    assert rel_diff(lhs, rhs) > 1e-3


@pytest.mark.parametrize("kind", ["vertex", "face"])
def test_small_eta_initial_condition(kind, rng):
    par = model(2, face=kind == "face").with_(eta=1e-5)
    for u in rng.uniform(0.25, 0.75, 5) + 0.1j:
        assert rel_diff(r_check(kind, u, par)[0], flip(2)) < 1e-4


def test_vertex_ice_rule(rng):
    for r in (2, 3):
        R, _ = r_vertex(0.3 + 0.1j, model(2, r=r))
        for a, g, b, d in itertools.product(range(r), repeat=4):
            if (a + g - b - d) % r:
                assert R[a * r + g, b * r + d] == 0


@pytest.mark.parametrize("kind", ["vertex", "face"])
def test_derivative_matches_contour(kind, rng):
    par = model(2, face=kind == "face")
    for u in u_points(rng, 3):
        _, dR = r_check(kind, u, par)
        h = 1e-3
        w = np.exp(2j * np.pi * np.arange(16) / 16)
        ref = sum(r_check(kind, u + h * wk, par)[0] / wk for wk in w) / (16 * h)
        assert np.max(np.abs(dR - ref)) < 1e-9


def test_vertex_h_in_pauli_span(rng):
    par = model(2)
    for u in u_points(rng, 4):
        assert pauli_span_residual(h_interaction("vertex", 1, u, par)) < 1e-12


def test_face_h_is_weight_block_diagonal(rng):
    """h^f acts only on the two sites and preserves their colour content."""
    par = model(3, face=True)
    h = h_interaction("face", 2, 0.3 + 0.1j, par)
    for i, j in zip(*np.nonzero(np.abs(h) > 1e-14)):
        ci = np.unravel_index(i, (2, 2, 2))
        cj = np.unravel_index(j, (2, 2, 2))
        assert ci[0] == cj[0]
        assert sorted(ci[1:]) == sorted(cj[1:])


def test_scalar_kind_and_errors():
    par1 = model(3, r=1)
    assert np.array_equal(deformed_permutation("scalar", 1, 0.3, par1), np.eye(1))
    with pytest.raises(ValueError):
        r_check("scalar", 0.3, model(2))
    with pytest.raises(DegeneracyError):
        r_face(0.3, (0.2, 0.2), model(2, face=True))
    par = model(2)
    with pytest.raises(PoleError):
        r_vertex(-par.eta, par)
    with pytest.raises(ValueError):
        deformed_permutation("vertex", 3, 0.3, par)
    assert RKind.parse("FACE") is RKind.FACE
