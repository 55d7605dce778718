import numpy as np
import pytest

from conftest import BASE, model, spaced_points
from spinfreeze.classical_rs import PhasePoint
from spinfreeze.modular_family import (
    BaseParams,
    EquilibriumError,
    ModularData,
    ModularWord,
    act,
    build_eval_context,
    c_factor,
    mobius,
    modular_covariance_residual,
    seed_data,
)


def data(rng, N=4):
    return ModularData(
        spaced_points(rng, N), rng.normal(size=N) + 1j * rng.normal(size=N), 0.27 + 0.05j, 0.6 + 0.1j, np.array([0.31 + 0.12j, -0.17 + 0.05j]), 0.15 + 1.2j
    )


def test_word_matrix_and_tau():
    assert np.array_equal(ModularWord("SS").matrix, -np.eye(2, dtype=int))
    assert np.array_equal(np.linalg.matrix_power(ModularWord("ST").matrix, 3), np.eye(2, dtype=int))
    assert np.array_equal(ModularWord("Tt").matrix, np.eye(2, dtype=int))
    d = seed_data(BASE, 3)
    for w in ("S", "TS", "ST", "STs"):
        assert abs(act(w, d).tau - mobius(ModularWord(w).matrix, d.tau)) < 1e-14
    with pytest.raises(ValueError):
        ModularWord("SX")


def test_group_relations_on_data(rng):
    d = data(rng)
    ref = d.as_array()
    for w in ("SSSS", "ST" * 6, "Ss", "tT"):
        out = act(w, d).as_array()
        assert np.max(np.abs(out - ref)) < 1e-12 * np.max(np.abs(ref))


def test_covariance(rng):
    for N in (3, 4, 5):
        par = model(N)
        pt = PhasePoint(spaced_points(rng, N), 0.3 * rng.normal(size=N))
        for n in range(1, N + 1):
            assert modular_covariance_residual("T", n, pt, par) < 1e-12
            assert modular_covariance_residual("S", n, pt, par) < 1e-11
    assert abs(c_factor(2, 4, 0.0, 1j) - 1) == 0


def test_s_image_is_closed_form():
    N = 4
    ctx = build_eval_context("S", BASE, N)
    tau0 = BASE.omega / N
    assert np.allclose(ctx.pt.x, -(np.arange(1, N + 1) / N) / tau0)
    assert abs(ctx.params.t + 1 / tau0) < 1e-14


def test_equilibrium_error():
    # a word whose image leaves the supported lattice range
    with pytest.raises((EquilibriumError, ValueError)):
        build_eval_context("S", BaseParams(0.27, 0.6, 0.15 + 30j), 3)


def test_dynamical_parameter_count():
    with pytest.raises(ValueError):
        build_eval_context("", BaseParams(0.27, 0.6, 1.2j, (0.1, 0.2, 0.3)), 3)
