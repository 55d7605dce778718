import numpy as np
import pytest

from conftest import BASE, model, spaced_points
from spinfreeze.classical_rs import (
    NonAnalyticError,
    PhasePoint,
    central_difference,
    checked_derivative,
    d_classical,
    equilibrium_report,
    flow_data,
    gradients,
    holo_derivative,
    momentum_energy,
    poisson_bracket,
    q_integer_velocity,
    v_minus_one,
)
from spinfreeze.modular_family import BaseParams, build_eval_context


def random_point(rng, N):
    return PhasePoint(spaced_points(rng, N), 0.3 * rng.normal(size=N) + 0.1j * rng.normal(size=N))


def test_holo_derivative():
    assert abs(holo_derivative(np.exp, 0.3 + 0.2j) - np.exp(0.3 + 0.2j)) < 1e-12
    assert abs(central_difference(np.sin, 0.4) - np.cos(0.4)) < 1e-9
    with pytest.raises(NonAnalyticError):
        checked_derivative(np.abs, 0.01 + 0.01j)


def test_flow_data_matches_gradients(rng):
    par = model(4)
    pt = random_point(rng, 4)
    for n in (1, 2, -1, -3):
        vel, jerk = flow_data(n, pt, par)
        gx, gp = gradients(lambda q: d_classical(n, q, par), pt)
        assert np.max(np.abs(vel - gp)) < 1e-10 * np.max(np.abs(gp))
        assert np.max(np.abs(jerk + gx)) < 1e-10 * max(1, np.max(np.abs(gx)))


def test_involution(rng):
    par = model(4)
    pt = random_point(rng, 4)
    for n, m in [(1, 2), (1, -1), (2, -3), (1, 4)]:
        f = lambda q: d_classical(n, q, par)
        g = lambda q: d_classical(m, q, par)
        scale = abs(d_classical(n, pt, par) * d_classical(m, pt, par))
        assert abs(poisson_bracket(f, g, pt)) < 1e-10 * scale


def test_total_momentum_shift(rng):
    par = model(3)
    pt = random_point(rng, 3)
    dN = d_classical(3, pt, par)
    assert abs(dN - np.exp(par.epsilon * np.sum(pt.p))) < 1e-14
    P, H = momentum_energy(pt, par)
    assert abs(P + H - d_classical(1, pt, par)) < 1e-14


@pytest.mark.parametrize("N", [3, 4, 5])
@pytest.mark.parametrize("word", ["", "S", "TS", "ST"])
def test_equilibria(N, word):
    ctx = build_eval_context(word, BASE, N)
    assert ctx.report.accepted
    vel, _ = flow_data(-1, ctx.pt, ctx.params)
    assert abs(-vel.mean() - v_minus_one(ctx.pt, ctx.params)) < 1e-15


def test_perturbed_point_rejected(rng):
    ctx = build_eval_context("", BASE, 4)
    bad = PhasePoint(ctx.pt.x + 0.01 * rng.normal(size=4), ctx.pt.p)
    assert equilibrium_report(bad, ctx.params).max_residual() > 1e-3


@pytest.mark.parametrize("N", [3, 4, 5])
def test_trig_velocity(N):
    eta, eps = 0.27, 0.6
    ctx = build_eval_context("", BaseParams(eta, eps, 8j * N), N)
    assert abs(ctx.velocities[1] - q_integer_velocity(N, eta, eps / N)) < 1e-6 * abs(ctx.velocities[1])


def test_phase_point_validation():
    with pytest.raises(ValueError):
        PhasePoint(np.zeros(3), np.zeros(2))
    with pytest.raises(ValueError):
        PhasePoint(np.array([np.nan, 0]), np.zeros(2))
