import mpmath
import numpy as np
import pytest

from spinfreeze.elliptic_kernel import (
    LatticeParam,
    PoleError,
    jacobi_imaginary_residual,
    jacobi_imaginary_scale,
    kronecker_phi,
    kronecker_phi_du,
    log_derivative,
    modular_t_residual,
    theta,
    theta_addition_residual,
    theta_addition_scale,
    theta_checked,
    theta_product,
    theta_quasiperiod_residual,
    theta_value,
    vartheta1,
)

TAUS = [0.15 + 1.2j, 0.5j, -0.3 + 0.8j, 3j]


def points(rng, tau, n=20):
    t = complex(tau)
    return rng.uniform(-1.5, 1.5, n) + 1j * rng.uniform(-1.2, 1.2, n) * t.imag


@pytest.mark.parametrize("tau", TAUS)
def test_product_oracle(tau, rng):
    x = points(rng, tau)
    ours = theta_value(x, tau)
    prod = theta_product(x, tau)
    assert np.max(np.abs(ours - prod) / np.abs(prod)) < 1e-12


@pytest.mark.parametrize("tau", [0.15 + 1.2j, 0.5j])
def test_mpmath_oracle(tau, rng):
    q = mpmath.exp(1j * mpmath.pi * tau)
    norm = mpmath.jtheta(1, 0, q, 1)
    for x in points(rng, tau, 5):
        ref = complex(mpmath.jtheta(1, mpmath.pi * x, q) / (mpmath.pi * norm))
        assert abs(theta_value(x, tau) - ref) < 1e-12 * max(1, abs(ref))


@pytest.mark.parametrize("tau", TAUS)
def test_oddness_derivative_and_quasiperiodicity(tau, rng):
    assert abs(theta(0.0, tau).derivative - 1) < 1e-14
    for x in points(rng, tau, 10):
        tx = theta_value(x, tau)
        assert abs(theta_value(-x, tau) + tx) < 1e-12 * abs(tx)
        r1, r2 = theta_quasiperiod_residual(x, tau)
        assert abs(r1) < 1e-12 * abs(tx)
        assert abs(r2) < 1e-12 * abs(theta_value(x + tau, tau))


def test_derivative_matches_contour(rng):
    tau = 0.15 + 1.2j
    for x in points(rng, tau, 5):
        h = 1e-3
        w = np.exp(2j * np.pi * np.arange(16) / 16)
        d = np.mean(theta_value(x + h * w, tau) / w) / h
        assert abs(theta(x, tau).derivative - d) < 1e-10 * max(1, abs(d))


@pytest.mark.parametrize("tau", TAUS)
def test_addition_formula(tau, rng):
    x, y, z, w = (points(rng, tau, 10) for _ in range(4))
    for args in zip(x, y, z, w):
        assert abs(theta_addition_residual(*args, tau)) < 1e-11 * theta_addition_scale(*args, tau)


@pytest.mark.parametrize("tau", TAUS)
def test_modular_transformations(tau, rng):
    for x in points(rng, tau, 10):
        for norm in (False, True):
            assert abs(jacobi_imaginary_residual(x, tau, norm)) < 1e-10 * jacobi_imaginary_scale(x, tau, norm)
            scale = abs(vartheta1(np.pi * x, tau)) if not norm else abs(theta_value(x, tau))
            assert abs(modular_t_residual(x, tau, norm)) < 1e-11 * scale


def test_trig_limit():
    assert abs(theta_value(0.3, 5j) - np.sin(0.3 * np.pi) / np.pi) < 1e-6
    assert abs(theta_value(0.3, 12j) - np.sin(0.3 * np.pi) / np.pi) < 1e-14


def test_kronecker(rng):
    tau = 0.15 + 1.2j
    for u, v in zip(points(rng, tau, 10), points(rng, tau, 10)):
        f = kronecker_phi(u, v, tau)
        assert abs(kronecker_phi(u + 1, v, tau) - f) < 1e-11 * abs(f)
        assert abs(kronecker_phi(u + tau, v, tau) - np.exp(-2j * np.pi * v) * f) < 1e-11 * abs(f)
        _, d = kronecker_phi_du(u, v, tau)
        h = 1e-3
        w = np.exp(2j * np.pi * np.arange(16) / 16)
        ref = np.mean(kronecker_phi(u + h * w, v, tau) / w) / h
        assert abs(d - ref) < 1e-9 * max(1, abs(ref))


def test_pole_and_lattice_errors():
    tau = 0.15 + 1.2j
    with pytest.raises(PoleError):
        theta_checked(1.0 + tau, tau)
    with pytest.raises(PoleError):
        log_derivative(0.0, tau)
    with pytest.raises(ValueError):
        LatticeParam(-1j)
    with pytest.raises(ValueError):
        LatticeParam(0.01j)
    with pytest.raises(ValueError):
        theta(np.nan, tau)


def test_vectorised_matches_scalar(rng):
    tau = 0.15 + 1.2j
    x = points(rng, tau, 7)
    vec = theta(x, tau)
    for k, xk in enumerate(x):
        s = theta(xk, tau)
        assert abs(vec.value[k] - s.value) < 1e-15 * max(1, abs(s.value))
        assert abs(vec.derivative[k] - s.derivative) < 1e-14 * max(1, abs(s.derivative))
