"""Odd Jacobi theta function, the Kronecker function and modular identities.

Normalisation: theta(x) = vartheta(pi x) / (pi vartheta'(0)), so that
theta'(0) = 1, theta(x + 1) = -theta(x) and
theta(x + tau) = -p^{-1} exp(-2 pi i x) theta(x) with nome p = exp(i pi tau).
All functions accept numpy arrays and broadcast.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

MIN_IM_TAU = 0.1
SERIES_RTOL = 1e-18
POLE_TOL = 1e-12


class PoleError(ArithmeticError):
    """An argument sits on (or numerically at) a zero of theta."""


class DegeneracyError(ArithmeticError):
    """Parameters make a construction singular."""


@dataclass(frozen=True)
class LatticeParam:
    tau: complex

    def __post_init__(self):
        tau = complex(self.tau)
        if not np.isfinite(tau.real) or not np.isfinite(tau.imag):
            raise ValueError("tau must be finite")
        if tau.imag <= 0:
            raise ValueError(f"Im tau must be positive, got {tau}")
        if tau.imag < MIN_IM_TAU:
            raise ValueError(f"Im tau = {tau.imag:g} below supported minimum {MIN_IM_TAU}")
        object.__setattr__(self, "tau", tau)

    @property
    def nome(self) -> complex:
        return np.exp(1j * np.pi * self.tau)


class ThetaValue(NamedTuple):
    value: complex
    derivative: complex


def as_lattice(tau) -> LatticeParam:
    return tau if isinstance(tau, LatticeParam) else LatticeParam(tau)


_NTERMS_CACHE: dict = {}


def _series_terms(tau: complex):
    """Series exponents and weights for vartheta, truncated at SERIES_RTOL."""
    key = tau
    hit = _NTERMS_CACHE.get(key)
    if hit is not None:
        return hit
    # after argument reduction |Im z| <= pi Im tau / 2, so term n is bounded
    # by |p|^{(n+1/2)^2 - (n+1/2)}; stop once that is negligible
    q = np.pi * tau.imag
    n = 0
    while q * ((n + 0.5) ** 2 - (n + 0.5)) < -np.log(SERIES_RTOL) + 5:
        n += 1
    ks = np.arange(n + 1)
    odd = 2 * ks + 1
    weights = 2.0 * (-1.0) ** ks * np.exp(1j * np.pi * tau * (ks + 0.5) ** 2)
    dprime0 = np.sum(weights * odd)
    out = (odd, weights, dprime0)
    if len(_NTERMS_CACHE) > 256:
        _NTERMS_CACHE.clear()
    _NTERMS_CACHE[key] = out
    return out


def _check_finite(x):
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite theta argument")


def theta(x, tau) -> ThetaValue:
    """theta(x|tau) and its x-derivative, computed from one series pass."""
    lat = as_lattice(tau)
    t = lat.tau
    x = np.asarray(x, dtype=complex)
    _check_finite(x)
    odd, weights, dprime0 = _series_terms(t)

    # reduce x = y + m + k tau with |Im y| <= Im tau / 2, |Re y| <= 1/2
    k = np.round(x.imag / t.imag)
    y = x - k * t
    m = np.round(y.real)
    y = y - m

    z = np.pi * y[..., None] * odd
    s = np.sin(z) @ weights if y.ndim else np.sum(weights * np.sin(z))
    c = np.cos(z) @ (weights * odd) if y.ndim else np.sum(weights * odd * np.cos(z))
    val = s / (np.pi * dprime0)
    der = c / dprime0

    # theta(y + m + k tau) = (-1)^{m+k} exp(-2 pi i k y - i pi k^2 tau) theta(y)
    sign = np.where((m + k) % 2 == 0, 1.0, -1.0)
    fac = sign * np.exp(-2j * np.pi * k * y - 1j * np.pi * k * k * t)
    der = fac * (der - 2j * np.pi * k * val)
    val = fac * val
    if val.ndim == 0:
        return ThetaValue(complex(val), complex(der))
    return ThetaValue(val, der)


def theta_value(x, tau):
    return theta(x, tau).value


def theta_product(x, tau, nmax: int = 400):
    """Infinite-product form, used only as an independent oracle."""
    t = as_lattice(tau).tau
    x = np.asarray(x, dtype=complex)
    p = np.exp(1j * np.pi * t)
    e = np.exp(2j * np.pi * x)
    out = np.sin(np.pi * x) / np.pi
    # sin(pi(n tau + x)) sin(pi(n tau - x)) / sin(pi n tau)^2 rewritten in p
    # to avoid overflow of the individual sines
    for n in range(1, nmax + 1):
        q = p ** (2 * n)
        term = (1 - q * e) * (1 - q / e) / (1 - q) ** 2
        out = out * term
        if np.all(np.abs(term - 1) < 1e-18):
            break
    return out


def check_pole(th: ThetaValue, what: str = "theta argument"):
    """Raise PoleError when |theta| is negligible against its local scale."""
    val = np.abs(np.asarray(th.value))
    scale = np.maximum(1.0, np.abs(np.asarray(th.derivative)))
    if np.any(val < POLE_TOL * scale):
        raise PoleError(f"{what} lies on a lattice point")


def theta_checked(x, tau, what: str = "theta argument") -> ThetaValue:
    th = theta(x, tau)
    check_pole(th, what)
    return th


def log_derivative(x, tau):
    """rho(x) = theta'(x) / theta(x)."""
    th = theta_checked(x, tau)
    return th.derivative / th.value


def theta_quasiperiod_residual(x, tau):
    lat = as_lattice(tau)
    x = complex(x)
    t0 = theta_value(x, lat)
    r1 = theta_value(x + 1, lat) + t0
    r2 = theta_value(x + lat.tau, lat) + np.exp(-2j * np.pi * x) / lat.nome * t0
    return complex(r1), complex(r2)


def theta_addition_residual(x, y, z, w, tau):
    th = lambda u: theta_value(u, tau)
    lhs = th(x + y) * th(x - y) * th(z + w) * th(z - w)
    rhs = th(x + z) * th(x - z) * th(y + w) * th(y - w) + th(x + w) * th(x - w) * th(z + y) * th(z - y)
    return complex(lhs - rhs)


def theta_addition_scale(x, y, z, w, tau):
    th = lambda u: abs(theta_value(u, tau))
    return max(
        th(x + y) * th(x - y) * th(z + w) * th(z - w),
        th(x + z) * th(x - z) * th(y + w) * th(y - w),
        th(x + w) * th(x - w) * th(z + y) * th(z - y),
    )


def vartheta1_prime0(tau) -> complex:
    """vartheta_1'(0|tau), the normalising constant."""
    return complex(_series_terms(as_lattice(tau).tau)[2])


def vartheta1(z, tau):
    """Unnormalised odd theta function, vartheta_1(z|tau) = pi vartheta_1'(0) theta(z/pi)."""
    t = as_lattice(tau).tau
    return np.pi * vartheta1_prime0(t) * theta_value(np.asarray(z) / np.pi, t)


def jacobi_imaginary_residual(x, tau, normalised: bool = False):
    """Residual of the Jacobi imaginary transformation at z = pi x.

    Default form: vartheta_1(-pi x/tau | -1/tau) - i sqrt(-i tau) e^{i pi x^2/tau}
    vartheta_1(pi x | tau). np.sqrt is the principal branch; the other branch
    flips the sign of the second term. With normalised=True the same identity
    is checked for theta, where the prefactor i sqrt(-i tau) becomes -1/tau
    because theta'(0) = 1 on both lattices.
    """
    t = as_lattice(tau).tau
    x = complex(x)
    gauss = np.exp(1j * np.pi * x * x / t)
    if normalised:
        lhs = theta_value(-x / t, -1 / t)
        rhs = -gauss * theta_value(x, t) / t
    else:
        lhs = vartheta1(-np.pi * x / t, -1 / t)
        rhs = 1j * np.sqrt(-1j * t) * gauss * vartheta1(np.pi * x, t)
    return complex(lhs - rhs)


def jacobi_imaginary_scale(x, tau, normalised: bool = False):
    t = as_lattice(tau).tau
    x = complex(x)
    gauss = abs(np.exp(1j * np.pi * x * x / t))
    if normalised:
        return gauss * abs(theta_value(x, t) / t)
    return gauss * abs(np.sqrt(-1j * t) * vartheta1(np.pi * x, t))


def modular_t_residual(x, tau, normalised: bool = False):
    """vartheta_1(pi x|tau+1) - e^{i pi/4} vartheta_1(pi x|tau); theta itself is T-invariant."""
    t = as_lattice(tau).tau
    x = complex(x)
    if normalised:
        return complex(theta_value(x, t + 1) - theta_value(x, t))
    return complex(vartheta1(np.pi * x, t + 1) - np.exp(1j * np.pi / 4) * vartheta1(np.pi * x, t))


def kronecker_phi(u, v, tau):
    """phi(u, v) = theta(u + v) / (theta(u) theta(v))."""
    tu = theta_checked(u, tau, "kronecker_phi first argument")
    tv = theta_checked(v, tau, "kronecker_phi second argument")
    return theta_value(np.asarray(u) + np.asarray(v), tau) / (tu.value * tv.value)


def kronecker_phi_du(u, v, tau):
    """phi(u, v) and its derivative in u."""
    tu = theta_checked(u, tau, "kronecker_phi first argument")
    tv = theta_checked(v, tau, "kronecker_phi second argument")
    tuv = theta(np.asarray(u) + np.asarray(v), tau)
    val = tuv.value / (tu.value * tv.value)
    der = (tuv.derivative * tu.value - tuv.value * tu.derivative) / (tu.value ** 2 * tv.value)
    return val, der
