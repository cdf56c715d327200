"""Gamma-law gas thermodynamics.

Pressure p(rho) = rho**gamma, internal energy h(rho) = rho**gamma/(gamma-1),
their derivatives, and the Bregman-style relative quantities h(rho|rho_bar),
p(rho|rho_bar) used by the relative-energy machinery.

All operations are stateless and act elementwise on scalars or arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GasLaw",
    "weak_exponent_floor",
    "pressure",
    "pressure_prime",
    "internal_energy",
    "h_prime",
    "h_double_prime",
    "sound_speed",
    "h_relative",
    "p_relative",
]


@dataclass(frozen=True)
class GasLaw:
    """Adiabatic exponent of the gamma-law gas, gamma > 1."""

    gamma: float = 2.0

    def __post_init__(self) -> None:
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")


def weak_exponent_floor(d: int) -> float:
    """Smallest adiabatic exponent admitted for weak states in dimension d."""
    return 2.0 * d / (d + 1.0)


def _check_nonnegative(rho: np.ndarray, what: str = "density") -> None:
    if np.min(rho) < 0.0:
        raise ValueError(f"{what} must be nonnegative, min = {np.min(rho)}")


def _real_power(base: np.ndarray, exponent: float) -> np.ndarray:
    # exp(e*log(x)) with the exact-zero branch; x = 0 is only admissible for
    # e > 0 (value 0) or e == 0 (value 1, matching the continuous limit)
    out = np.zeros_like(base)
    if exponent == 0.0:
        out[...] = 1.0
        return out
    pos = base > 0.0
    if exponent < 0.0 and not np.all(pos):
        raise ValueError("zero density with a negative power exponent")
    out[pos] = np.exp(exponent * np.log(base[pos]))
    return out


def _elementwise(func):
    """Normalize scalar/array input, validate sign, return matching kind."""

    def wrapped(rho, law: GasLaw):
        arr = np.asarray(rho, dtype=float)
        _check_nonnegative(arr)
        out = func(arr, law)
        return float(out) if arr.ndim == 0 else out

    wrapped.__name__ = func.__name__
    wrapped.__doc__ = func.__doc__
    return wrapped


@_elementwise
def pressure(rho, law):
    """p(rho) = rho**gamma."""
    return _real_power(rho, law.gamma)


@_elementwise
def pressure_prime(rho, law):
    """p'(rho) = gamma * rho**(gamma-1)."""
    return law.gamma * _real_power(rho, law.gamma - 1.0)


@_elementwise
def internal_energy(rho, law):
    """h(rho) = rho**gamma / (gamma-1)."""
    return _real_power(rho, law.gamma) / (law.gamma - 1.0)


@_elementwise
def h_prime(rho, law):
    """h'(rho) = gamma * rho**(gamma-1) / (gamma-1); h'(0) = 0 for gamma > 1."""
    return law.gamma / (law.gamma - 1.0) * _real_power(rho, law.gamma - 1.0)


@_elementwise
def h_double_prime(rho, law):
    """h''(rho) = gamma * rho**(gamma-2); requires rho > 0 when gamma < 2."""
    return law.gamma * _real_power(rho, law.gamma - 2.0)


@_elementwise
def sound_speed(rho, law):
    """Acoustic speed sqrt(p'(rho)) = sqrt(gamma) * rho**((gamma-1)/2)."""
    return np.sqrt(law.gamma) * _real_power(rho, 0.5 * (law.gamma - 1.0))


def _relative(f, f_prime, rho, rho_bar, law: GasLaw):
    arr = np.asarray(rho, dtype=float)
    bar = np.asarray(rho_bar, dtype=float)
    _check_nonnegative(arr)
    if np.min(bar) <= 0.0:
        raise ValueError(f"reference density must be positive, min = {np.min(bar)}")
    out = f(arr, law) - f(bar, law) - f_prime(bar, law) * (arr - bar)
    return float(out) if np.ndim(out) == 0 else out


def h_relative(rho, rho_bar, law: GasLaw):
    """Bregman gap h(rho) - h(rho_bar) - h'(rho_bar)(rho - rho_bar), >= 0."""
    return _relative(internal_energy, h_prime, rho, rho_bar, law)


def p_relative(rho, rho_bar, law: GasLaw):
    """Bregman gap of the pressure; equals (gamma-1) * h_relative for gamma-law."""
    return _relative(pressure, pressure_prime, rho, rho_bar, law)
