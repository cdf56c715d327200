"""Smooth compactly supported model fields: initial-data presets for the
solver and the fixed-seed corpus driving the inequality checks.

Every profile keeps its support inside the half-radius ball of the box so
runs start far from the boundary margin.
"""

from __future__ import annotations

import numpy as np

from .grid import GridFunction, GridSpec, VectorGridFunction

__all__ = [
    "bump",
    "smooth_step_down",
    "gaussian_floor_density",
    "density_bump_factor",
    "shear_velocity",
    "initial_data",
    "PERTURBATION_PRESETS",
    "corpus",
    "corpus_velocity_fields",
]


def bump(spec: GridSpec, center, radius: float, amplitude: float = 1.0) -> GridFunction:
    """exp(-1/(1-(r/R)^2)) inside r < R, identically zero outside."""
    r = spec.radius(tuple(center)) / radius
    vals = np.zeros(spec.shape)
    inside = r < 1.0
    vals[inside] = amplitude * np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return GridFunction(spec, vals)


def _transition(t: np.ndarray) -> np.ndarray:
    # C-infinity ramp: 0 for t <= 0, 1 for t >= 1
    out = np.zeros_like(t)
    pos = t > 0.0
    out[pos] = np.exp(-1.0 / t[pos])
    den = out + np.where(1.0 - t > 0.0, np.exp(-1.0 / np.clip(1.0 - t, 1e-300, None)), 0.0)
    return np.divide(out, den, out=np.zeros_like(out), where=den > 0.0)


def smooth_step_down(r: np.ndarray, r_start: float, r_stop: float) -> np.ndarray:
    """1 for r <= r_start, 0 for r >= r_stop, C-infinity in between."""
    if not r_stop > r_start:
        raise ValueError("need r_stop > r_start")
    return 1.0 - _transition((r - r_start) / (r_stop - r_start))


def gaussian_floor_density(
    spec: GridSpec,
    amplitude: float = 0.03,
    sigma_frac: float = 0.21875,
    floor_frac: float = 1e-3,
) -> GridFunction:
    """Gaussian core plus a small positive floor, cut off smoothly so the
    support fills exactly the half-radius ball of the box.

    The default width and amplitude are tuned for the shipped scenarios:
    wide enough to be cell-resolved and mild enough in sound speed that
    the flux dissipation keeps the total-energy drift of a reference run
    within its budget at the shipped resolutions.
    """
    L = spec.half_width
    r = spec.radius()
    core = amplitude * np.exp(-(r**2) / (2.0 * (sigma_frac * L) ** 2))
    cutoff = smooth_step_down(r, 0.35 * L, 0.5 * L)
    return GridFunction(spec, (core + floor_frac * amplitude) * cutoff)


def density_bump_factor(spec: GridSpec, delta: float) -> np.ndarray:
    """Multiplicative perturbation 1 + delta*chi with an off-center bump."""
    L = spec.half_width
    chi = bump(spec, (0.1 * L,) + (0.0,) * (spec.d - 1), 0.15 * L)
    return 1.0 + delta * chi.values


def shear_velocity(spec: GridSpec, delta: float) -> np.ndarray:
    """Localized shear: x1-directed velocity varying oddly in x2.

    Odd transverse profile adds no net momentum and no net mass flux.
    """
    if spec.d < 2:
        raise ValueError("a shear needs at least two dimensions")
    L = spec.half_width
    radius = 0.3 * L
    envelope = bump(spec, (0.0,) * spec.d, radius).values
    x2 = spec.meshgrid()[1]
    out = np.zeros((spec.d,) + spec.shape)
    out[0] = delta * (x2 / radius) * envelope
    return out


PERTURBATION_PRESETS = ("gaussian", "gaussian-bump", "gaussian-shear", "gaussian-coarsen")


def initial_data(
    spec: GridSpec, preset: str, delta: float = 0.0
) -> tuple[GridFunction, VectorGridFunction]:
    """(density, momentum) for a named preset.

    `gaussian` is the smooth positive reference blob at rest. The
    `gaussian-*` variants start from the same data and apply one
    perturbation family: a multiplicative density bump, a localized
    velocity shear, or plain re-evaluation on the (coarser) target grid.
    """
    if preset not in PERTURBATION_PRESETS:
        raise ValueError(
            f"unknown preset {preset!r}; expected one of {PERTURBATION_PRESETS}"
        )
    rho = gaussian_floor_density(spec)
    velocity = np.zeros((spec.d,) + spec.shape)
    if preset == "gaussian-bump":
        rho = GridFunction(spec, rho.values * density_bump_factor(spec, delta))
    elif preset == "gaussian-shear":
        velocity = velocity + shear_velocity(spec, delta)
    m = VectorGridFunction(spec, rho.values * velocity)
    return rho, m


def _random_center(rng: np.random.Generator, spec: GridSpec, reach: float):
    return tuple(rng.uniform(-reach, reach, size=spec.d) * spec.half_width)


def corpus(spec: GridSpec, seed: int, count: int = 50) -> list[tuple[str, GridFunction]]:
    """Fixed-seed family of smooth compact profiles: radial bumps,
    anisotropic bumps, two-bump superpositions, and two-scale dilate pairs.

    Dilate pairs are adjacent entries named `...-wide` / `...-half`, the
    second being the analytic dilation f(2x) of the first.
    """
    rng = np.random.default_rng(seed)
    L = spec.half_width
    out: list[tuple[str, GridFunction]] = []
    kinds = ("radial", "aniso", "two-bump", "dilate")
    i = 0
    while len(out) < count:
        kind = kinds[i % len(kinds)]
        i += 1
        if kind == "radial":
            f = bump(
                spec,
                _random_center(rng, spec, 0.1),
                rng.uniform(0.2, 0.45) * L,
                rng.uniform(0.5, 2.0),
            )
            out.append((f"radial-{i}", f))
        elif kind == "aniso":
            center = _random_center(rng, spec, 0.1)
            radii = rng.uniform(0.15, 0.45, size=spec.d) * L
            amp = rng.uniform(0.5, 2.0)
            mesh = spec.meshgrid()
            q = sum(((g - c) / r) ** 2 for g, c, r in zip(mesh, center, radii))
            vals = np.zeros(spec.shape)
            inside = q < 1.0
            vals[inside] = amp * np.exp(-1.0 / (1.0 - q[inside]))
            out.append((f"aniso-{i}", GridFunction(spec, vals)))
        elif kind == "two-bump":
            a = bump(spec, _random_center(rng, spec, 0.2), rng.uniform(0.1, 0.25) * L,
                     rng.uniform(0.5, 1.5))
            b = bump(spec, _random_center(rng, spec, 0.2), rng.uniform(0.1, 0.25) * L,
                     rng.uniform(0.5, 1.5))
            out.append((f"two-bump-{i}", a + b))
        else:
            center = (0.0,) * spec.d
            radius = rng.uniform(0.3, 0.45) * L
            amp = rng.uniform(0.5, 2.0)
            wide = bump(spec, center, radius, amp)
            half = bump(spec, center, radius / 2.0, amp)
            out.append((f"dilate-{i}-wide", wide))
            if len(out) < count:
                out.append((f"dilate-{i}-half", half))
    return out


def corpus_velocity_fields(
    spec: GridSpec, seed: int, count: int = 8
) -> list[tuple[str, VectorGridFunction]]:
    """Smooth compact vector fields with decay inside the box."""
    rng = np.random.default_rng(seed)
    L = spec.half_width
    out = []
    for i in range(count):
        comps = []
        for _ in range(spec.d):
            env = bump(
                spec,
                _random_center(rng, spec, 0.15),
                rng.uniform(0.25, 0.45) * L,
                rng.uniform(-1.0, 1.0),
            )
            comps.append(env.values)
        out.append((f"ubar-{i}", VectorGridFunction(spec, np.stack(comps))))
    return out
