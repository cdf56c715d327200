"""Riesz potentials I_alpha f = |x|^(alpha-d) * f and the induced electrostatics.

Two evaluation paths are provided: a direct quadrature oracle (quadratic cost,
small grids only) and a fast free-space convolution that zero-pads the data to
twice the grid per axis, so the long-range kernel is never aliased
periodically. Both paths share the same discrete kernel, whose origin cell
carries the exact cell average of the singularity.
"""

from __future__ import annotations

import math
import os
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import integrate as _quad
from scipy.spatial.distance import cdist

from .grid import GridFunction, GridSpec, VectorGridFunction

# Direct-path pairwise matrix is O(size^2); 16^3 cells keeps it in seconds.
DIRECT_SIZE_CAP = 16**3


def fft_workers() -> int:
    """Worker count for the FFT backend; RIESZ_EP_THREADS caps it (0 = auto)."""
    raw = os.environ.get("RIESZ_EP_THREADS", "0")
    try:
        v = int(raw)
    except ValueError:
        v = 0
    return v if v > 0 else (os.cpu_count() or 1)


def ball_volume(d: int) -> float:
    """Lebesgue measure of the unit ball in R^d."""
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def poisson_normalization(d: int) -> float:
    """c(d) = d(d-2)*vol(B_1), the constant making (1/c(d)) I_2 rho solve
    -lap(phi) = rho. Equals 4*pi in d = 3. Defined for d >= 3."""
    if d < 3:
        raise ValueError(f"poisson normalization needs d >= 3, got d={d}")
    return d * (d - 2) * ball_volume(d)


@dataclass(frozen=True)
class RieszKernel:
    """Kernel |x|^(alpha-d) of the Riesz potential of degree alpha."""

    d: int
    alpha: float
    c_d: float | None = field(default=None)

    def __post_init__(self):
        if not 0.0 < self.alpha < self.d:
            raise ValueError(
                f"Riesz degree must satisfy 0 < alpha < d, got alpha={self.alpha}, d={self.d}"
            )
        if self.c_d is None and self.d >= 3:
            object.__setattr__(self, "c_d", poisson_normalization(self.d))


@lru_cache(maxsize=64)
def singular_cell_constant(d: int, alpha: float) -> float:
    """Integral of |y|^(alpha-d) over the unit cube [-1/2, 1/2]^d.

    The cell average of the kernel over the origin cell of a grid with spacing
    h is then h^(alpha-d) times this constant (the integral is homogeneous).

    Computed in polar form: the cube integral equals
    (1/alpha) * int_{S^(d-1)} R(w)^alpha dw with R(w) = 1/(2 max|w_i|), and
    parametrizing each of the 2d faces reduces it to a smooth integral over
    [-1, 1]^(d-1). This removes the singularity exactly; adaptive quadrature
    then converges to near machine precision.
    """
    if not 0.0 < alpha < d:
        raise ValueError(f"need 0 < alpha < d, got alpha={alpha}, d={d}")
    ex = (alpha - d) / 2.0
    if d == 1:
        smooth = 1.0
    elif d == 2:
        smooth, _ = _quad.quad(
            lambda y: (1.0 + y * y) ** ex, -1, 1, epsabs=1e-13, epsrel=1e-13
        )
    elif d == 3:
        smooth, _ = _quad.dblquad(
            lambda y2, y1: (1.0 + y1 * y1 + y2 * y2) ** ex,
            -1, 1, -1, 1, epsabs=1e-12, epsrel=1e-12,
        )
    else:
        smooth, _ = _quad.nquad(
            lambda *y: (1.0 + sum(t * t for t in y)) ** ex,
            [(-1, 1)] * (d - 1),
            opts={"epsabs": 1e-10, "epsrel": 1e-10},
        )
    return 2.0 * d / (alpha * 2.0**alpha) * smooth


def _doubled_axis_offsets(n: int) -> np.ndarray:
    # index k on the doubled grid encodes offset k for k <= n, k-2n beyond;
    # only |offset| <= n-1 is ever touched by the truncated convolution.
    o = np.arange(2 * n)
    o[o > n] -= 2 * n
    return o


def _zero_unpaired_planes(samples: np.ndarray, n: int) -> None:
    # offset +n has no -n partner on the doubled grid and is never used by
    # box outputs; zeroing it keeps every kernel exactly even/odd per axis
    d = samples.ndim
    for ax in range(d):
        samples[tuple(n if a == ax else slice(None) for a in range(d))] = 0.0


def riesz_kernel_samples(spec: GridSpec, alpha: float) -> np.ndarray:
    """Kernel |x|^(alpha-d) sampled at all offsets of the doubled grid,
    with the origin cell replaced by its exact cell average."""
    o = _doubled_axis_offsets(spec.n) * spec.h
    grids = np.meshgrid(*([o] * spec.d), indexing="ij", sparse=True)
    r2 = sum(g * g for g in grids)
    with np.errstate(divide="ignore"):
        k = r2 ** ((alpha - spec.d) / 2.0)
    k[(0,) * spec.d] = singular_cell_constant(spec.d, alpha) * spec.h ** (
        alpha - spec.d
    )
    _zero_unpaired_planes(k, spec.n)
    return k


def field_kernel_samples(spec: GridSpec) -> np.ndarray:
    """Components (2-d) x_k / (c(d)|x|^d) of the potential-gradient kernel,
    stacked along axis 0. Origin cell = 0 by odd symmetry."""
    d = spec.d
    scale = (2.0 - d) / poisson_normalization(d)
    o = _doubled_axis_offsets(spec.n) * spec.h
    grids = np.meshgrid(*([o] * d), indexing="ij", sparse=True)
    r2 = sum(g * g for g in grids)
    origin = (0,) * d
    r2[origin] = 1.0  # placeholder; the odd kernel vanishes there anyway
    rad = r2 ** (-d / 2.0)
    out = np.empty((d,) + (2 * spec.n,) * d)
    for k in range(d):
        out[k] = scale * grids[k] * rad
        out[k][origin] = 0.0
        _zero_unpaired_planes(out[k], spec.n)
    return out


class KernelTable:
    """Transformed kernel on the doubled grid, ready for fast application.

    Immutable after construction and shared across operator applications.
    `origin_value` records the singular-cell correction actually used.
    """

    __slots__ = ("spec", "alpha", "kind", "khat", "origin_value")

    def __init__(self, spec: GridSpec, alpha: float | None, kind: str):
        if kind not in ("riesz", "field"):
            raise ValueError(f"unknown kernel table kind {kind!r}")
        self.spec = spec
        self.alpha = alpha
        self.kind = kind
        m = (2 * spec.n,) * spec.d
        w = fft_workers()
        if kind == "riesz":
            if alpha is None or not 0.0 < alpha < spec.d:
                raise ValueError(
                    f"Riesz degree must satisfy 0 < alpha < d, got {alpha}"
                )
            samples = riesz_kernel_samples(spec, alpha)
            self.origin_value = float(samples[(0,) * spec.d])
            self.khat = sfft.rfftn(samples, s=m, workers=w)
        else:
            samples = field_kernel_samples(spec)
            self.origin_value = 0.0
            self.khat = np.stack(
                [sfft.rfftn(samples[k], s=m, workers=w) for k in range(spec.d)]
            )


_TABLE_CACHE: OrderedDict = OrderedDict()
_TABLE_CACHE_MAX = 12


def get_kernel_table(spec: GridSpec, alpha: float | None, kind: str) -> KernelTable:
    key = (spec.d, spec.n, spec.half_width, alpha, kind)
    if key in _TABLE_CACHE:
        _TABLE_CACHE.move_to_end(key)
        return _TABLE_CACHE[key]
    table = KernelTable(spec, alpha, kind)
    _TABLE_CACHE[key] = table
    while len(_TABLE_CACHE) > _TABLE_CACHE_MAX:
        _TABLE_CACHE.popitem(last=False)
    return table


def _convolve(values: np.ndarray, khat: np.ndarray, spec: GridSpec) -> np.ndarray:
    m = (2 * spec.n,) * spec.d
    w = fft_workers()
    fhat = sfft.rfftn(values, s=m, workers=w)
    out = sfft.irfftn(fhat * khat, s=m, workers=w)
    return out[tuple(slice(0, spec.n) for _ in range(spec.d))] * spec.cell_volume


def riesz_apply_fast(f: GridFunction, alpha: float) -> GridFunction:
    """I_alpha f by zero-padded (free-space) FFT convolution.

    Zero-padding the data to 2n per axis makes the circular convolution agree
    exactly with the aperiodic sum on the original cells, so this matches
    riesz_apply_direct to rounding error.
    """
    table = get_kernel_table(f.spec, float(alpha), "riesz")
    return GridFunction(f.spec, _convolve(f.values, table.khat, f.spec))


@lru_cache(maxsize=2)
def _direct_matrix(d: int, n: int, half_width: float, alpha: float) -> np.ndarray:
    spec = GridSpec(d, n, half_width)
    ax = spec.axis()
    centers = np.stack(
        [g.ravel() for g in np.meshgrid(*([ax] * d), indexing="ij")], axis=1
    )
    r2 = cdist(centers, centers, "sqeuclidean")
    with np.errstate(divide="ignore"):
        r2 **= (alpha - d) / 2.0
    np.fill_diagonal(r2, singular_cell_constant(d, alpha) * spec.h ** (alpha - d))
    return r2


def riesz_apply_direct(f: GridFunction, alpha: float) -> GridFunction:
    """I_alpha f by explicit pairwise summation; the fast path's oracle.

    Cost is quadratic in the cell count, so the grid is hard-capped at
    16^3 = 4096 cells.
    """
    spec = f.spec
    alpha = float(alpha)
    if not 0.0 < alpha < spec.d:
        raise ValueError(
            f"Riesz degree must satisfy 0 < alpha < d, got alpha={alpha}, d={spec.d}"
        )
    if spec.size > DIRECT_SIZE_CAP:
        raise ValueError(
            f"direct path is capped at {DIRECT_SIZE_CAP} cells (16^3); "
            f"got n^d = {spec.size}. Use riesz_apply_fast instead."
        )
    k = _direct_matrix(spec.d, spec.n, spec.half_width, alpha)
    out = (k @ f.values.ravel()) * spec.cell_volume
    return GridFunction(spec, out.reshape(spec.shape))


def _check_density(rho: GridFunction) -> np.ndarray:
    peak = float(np.max(rho.values, initial=0.0))
    tol = 1e-12 * max(peak, 0.0)
    low = float(np.min(rho.values))
    if low < -tol:
        raise ValueError(
            f"density must be nonnegative: min value {low} below -1e-12*max"
        )
    return np.maximum(rho.values, 0.0) if low < 0.0 else rho.values


def electric_potential(rho: GridFunction) -> GridFunction:
    """phi = (1/c(d)) I_2 rho, the repulsive-coupling potential: -lap(phi) = rho."""
    spec = rho.spec
    if spec.d < 3:
        raise ValueError(f"electric potential needs d >= 3, got d={spec.d}")
    values = _check_density(rho)
    table = get_kernel_table(spec, 2.0, "riesz")
    out = _convolve(values, table.khat, spec) / poisson_normalization(spec.d)
    return GridFunction(spec, out)


def electric_field(rho: GridFunction) -> VectorGridFunction:
    """grad(phi) through its own convolution kernel (2-d) x /(c(d)|x|^d).

    This is the canonical field path (the solver's momentum source is
    -rho * electric_field(rho)); differentiating the potential on the grid is
    only a cross-check.
    """
    spec = rho.spec
    if spec.d < 3:
        raise ValueError(f"electric field needs d >= 3, got d={spec.d}")
    values = _check_density(rho)
    table = get_kernel_table(spec, None, "field")
    m = (2 * spec.n,) * spec.d
    w = fft_workers()
    fhat = sfft.rfftn(values, s=m, workers=w)
    sl = tuple(slice(0, spec.n) for _ in range(spec.d))
    comps = np.empty((spec.d,) + spec.shape)
    for k in range(spec.d):
        comps[k] = sfft.irfftn(fhat * table.khat[k], s=m, workers=w)[sl]
    return VectorGridFunction(spec, comps * spec.cell_volume)


def hls_exponents(d: int, alpha: float, p: float) -> float:
    """Target exponent dp/(d - alpha p) of the potential-to-Lebesgue bound.

    Valid only on the open window 1 < p < d/alpha.
    """
    if not 0.0 < alpha < d:
        raise ValueError(f"need 0 < alpha < d, got alpha={alpha}, d={d}")
    if not 1.0 < p < d / alpha:
        raise ValueError(
            f"exponent hypothesis violated: need 1 < p < d/alpha = {d / alpha}, got p={p}"
        )
    return d * p / (d - alpha * p)
