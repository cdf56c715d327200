"""Uniform cell-centered grids on the box [-L, L]^d and discrete calculus on them.

Functions are represented by their values at cell centers; all integrals use the
midpoint rule, which keeps Hoelder's inequality exact in the discrete norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRID_FILE_HEADER = b"RIESZ-EP GRID v1"


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a uniform cell-centered grid on [-L, L]^d.

    Parameters
    ----------
    d : int
        Spatial dimension, >= 1.
    n : int
        Cells per axis, >= 4. Powers of two keep the doubled-grid transforms
        used by the convolution operators fast, but any n works.
    half_width : float
        Box half-width L > 0; the domain is the cube [-L, L]^d.
    """

    d: int
    n: int
    half_width: float

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got d={self.d}")
        if self.n < 4:
            raise ValueError(f"need at least 4 cells per axis, got n={self.n}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def h(self) -> float:
        """Cell size 2L/n."""
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def axis(self) -> np.ndarray:
        """Cell-center coordinates along one axis: x_i = -L + (i + 1/2) h."""
        return -self.half_width + (np.arange(self.n) + 0.5) * self.h

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        """Broadcastable (sparse) coordinate arrays, one per axis."""
        return np.meshgrid(*([self.axis()] * self.d), indexing="ij", sparse=True)

    def radius(self, center: tuple[float, ...] | None = None) -> np.ndarray:
        """Distance from `center` (default: origin) at every cell center."""
        if center is None:
            center = (0.0,) * self.d
        coords = self.meshgrid()
        r2 = sum((c - x0) ** 2 for c, x0 in zip(coords, center))
        return np.sqrt(r2)


class GridFunction:
    """A scalar field sampled at the cell centers of a GridSpec."""

    __slots__ = ("spec", "values")

    def __init__(self, spec: GridSpec, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != spec.shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid shape {spec.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function contains non-finite values")
        self.spec = spec
        self.values = values

    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridFunction":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def full(cls, spec: GridSpec, value: float) -> "GridFunction":
        return cls(spec, np.full(spec.shape, float(value)))

    @classmethod
    def from_callable(cls, spec: GridSpec, fn) -> "GridFunction":
        """Sample fn(*coords) at cell centers; fn must broadcast over arrays."""
        out = np.broadcast_to(fn(*spec.meshgrid()), spec.shape)
        return cls(spec, np.array(out, dtype=np.float64))

    def copy(self) -> "GridFunction":
        return GridFunction(self.spec, self.values.copy())

    def __add__(self, other):
        return GridFunction(self.spec, self.values + _raw(other))

    def __sub__(self, other):
        return GridFunction(self.spec, self.values - _raw(other))

    def __mul__(self, other):
        return GridFunction(self.spec, self.values * _raw(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.spec, -self.values)


class VectorGridFunction:
    """A d-component vector field; all components share one GridSpec.

    Components are stored stacked in a single (d, n, ..., n) array.
    """

    __slots__ = ("spec", "values")

    def __init__(self, spec: GridSpec, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (spec.d,) + spec.shape:
            raise ValueError(
                f"vector values shape {values.shape}, expected {(spec.d,) + spec.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("vector grid function contains non-finite values")
        self.spec = spec
        self.values = values

    @classmethod
    def zeros(cls, spec: GridSpec) -> "VectorGridFunction":
        return cls(spec, np.zeros((spec.d,) + spec.shape))

    @classmethod
    def from_components(cls, components) -> "VectorGridFunction":
        comps = list(components)
        spec = comps[0].spec
        if any(c.spec != spec for c in comps) or len(comps) != spec.d:
            raise ValueError("need exactly d components on one shared grid")
        return cls(spec, np.stack([c.values for c in comps]))

    def component(self, k: int) -> GridFunction:
        return GridFunction(self.spec, self.values[k])

    def magnitude(self) -> GridFunction:
        return GridFunction(self.spec, np.sqrt(np.sum(self.values**2, axis=0)))

    def __add__(self, other):
        return VectorGridFunction(self.spec, self.values + _raw(other))

    def __sub__(self, other):
        return VectorGridFunction(self.spec, self.values - _raw(other))

    def __mul__(self, other):
        return VectorGridFunction(self.spec, self.values * _raw(other))

    __rmul__ = __mul__


def _raw(x):
    if isinstance(x, (GridFunction, VectorGridFunction)):
        return x.values
    return x


def lp_norm(f: GridFunction, p) -> float:
    """Discrete L^p norm with midpoint quadrature.

    Parameters
    ----------
    f : GridFunction
    p : float or math.inf
        Exponent, >= 1. For finite p returns (sum |f|^p h^d)^(1/p); for inf
        returns the grid max of |f| (no interpolation).
    """
    if p == math.inf or p == np.inf:
        return float(np.max(np.abs(f.values))) if f.values.size else 0.0
    p = float(p)
    if p < 1.0:
        raise ValueError(f"invalid exponent p={p}; need p >= 1 or inf")
    a = np.abs(f.values)
    if p == 1.0:
        return float(np.sum(a) * f.spec.cell_volume)
    if p == 2.0:
        return float(math.sqrt(np.sum(a * a) * f.spec.cell_volume))
    return float((np.sum(a**p) * f.spec.cell_volume) ** (1.0 / p))


def integrate(f: GridFunction) -> float:
    """Signed midpoint-rule integral: sum(f) * h^d."""
    return float(np.sum(f.values) * f.spec.cell_volume)


def _diff_axis(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order first derivative along one axis.

    Centered in the interior, one-sided second order at the two box faces.
    Written in pure difference form so constants differentiate to exactly 0.
    """
    f = np.moveaxis(values, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (4.0 * (f[1] - f[0]) - (f[2] - f[0])) / (2.0 * h)
    out[-1] = (-4.0 * (f[-2] - f[-1]) + (f[-3] - f[-1])) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def gradient(f: GridFunction) -> VectorGridFunction:
    """Second-order centered differences, one-sided (second order) at box faces.

    Intended for smooth, compactly supported data; every shipped scenario keeps
    the support away from the faces, so the boundary stencil never matters.
    """
    h = f.spec.h
    comps = [_diff_axis(f.values, h, k) for k in range(f.spec.d)]
    return VectorGridFunction(f.spec, np.stack(comps))


def divergence(v: VectorGridFunction) -> GridFunction:
    """Component-summed second-order differences (same stencils as gradient)."""
    h = v.spec.h
    out = np.zeros(v.spec.shape)
    for k in range(v.spec.d):
        out += _diff_axis(v.values[k], h, k)
    return GridFunction(v.spec, out)


def _overlap_matrix(n_src: int, n_tgt: int, half_width: float) -> np.ndarray:
    """Row-stochastic-in-measure cell overlap weights along one axis.

    W[i, j] = |target cell i  intersect  source cell j| / h_target, so the
    remap preserves the integral exactly for any resolution ratio and
    reduces to plain injection when the grids nest.
    """
    hs = 2.0 * half_width / n_src
    ht = 2.0 * half_width / n_tgt
    es = -half_width + hs * np.arange(n_src + 1)
    et = -half_width + ht * np.arange(n_tgt + 1)
    lo = np.maximum.outer(et[:-1], es[:-1])
    hi = np.minimum.outer(et[1:], es[1:])
    return np.clip(hi - lo, 0.0, None) / ht


def resample_conservative(f: GridFunction, target: GridSpec) -> GridFunction:
    """Remap onto another grid of the same box by exact cell-overlap averaging."""
    src = f.spec
    if target.d != src.d or target.half_width != src.half_width:
        raise ValueError("resampling requires the same box and dimension")
    if target == src:
        return f.copy()
    w = _overlap_matrix(src.n, target.n, src.half_width)
    vals = f.values
    for axis in range(src.d):
        vals = np.moveaxis(np.tensordot(w, vals, axes=(1, axis)), 0, axis)
    return GridFunction(target, vals)


def write_grid(f: GridFunction, path) -> None:
    """Write a GridFunction in the `RIESZ-EP GRID v1` binary format.

    Layout: header line, one ASCII line `d n L`, a single newline terminating
    it, then n^d little-endian float64 values in row-major order. The
    half-width is written with repr so the round-trip is bit-exact.
    """
    spec = f.spec
    with open(path, "wb") as fh:
        fh.write(GRID_FILE_HEADER + b"\n")
        fh.write(f"{spec.d} {spec.n} {spec.half_width!r}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_grid(path) -> GridFunction:
    """Read a GridFunction written by write_grid. Bit-exact round-trip."""
    with open(path, "rb") as fh:
        header = fh.readline().rstrip(b"\n")
        if header != GRID_FILE_HEADER:
            raise ValueError(f"not a grid file: bad header {header!r}")
        fields = fh.readline().split()
        if len(fields) != 3:
            raise ValueError("malformed grid file: expected ASCII line 'd n L'")
        d, n, half_width = int(fields[0]), int(fields[1]), float(fields[2])
        spec = GridSpec(d=d, n=n, half_width=half_width)
        raw = fh.read(8 * spec.size)
        if len(raw) != 8 * spec.size:
            raise ValueError(
                f"truncated grid file: expected {spec.size} values, "
                f"got {len(raw) // 8}"
            )
        values = np.frombuffer(raw, dtype="<f8").reshape(spec.shape)
    return GridFunction(spec, values.copy())
