import math

import numpy as np
import pytest

from riesz_ep.grid import GridFunction, GridSpec, gradient, integrate, lp_norm
from riesz_ep.riesz import (
    RieszKernel,
    ball_volume,
    electric_field,
    electric_potential,
    hls_exponents,
    poisson_normalization,
    riesz_apply_direct,
    riesz_apply_fast,
    riesz_kernel_samples,
    singular_cell_constant,
)


def compact_bump(spec, center, radius, amplitude=1.0):
    """Smooth compactly supported bump exp(-1/(1-(r/R)^2)) inside r < R."""
    r = spec.radius(center) / radius
    vals = np.zeros(spec.shape)
    inside = r < 1.0
    vals[inside] = amplitude * np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return GridFunction(spec, vals)


def random_compact_density(spec, rng):
    center = tuple(rng.uniform(-0.15, 0.15, size=spec.d) * spec.half_width)
    radius = rng.uniform(0.2, 0.3) * spec.half_width
    return compact_bump(spec, center, radius, amplitude=rng.uniform(0.5, 2.0))


class TestNormalization:
    def test_ball_volume(self):
        np.testing.assert_allclose(ball_volume(3), 4.0 * math.pi / 3.0, rtol=1e-14)
        np.testing.assert_allclose(ball_volume(2), math.pi, rtol=1e-14)

    def test_poisson_constant_d3_is_4pi(self):
        np.testing.assert_allclose(poisson_normalization(3), 4.0 * math.pi, rtol=1e-14)

    def test_poisson_constant_rejects_low_dimension(self):
        with pytest.raises(ValueError):
            poisson_normalization(2)

    def test_kernel_degree_window(self):
        RieszKernel(d=3, alpha=1.0)  # fine
        with pytest.raises(ValueError):
            RieszKernel(d=3, alpha=3.0)
        with pytest.raises(ValueError):
            RieszKernel(d=3, alpha=0.0)

    def test_kernel_carries_c_d(self):
        k = RieszKernel(d=3, alpha=2.0)
        np.testing.assert_allclose(k.c_d, 4.0 * math.pi, rtol=1e-14)


class TestSingularCellConstant:
    # Frozen values computed by the polar-form quadrature and independently
    # cross-checked against a midpoint refinement with analytic ball part.
    def test_frozen_values_d3(self):
        np.testing.assert_allclose(singular_cell_constant(3, 1.0), 7.674124222444, rtol=1e-8)
        np.testing.assert_allclose(singular_cell_constant(3, 2.0), 2.380077363980, rtol=1e-8)

    def test_alpha_to_d_limit_is_cube_volume(self):
        np.testing.assert_allclose(singular_cell_constant(3, 2.999999), 1.0, rtol=1e-4)

    def test_brute_force_cross_check(self):
        # analytic ball part + midpoint on the corner remainder, alpha = 1.5
        alpha, n = 1.5, 160
        ball = 4.0 * math.pi * 0.5**alpha / alpha
        h = 1.0 / n
        ax = -0.5 + (np.arange(n) + 0.5) * h
        yy, zz = np.meshgrid(ax, ax, indexing="ij")
        plane = yy**2 + zz**2
        tot = 0.0
        for x in ax:
            r = np.sqrt(x * x + plane)
            tot += np.where(r > 0.5, r ** (alpha - 3.0), 0.0).sum()
        brute = ball + tot * h**3
        np.testing.assert_allclose(singular_cell_constant(3, alpha), brute, rtol=2e-3)

    def test_kernel_table_origin_uses_cell_average(self):
        spec = GridSpec(d=3, n=8, half_width=1.0)
        samples = riesz_kernel_samples(spec, 2.0)
        expected = singular_cell_constant(3, 2.0) * spec.h ** (2.0 - 3.0)
        np.testing.assert_allclose(samples[0, 0, 0], expected, rtol=1e-13)

    def test_kernel_table_radially_symmetric(self):
        spec = GridSpec(d=3, n=6, half_width=1.0)
        s = riesz_kernel_samples(spec, 1.0)
        np.testing.assert_allclose(s[1, 2, 3], s[3, 2, 1], rtol=1e-13)
        np.testing.assert_allclose(s[1, 2, 3], s[-1, -2, -3], rtol=1e-13)


class TestDirect:
    def test_zero_maps_to_zero(self):
        spec = GridSpec(d=3, n=8, half_width=1.0)
        out = riesz_apply_direct(GridFunction.zeros(spec), 2.0)
        assert np.all(out.values == 0.0)

    def test_ball_center_value(self):
        # alpha=2, d=3: int_{B_R} |y|^-1 dy = 2 pi R^2 = pi/2, within 3% at n=16
        spec = GridSpec(d=3, n=16, half_width=1.0)
        r = spec.radius()
        f = GridFunction(spec, (r <= 0.5).astype(float))
        out = riesz_apply_direct(f, 2.0)
        center = (spec.n // 2,) * 3  # cell nearest the origin
        exact = math.pi / 2.0
        assert abs(out.values[center] - exact) / exact < 0.03

    def test_linearity(self):
        rng = np.random.default_rng(5)
        spec = GridSpec(d=3, n=8, half_width=1.0)
        f = random_compact_density(spec, rng)
        g = random_compact_density(spec, rng)
        both = riesz_apply_direct(f + g, 1.0)
        sep = riesz_apply_direct(f, 1.0) + riesz_apply_direct(g, 1.0)
        np.testing.assert_allclose(both.values, sep.values, rtol=1e-12, atol=1e-13)

    def test_size_cap(self):
        spec = GridSpec(d=3, n=32, half_width=1.0)
        with pytest.raises(ValueError, match="capped"):
            riesz_apply_direct(GridFunction.zeros(spec), 2.0)

    def test_degree_window(self):
        spec = GridSpec(d=3, n=8, half_width=1.0)
        with pytest.raises(ValueError, match="alpha"):
            riesz_apply_direct(GridFunction.zeros(spec), 3.5)


class TestFast:
    @pytest.mark.parametrize("alpha", [1.0, 2.0])
    def test_agrees_with_direct(self, alpha):
        rng = np.random.default_rng(42)
        spec = GridSpec(d=3, n=16, half_width=1.0)
        for _ in range(3):
            f = random_compact_density(spec, rng)
            ref = riesz_apply_direct(f, alpha)
            fast = riesz_apply_fast(f, alpha)
            scale = np.max(np.abs(ref.values))
            assert np.max(np.abs(fast.values - ref.values)) / scale <= 1e-10

    def test_agrees_with_direct_d4(self):
        rng = np.random.default_rng(1)
        spec = GridSpec(d=4, n=8, half_width=1.0)
        f = random_compact_density(spec, rng)
        ref = riesz_apply_direct(f, 2.5)
        fast = riesz_apply_fast(f, 2.5)
        scale = np.max(np.abs(ref.values))
        assert np.max(np.abs(fast.values - ref.values)) / scale <= 1e-10

    def test_zero(self):
        spec = GridSpec(d=3, n=16, half_width=1.0)
        out = riesz_apply_fast(GridFunction.zeros(spec), 1.0)
        assert np.all(out.values == 0.0)

    def test_translation_equivariance(self):
        spec = GridSpec(d=3, n=32, half_width=1.0)
        f = compact_bump(spec, (0.0, 0.0, 0.0), 0.25 * spec.half_width)
        shifted = GridFunction(spec, np.roll(f.values, 1, axis=0))
        a = riesz_apply_fast(f, 2.0)
        b = riesz_apply_fast(shifted, 2.0)
        # compare on cells whose full stencil stayed inside the box
        inner = (slice(4, -4),) * 3
        rolled = np.roll(a.values, 1, axis=0)
        scale = np.max(np.abs(a.values))
        assert np.max(np.abs(b.values[inner] - rolled[inner])) / scale <= 1e-10

    def test_positivity(self):
        rng = np.random.default_rng(9)
        spec = GridSpec(d=3, n=16, half_width=1.0)
        f = random_compact_density(spec, rng)
        out = riesz_apply_fast(f, 1.5)
        assert np.min(out.values) >= 0.0

    def test_bilinear_symmetry(self):
        # int rho * (I_2 eta) = int eta * (I_2 rho), pure kernel symmetry
        rng = np.random.default_rng(17)
        spec = GridSpec(d=3, n=24, half_width=1.0)
        rho = random_compact_density(spec, rng)
        eta = random_compact_density(spec, rng)
        a = integrate(rho * riesz_apply_fast(eta, 2.0))
        b = integrate(eta * riesz_apply_fast(rho, 2.0))
        assert abs(a - b) / abs(a) <= 1e-8


class TestElectricPotential:
    def test_zero(self):
        spec = GridSpec(d=3, n=16, half_width=1.0)
        out = electric_potential(GridFunction.zeros(spec))
        assert np.all(out.values == 0.0)

    def test_uniform_ball_analytic(self):
        # -lap(phi) = 1 on B_R: phi(0) = R^2/2, phi(x) = R^3/(3|x|) outside
        spec = GridSpec(d=3, n=64, half_width=1.0)
        r = spec.radius()
        rho = GridFunction(spec, (r <= 0.5).astype(float))
        phi = electric_potential(rho)
        center = (32, 32, 32)
        assert abs(phi.values[center] - 0.125) / 0.125 < 0.02
        ax = spec.axis()
        i = int(np.argmin(np.abs(ax - 0.8)))
        x = ax[i]
        exact = 0.5**3 / (3.0 * x)
        got = phi.values[i, 32, 32]
        assert abs(got - exact) / exact < 0.02

    def test_negative_density_rejected(self):
        spec = GridSpec(d=3, n=8, half_width=1.0)
        vals = np.ones(spec.shape)
        vals[0, 0, 0] = -0.1
        with pytest.raises(ValueError, match="nonnegative"):
            electric_potential(GridFunction(spec, vals))

    def test_tiny_negative_clipped(self):
        spec = GridSpec(d=3, n=8, half_width=1.0)
        vals = np.ones(spec.shape)
        vals[0, 0, 0] = -1e-13
        electric_potential(GridFunction(spec, vals))  # no raise

    def test_discrete_laplacian_residual(self):
        def residual(n):
            spec = GridSpec(d=3, n=n, half_width=1.0)
            rho = GridFunction.from_callable(
                spec, lambda x, y, z: np.exp(-((x**2 + y**2 + z**2)) / (2 * 0.15**2))
            )
            phi = electric_potential(rho).values
            h2 = spec.h**2
            lap = np.zeros_like(phi)
            core = (slice(1, -1),) * 3
            for ax in range(3):
                up = tuple(
                    slice(2, None) if k == ax else slice(1, -1) for k in range(3)
                )
                dn = tuple(
                    slice(0, -2) if k == ax else slice(1, -1) for k in range(3)
                )
                lap[core] += (phi[up] - 2.0 * phi[core] + phi[dn]) / h2
            num = np.sqrt(np.sum((-lap[core] - rho.values[core]) ** 2))
            den = np.sqrt(np.sum(rho.values[core] ** 2))
            return num / den

        r64 = residual(64)
        assert r64 <= 5e-2
        r96 = residual(96)
        assert r96 < r64

    def test_satisfies_gauss_law_far_field(self):
        # total mass M: phi ~ M/(4 pi |x|) far away
        spec = GridSpec(d=3, n=48, half_width=2.0)
        rho = compact_bump(spec, (0.0, 0.0, 0.0), 0.4)
        phi = electric_potential(rho)
        M = integrate(rho)
        ax = spec.axis()
        i = int(np.argmin(np.abs(ax - 1.6)))
        expected = M / (4.0 * math.pi * ax[i])
        got = phi.values[i, spec.n // 2, spec.n // 2]
        assert abs(got - expected) / expected < 0.02


class TestElectricField:
    def test_zero(self):
        spec = GridSpec(d=3, n=16, half_width=1.0)
        out = electric_field(GridFunction.zeros(spec))
        assert np.all(out.values == 0.0)

    def test_field_vanishes_at_center_of_symmetric_density(self):
        spec = GridSpec(d=3, n=32, half_width=1.0)
        rho = compact_bump(spec, (0.0, 0.0, 0.0), 0.4)
        e = electric_field(rho)
        scale = np.max(np.abs(e.values))
        # cell centers are offset from the origin by h/2; use the 8-cell
        # average around the origin, which restores the odd symmetry
        block = (slice(15, 17),) * 3
        for k in range(3):
            assert abs(np.mean(e.values[(k,) + block])) / scale <= 1e-10

    def test_consistency_with_gradient_of_potential(self):
        def rel_diff(n):
            spec = GridSpec(d=3, n=n, half_width=1.0)
            rho = GridFunction.from_callable(
                spec,
                lambda x, y, z: np.exp(-((x**2 + y**2 + z**2)) / (2 * 0.15**2)),
            )
            kernel_path = electric_field(rho).values
            stencil_path = gradient(electric_potential(rho)).values
            num = np.sqrt(np.sum((kernel_path - stencil_path) ** 2))
            den = np.sqrt(np.sum(kernel_path**2))
            return num / den

        d64 = rel_diff(64)
        assert d64 <= 2e-2
        assert rel_diff(96) < d64

    def test_point_mass_inverse_square(self):
        # single occupied cell: field at distance r is (2-d)/(c(d)) * r/|r|^3 * mass
        spec = GridSpec(d=3, n=32, half_width=1.0)
        vals = np.zeros(spec.shape)
        c = spec.n // 2
        vals[c, c, c] = 1.0
        rho = GridFunction(spec, vals)
        mass = integrate(rho)
        e = electric_field(rho)
        i = c + 8
        dx = spec.axis()[i] - spec.axis()[c]
        expected = (2.0 - 3.0) / (4.0 * math.pi) * mass * dx / abs(dx) ** 3
        got = e.values[0, i, c, c]
        np.testing.assert_allclose(got, expected, rtol=1e-10)


class TestHlsExponents:
    def test_paper_instances(self):
        np.testing.assert_allclose(hls_exponents(3, 1.0, 6.0 / 5.0), 2.0, rtol=1e-14)
        np.testing.assert_allclose(hls_exponents(3, 2.0, 6.0 / 5.0), 6.0, rtol=1e-14)
        np.testing.assert_allclose(hls_exponents(4, 2.0, 4.0 / 3.0), 4.0, rtol=1e-14)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 0.8])
    def test_gate_alpha2(self, p):
        # d/alpha = 1.5 at d=3, alpha=2: only 1 < p < 1.5 admissible
        if 1.0 < p < 1.5:
            hls_exponents(3, 2.0, p)
        else:
            with pytest.raises(ValueError, match="exponent hypothesis"):
                hls_exponents(3, 2.0, p)

    def test_degree_window(self):
        with pytest.raises(ValueError):
            hls_exponents(3, 0.0, 1.2)
        with pytest.raises(ValueError):
            hls_exponents(3, 3.0, 1.2)
