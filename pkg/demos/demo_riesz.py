"""Riesz potentials on a grid: fast path vs direct sum, and the Newtonian case.

Run with: python demos/demo_riesz.py
"""

import numpy as np

from riesz_ep.grid import GridFunction, GridSpec
from riesz_ep.profiles import bump
from riesz_ep.riesz import (
    electric_potential,
    poisson_normalization,
    riesz_apply_direct,
    riesz_apply_fast,
)


def main():
    spec = GridSpec(d=3, n=16, half_width=1.0)
    rho = bump(spec, (0.1, 0.0, -0.2), 0.35, 1.0)

    print("fast convolution vs direct double sum, n=16:")
    for alpha in (1.0, 1.5, 2.0):
        a = riesz_apply_direct(rho, alpha).values
        b = riesz_apply_fast(rho, alpha).values
        dev = np.max(np.abs(a - b)) / np.max(np.abs(a))
        print(f"  alpha={alpha}: max rel deviation {dev:.2e}")

    print(f"\nnormalization c(3) = {poisson_normalization(3):.10f} "
          f"(4*pi = {4 * np.pi:.10f})")

    # uniform ball of radius R: phi(0) = R^2/2, phi = R^3/(3|x|) outside
    spec = GridSpec(d=3, n=64, half_width=1.0)
    r = spec.radius()
    ball = GridFunction(spec, (r <= 0.5).astype(float))
    phi = electric_potential(ball).values
    c = spec.n // 2
    print("\nuniform ball, n=64:")
    print(f"  phi near 0: {phi[c, c, c]:.6f}   analytic 0.125000")
    ax = spec.axis()
    i = int(np.argmin(np.abs(ax - 0.8)))
    print(f"  phi at x={ax[i]:.4f}: {phi[i, c, c]:.6f}   "
          f"analytic {0.5**3 / (3 * ax[i]):.6f}")


if __name__ == "__main__":
    main()
