"""Energy functionals over fluid states: kinetic, internal, electrostatic,
total, and relative (Bregman-gap) energies, functional-derivative fields,
the electrostatic stress divergence, and the ledger record they feed.

The electrostatic energy carries two discretizations: the gradient form
0.5*int |grad phi|^2 over all of space (box integral plus harmonic-exterior
flux completion; canonical for the total energy) and the kernel form
0.5*int rho*phi. The kernel form is the exact discrete adjoint of the
convolution, so functional-derivative identities hold to rounding only
along that form; both are reported. The relative energy keeps its field
term as a plain box integral of |grad(phi - phibar)|^2: it is then
manifestly nonnegative, and the difference field carries no monopole tail
when the two states share total mass.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import thermo
from .grid import (
    GridFunction,
    VectorGridFunction,
    _diff_axis,
    gradient,
    integrate,
)
from .riesz import electric_field, electric_potential
from .thermo import GasLaw

__all__ = [
    "VACUUM_SCALE",
    "FluidState",
    "ReferenceFrame",
    "EnergyLedger",
    "LEDGER_COLUMNS",
    "kinetic_energy",
    "potential_energy",
    "potential_energy_forms",
    "potential_energy_kernel_form",
    "total_energy",
    "relative_energy",
    "relative_energy_parts",
    "relative_kinetic_bregman",
    "relative_potential_kernel_forms",
    "functional_derivative_fields",
    "j_integrands",
    "stress_tensor_divergence",
    "energy_ledger",
    "write_ledger_csv",
    "read_ledger_csv",
]

# vacuum cutoff relative to the peak density of the initial state
VACUUM_SCALE = 1e-12


class FluidState:
    """Density/momentum pair on one grid.

    Tiny negative densities (>= -1e-12 * max rho) are clipped to zero;
    momentum is zeroed wherever the clipped density vanishes, so velocity
    is always recoverable as m/rho above the vacuum cutoff ``eps_vac``.
    """

    __slots__ = ("spec", "rho", "m", "eps_vac")

    def __init__(
        self,
        rho: GridFunction,
        m: VectorGridFunction,
        eps_vac: Optional[float] = None,
    ) -> None:
        if m.spec != rho.spec:
            raise ValueError("density and momentum live on different grids")
        vals = rho.values
        peak = float(np.max(vals))
        lowest = float(np.min(vals))
        if lowest < -VACUUM_SCALE * max(peak, 0.0):
            raise ValueError(
                f"density dips to {lowest}, below the clipping band "
                f"of {-VACUUM_SCALE * max(peak, 0.0)}"
            )
        clipped = np.where(vals < 0.0, 0.0, vals)
        mvals = np.array(m.values)
        mvals[:, clipped == 0.0] = 0.0
        self.spec = rho.spec
        self.rho = GridFunction(rho.spec, clipped)
        self.m = VectorGridFunction(rho.spec, mvals)
        self.eps_vac = VACUUM_SCALE * peak if eps_vac is None else float(eps_vac)
        if not math.isfinite(self.mass):
            raise ValueError("state carries non-finite mass")

    @classmethod
    def at_rest(cls, rho: GridFunction, eps_vac: Optional[float] = None) -> "FluidState":
        return cls(rho, VectorGridFunction.zeros(rho.spec), eps_vac)

    @property
    def mass(self) -> float:
        return integrate(self.rho)

    def velocity(self) -> VectorGridFunction:
        """m/rho above the vacuum cutoff, zero elsewhere."""
        safe = self.rho.values > self.eps_vac
        u = np.zeros_like(self.m.values)
        np.divide(self.m.values, self.rho.values, out=u, where=safe)
        return VectorGridFunction(self.spec, u)

    def copy(self) -> "FluidState":
        return FluidState(self.rho.copy(), self.m.copy(), self.eps_vac)


class ReferenceFrame:
    """Precomputed fields of one reference state, reused across comparisons.

    Gradient quantities are filled lazily; plain relative-energy evaluation
    only needs the velocity and the electrostatic field.
    """

    __slots__ = ("state", "velocity", "field", "_grad", "_div")

    def __init__(self, state: FluidState) -> None:
        self.state = state
        self.velocity = state.velocity().values
        self.field = electric_field(state.rho).values
        self._grad = None
        self._div = None

    @property
    def grad_velocity(self) -> np.ndarray:
        """G[i, j, ...] = d u_i / d x_j of the reference velocity."""
        if self._grad is None:
            spec = self.state.spec
            rows = [
                gradient(GridFunction(spec, self.velocity[i])).values
                for i in range(spec.d)
            ]
            self._grad = np.stack(rows)
        return self._grad

    @property
    def div_velocity(self) -> np.ndarray:
        if self._div is None:
            g = self.grad_velocity
            self._div = np.einsum("ii...->...", g)
        return self._div


def _as_frame(ref: Union[FluidState, ReferenceFrame]) -> ReferenceFrame:
    return ref if isinstance(ref, ReferenceFrame) else ReferenceFrame(ref)


def kinetic_energy(s: FluidState) -> float:
    """int |m|^2 / (2 rho), integrand zeroed below the vacuum cutoff."""
    m2 = np.sum(s.m.values**2, axis=0)
    safe = s.rho.values > s.eps_vac
    integrand = np.zeros_like(s.rho.values)
    np.divide(m2, 2.0 * s.rho.values, out=integrand, where=safe)
    return float(np.sum(integrand)) * s.spec.cell_volume


def internal_energy_total(rho: GridFunction, law: GasLaw) -> float:
    return float(np.sum(thermo.internal_energy(rho.values, law))) * rho.spec.cell_volume


def electrostatic_energy_forms(rho: GridFunction) -> tuple[float, float]:
    """(gradient form 0.5*int |grad phi|^2, kernel form 0.5*int rho*phi).

    The gradient form is a whole-space integral: the box carries only part
    of the field energy (the monopole tail int_{r>L} |grad phi|^2 ~ M^2/L
    never vanishes under grid refinement). The potential is harmonic outside
    the compactly supported density, so the exterior energy is recovered
    exactly in the continuum by the boundary flux -oint phi (grad phi . n) dS
    over the sub-box bounded by the second cell layer, where phi and the
    field are available on grid to O(h^2).
    """
    spec = rho.spec
    vol = spec.cell_volume
    n = spec.n
    e = electric_field(rho).values
    phi = electric_potential(rho).values
    kernel_form = 0.5 * float(np.sum(rho.values * phi)) * vol

    core = (slice(1, n - 1),) * spec.d
    interior = 0.5 * float(np.sum(np.sum(e**2, axis=0)[core])) * vol
    area = spec.h ** (spec.d - 1)
    flux = 0.0
    for k in range(spec.d):
        def layer(i: int) -> tuple:
            return tuple(i if ax == k else slice(1, n - 1) for ax in range(spec.d))

        # centered two-point averages across the face between cell layers
        for lo, hi, sign in ((0, 1, 1.0), (n - 2, n - 1, -1.0)):
            phi_face = 0.5 * (phi[layer(lo)] + phi[layer(hi)])
            en_face = 0.5 * (e[k][layer(lo)] + e[k][layer(hi)])
            flux += 0.5 * sign * float(np.sum(phi_face * en_face)) * area
    grad_form = interior + flux
    return grad_form, kernel_form


def potential_energy(s: FluidState, law: GasLaw) -> float:
    """Internal plus electrostatic energy, gradient form."""
    return internal_energy_total(s.rho, law) + electrostatic_energy_forms(s.rho)[0]


def potential_energy_forms(s: FluidState, law: GasLaw) -> dict:
    grad_form, kernel_form = electrostatic_energy_forms(s.rho)
    internal = internal_energy_total(s.rho, law)
    return {
        "internal": internal,
        "electrostatic_gradient_form": grad_form,
        "electrostatic_kernel_form": kernel_form,
        "canonical": internal + grad_form,
        "kernel_total": internal + kernel_form,
    }


def potential_energy_kernel_form(rho: GridFunction, law: GasLaw) -> float:
    """Internal plus 0.5*int rho*phi; the exactly differentiable form."""
    return internal_energy_total(rho, law) + electrostatic_energy_forms(rho)[1]


def total_energy(s: FluidState, law: GasLaw) -> float:
    return kinetic_energy(s) + potential_energy(s, law)


def _check_same_grid(s: FluidState, ref: FluidState) -> None:
    if s.spec != ref.spec:
        raise ValueError(
            "states live on different grids; resample the coarse one first"
        )


def _relative_kinetic_density(s: FluidState, ubar: np.ndarray) -> np.ndarray:
    # 0.5*rho*|u - ubar|^2 in the division-safe form |m - rho*ubar|^2/(2 rho)
    diff = s.m.values - s.rho.values * ubar
    num = np.sum(diff**2, axis=0)
    safe = s.rho.values > s.eps_vac
    out = np.zeros_like(s.rho.values)
    np.divide(num, 2.0 * s.rho.values, out=out, where=safe)
    return out


def _check_vacuum_policy(policy: str) -> None:
    if policy not in ("error", "extend"):
        raise ValueError(f"unknown vacuum_reference policy {policy!r}")


def _relative_internal_density(
    s: FluidState, ref: FluidState, law: GasLaw, vacuum_reference: str = "error"
) -> np.ndarray:
    rho = s.rho.values
    rbar = ref.rho.values
    pos = rbar > 0.0
    if vacuum_reference == "error" and np.any(rho[~pos] > s.eps_vac):
        raise ValueError(
            "reference density vanishes where the candidate density is "
            "positive; the everywhere-positive reference contract is violated"
        )
    out = np.zeros_like(rho)
    out[pos] = thermo.h_relative(rho[pos], rbar[pos], law)
    if vacuum_reference == "extend" and not pos.all():
        # continuous limit of the gap: h(rho|0) = h(rho), since h and its
        # derivative vanish at zero density for gamma > 1
        out[~pos] = thermo.internal_energy(rho[~pos], law)
    return out


def relative_energy_parts(
    s: FluidState,
    ref: Union[FluidState, ReferenceFrame],
    law: GasLaw,
    vacuum_reference: str = "error",
) -> dict:
    """Kinetic, internal, and electrostatic pieces of the relative energy.

    All three integrands are pointwise nonnegative: 0.5*rho|u-ubar|^2,
    the Bregman gap h(rho|rbar), and 0.5*|grad(phi-phibar)|^2. A reference
    that vanishes where the candidate carries mass is an error by default;
    ``vacuum_reference="extend"`` instead continues the gap by its limit
    value h(rho), for candidates moved across grids by injection.
    """
    _check_vacuum_policy(vacuum_reference)
    frame = _as_frame(ref)
    _check_same_grid(s, frame.state)
    vol = s.spec.cell_volume
    kin = float(np.sum(_relative_kinetic_density(s, frame.velocity))) * vol
    internal = float(
        np.sum(_relative_internal_density(s, frame.state, law, vacuum_reference))
    ) * vol
    dfield = electric_field(s.rho).values - frame.field
    elec = 0.5 * float(np.sum(dfield**2)) * vol
    return {
        "kinetic": kin,
        "internal": internal,
        "electrostatic": elec,
        "psi": kin + internal + elec,
    }


def relative_energy(
    s: FluidState,
    ref: Union[FluidState, ReferenceFrame],
    law: GasLaw,
    vacuum_reference: str = "error",
) -> float:
    return relative_energy_parts(s, ref, law, vacuum_reference)["psi"]


def relative_kinetic_bregman(s: FluidState, ref: FluidState) -> tuple[float, float]:
    """Relative kinetic energy two ways: direct and as a Bregman expansion.

    Direct: int 0.5*rho*|u-ubar|^2. Expansion: K(s) - K(ref)
    - <dK/drho, rho-rbar> - <dK/dm, m-mbar> with dK/drho = -0.5|ubar|^2 and
    dK/dm = ubar. The two agree to rounding wherever no vacuum guard fires.
    """
    _check_same_grid(s, ref)
    vol = s.spec.cell_volume
    ubar = ref.velocity().values
    direct = float(np.sum(_relative_kinetic_density(s, ubar))) * vol
    drho = s.rho.values - ref.rho.values
    dm = s.m.values - ref.m.values
    lin = float(
        np.sum(-0.5 * np.sum(ubar**2, axis=0) * drho) + np.sum(ubar * dm)
    ) * vol
    expansion = kinetic_energy(s) - kinetic_energy(ref) - lin
    return direct, expansion


def relative_potential_kernel_forms(
    s: FluidState, ref: FluidState, law: GasLaw
) -> tuple[float, float]:
    """Relative potential energy two ways along the kernel form.

    Direct: int h(rho|rbar) + 0.5*int (rho-rbar)(phi-phibar). Expansion:
    E(rho) - E(rbar) - <h'(rbar) + phibar, rho-rbar> with E the kernel-form
    potential energy. Kernel symmetry makes these identical up to rounding.
    """
    _check_same_grid(s, ref)
    vol = s.spec.cell_volume
    internal = float(np.sum(_relative_internal_density(s, ref, law))) * vol
    drho = s.rho.values - ref.rho.values
    dphi = electric_potential(s.rho).values - electric_potential(ref.rho).values
    direct = internal + 0.5 * float(np.sum(drho * dphi)) * vol
    deriv = thermo.h_prime(ref.rho.values, law) + electric_potential(ref.rho).values
    expansion = (
        potential_energy_kernel_form(s.rho, law)
        - potential_energy_kernel_form(ref.rho, law)
        - float(np.sum(deriv * drho)) * vol
    )
    return direct, expansion


def functional_derivative_fields(
    ref: FluidState, law: GasLaw
) -> tuple[GridFunction, VectorGridFunction]:
    """(-0.5|ubar|^2 + h'(rbar) + phibar, ubar): the total-energy gradient."""
    u = ref.velocity()
    scalar = (
        -0.5 * np.sum(u.values**2, axis=0)
        + thermo.h_prime(ref.rho.values, law)
        + electric_potential(ref.rho).values
    )
    return GridFunction(ref.spec, scalar), u


def stress_tensor_divergence(rho: GridFunction) -> VectorGridFunction:
    """Divergence of the electrostatic stress grad(phi) x grad(phi)
    - 0.5|grad(phi)|^2 I; equals -rho*grad(phi) in the continuum."""
    spec = rho.spec
    e = electric_field(rho).values
    half_e2 = 0.5 * np.sum(e**2, axis=0)
    out = np.zeros_like(e)
    for i in range(spec.d):
        for j in range(spec.d):
            s_ij = e[i] * e[j]
            if i == j:
                s_ij = s_ij - half_e2
            out[i] += _diff_axis(s_ij, spec.h, j)
    return VectorGridFunction(spec, out)


def j_integrands(
    s: FluidState,
    ref: Union[FluidState, ReferenceFrame],
    law: GasLaw,
    vacuum_reference: str = "error",
) -> dict:
    """Instantaneous rates of the three relative-energy production terms.

    j1 = -int grad(ubar) : rho (u-ubar) x (u-ubar)
    j2 = -int div(ubar) p(rho|rbar)     (also returned via (gamma-1) h-form)
    j3 = int (rho-rbar) ubar . g       with g = grad(phi) - grad(phibar),
         plus its stress rewriting int grad(ubar) : g x g
         - int div(ubar) 0.5|g|^2.
"""
    _check_vacuum_policy(vacuum_reference)
    frame = _as_frame(ref)
    _check_same_grid(s, frame.state)
    spec = s.spec
    vol = spec.cell_volume
    g = frame.grad_velocity
    div_u = frame.div_velocity

    # rho (u-ubar)_i (u-ubar)_j restricted above the vacuum cutoff
    rw = s.m.values - s.rho.values * frame.velocity
    safe = s.rho.values > s.eps_vac
    w = np.zeros_like(rw)
    np.divide(rw, s.rho.values, out=w, where=safe)
    quad = np.einsum("ij...,i...,j...->...", g, rw, w)
    j1 = -float(np.sum(quad)) * vol

    rho = s.rho.values
    rbar = frame.state.rho.values
    pos = rbar > 0.0
    prel = np.zeros_like(rho)
    prel[pos] = thermo.p_relative(rho[pos], rbar[pos], law)
    if vacuum_reference == "extend" and not pos.all():
        # keep prel = (gamma-1) hrel exact on the extension cells too
        prel[~pos] = thermo.pressure(rho[~pos], law)
    j2 = -float(np.sum(div_u * prel)) * vol
    hrel = _relative_internal_density(s, frame.state, law, vacuum_reference)
    j2_gamma_form = -(law.gamma - 1.0) * float(np.sum(div_u * hrel)) * vol

    dfield = electric_field(s.rho).values - frame.field
    drho = rho - rbar
    j3_direct = float(np.sum(drho * np.sum(frame.velocity * dfield, axis=0))) * vol
    pair = np.einsum("ij...,i...,j...->...", g, dfield, dfield)
    j3_rewritten = (
        float(np.sum(pair)) - 0.5 * float(np.sum(div_u * np.sum(dfield**2, axis=0)))
    ) * vol

    return {
        "j1": j1,
        "j2": j2,
        "j2_gamma_form": j2_gamma_form,
        "j3_direct": j3_direct,
        "j3_rewritten": j3_rewritten,
    }


LEDGER_COLUMNS = ("t", "mass", "K", "E", "H", "Psi", "J1", "J2", "J3")


@dataclass(frozen=True)
class EnergyLedger:
    """One output-time record of the conserved and relative quantities."""

    t: float
    mass: float
    kinetic: float
    potential: float
    total: float
    psi: Optional[float] = None
    j1: Optional[float] = None
    j2: Optional[float] = None
    j3: Optional[float] = None

    def __post_init__(self) -> None:
        core = (self.t, self.mass, self.kinetic, self.potential, self.total)
        if not all(math.isfinite(v) for v in core):
            raise ValueError(f"non-finite ledger entry: {core}")
        gap = abs(self.total - self.kinetic - self.potential)
        if gap > 1e-12 * max(1.0, abs(self.total)):
            raise ValueError("total energy fails to split into K + E")

    def with_reference(self, psi: float, j1: float, j2: float, j3: float):
        return EnergyLedger(
            self.t, self.mass, self.kinetic, self.potential, self.total,
            psi, j1, j2, j3,
        )


def energy_ledger(
    s: FluidState,
    t: float,
    law: GasLaw,
    ref: Union[FluidState, ReferenceFrame, None] = None,
    j_cumulative: Optional[tuple[float, float, float]] = None,
) -> EnergyLedger:
    k = kinetic_energy(s)
    e = potential_energy(s, law)
    psi = None if ref is None else relative_energy(s, ref, law)
    j1, j2, j3 = j_cumulative if j_cumulative is not None else (None, None, None)
    return EnergyLedger(float(t), s.mass, k, e, k + e, psi, j1, j2, j3)


def write_ledger_csv(rows: Sequence[EnergyLedger], path) -> None:
    def cell(v: Optional[float]) -> str:
        return "" if v is None else repr(float(v))

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LEDGER_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    cell(r.t), cell(r.mass), cell(r.kinetic), cell(r.potential),
                    cell(r.total), cell(r.psi), cell(r.j1), cell(r.j2), cell(r.j3),
                ]
            )


def read_ledger_csv(path) -> list[EnergyLedger]:
    def val(text: str) -> Optional[float]:
        return None if text == "" else float(text)

    rows: list[EnergyLedger] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != LEDGER_COLUMNS:
            raise ValueError(f"unexpected ledger header: {header}")
        for raw in reader:
            t, mass, k, e, h, psi, j1, j2, j3 = (val(x) for x in raw)
            rows.append(EnergyLedger(t, mass, k, e, h, psi, j1, j2, j3))
    return rows
