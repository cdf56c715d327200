"""Finite-volume time integrator for the repulsive gas with self-consistent
potential force on a truncated box.

Space: second-order MUSCL reconstruction (minmod limiter) of the conserved
variables with a local Lax-Friedrichs flux, wave speed |u| + sqrt(p'(rho)).
Time: SSP-RK3 under a CFL bound. Boundary: zero ghost cells; every scenario
keeps its support away from the faces and the run aborts if the support
(cells above 1e-8 of the initial peak) reaches the boundary margin.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .energy import FluidState, EnergyLedger, VACUUM_SCALE, energy_ledger
from .grid import GridFunction, GridSpec, VectorGridFunction
from .profiles import PERTURBATION_PRESETS, initial_data
from .riesz import electric_field
from .thermo import GasLaw, weak_exponent_floor

__all__ = [
    "ScenarioConfig",
    "Trajectory",
    "rhs",
    "run",
    "make_reference",
    "make_weak",
    "SUPPORT_THRESHOLD_SCALE",
]

# cells count as support above this fraction of the initial peak density
SUPPORT_THRESHOLD_SCALE = 1e-8


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run depends on; validation happens at construction."""

    spec: GridSpec
    law: GasLaw = GasLaw(2.0)
    final_time: float = 0.2
    cfl: float = 0.4
    preset: str = "gaussian"
    role: str = "reference"
    delta: float = 0.0
    cadence: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.final_time) and self.final_time > 0.0):
            raise ValueError(f"final time must be finite and positive, got {self.final_time}")
        if not 0.0 < self.cfl <= 0.9:
            raise ValueError(f"cfl must lie in ]0, 0.9], got {self.cfl}")
        if self.role not in ("reference", "weak"):
            raise ValueError(f"role must be 'reference' or 'weak', got {self.role!r}")
        if self.preset not in PERTURBATION_PRESETS:
            raise ValueError(
                f"unknown preset {self.preset!r}; expected one of {PERTURBATION_PRESETS}"
            )
        if self.cadence < 1:
            raise ValueError("cadence must be a positive number of output intervals")
        if not math.isfinite(self.delta):
            raise ValueError("perturbation amplitude must be finite")
        floor = weak_exponent_floor(self.spec.d)
        if self.law.gamma < floor:
            msg = (
                f"adiabatic exponent {self.law.gamma} is below the weak-state "
                f"admissibility floor 2d/(d+1) = {floor}"
            )
            if self.role == "weak":
                raise ValueError(msg)
            warnings.warn(msg, stacklevel=2)
        if self.role == "reference" and self.delta != 0.0:
            raise ValueError("reference runs take no perturbation; set delta = 0")


@dataclass
class Trajectory:
    """Output frames plus the per-frame energy ledgers of one run."""

    config: ScenarioConfig
    times: list[float]
    states: list[FluidState]
    ledgers: list[EnergyLedger]
    status: str
    steps: int
    clipped_mass: float
    dts: list[float] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def sup_total_energy(self) -> float:
        return max(row.total for row in self.ledgers)


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _face_flux_pieces(
    w: np.ndarray, law: GasLaw, eps_vac: float, axis: int
) -> tuple[np.ndarray, np.ndarray]:
    """Physical flux along `axis` and wave speed |u| + c of face states.

    `w` holds conserved components stacked first, the face axis second.
    """
    rho = w[0]
    safe = rho > eps_vac
    u = np.zeros_like(w[1:])
    np.divide(w[1:], rho, out=u, where=safe)
    ua = u[axis]
    p = np.power(rho, law.gamma)
    flux = np.empty_like(w)
    flux[0] = w[1 + axis]
    flux[1:] = w[1:] * ua
    flux[1 + axis] += p
    speed = np.abs(ua) + np.sqrt(law.gamma) * np.power(rho, 0.5 * (law.gamma - 1.0))
    return flux, speed


def _axis_divergence(
    u_cons: np.ndarray, law: GasLaw, eps_vac: float, spec: GridSpec, axis: int
) -> np.ndarray:
    """-(d/dx_axis) of the numerical flux, MUSCL faces + local Lax-Friedrichs."""
    ncomp = u_cons.shape[0]
    q = np.moveaxis(u_cons, 1 + axis, 1)
    n = q.shape[1]
    rest = q.shape[2:]
    padded = np.zeros((ncomp, n + 2) + rest)
    padded[:, 1:-1] = q
    slope = _minmod(padded[:, 1:-1] - padded[:, :-2], padded[:, 2:] - padded[:, 1:-1])
    left = np.zeros((ncomp, n + 1) + rest)
    right = np.zeros_like(left)
    left[:, 1:] = q + 0.5 * slope
    right[:, :-1] = q - 0.5 * slope
    flux_l, speed_l = _face_flux_pieces(left, law, eps_vac, axis)
    flux_r, speed_r = _face_flux_pieces(right, law, eps_vac, axis)
    s = np.maximum(speed_l, speed_r)
    face_flux = 0.5 * (flux_l + flux_r) - 0.5 * s * (right - left)
    out = (face_flux[:, 1:] - face_flux[:, :-1]) / spec.h
    return -np.moveaxis(out, 1, 1 + axis)


def _rhs_arrays(
    u_cons: np.ndarray,
    law: GasLaw,
    eps_vac: float,
    spec: GridSpec,
    field_values: Optional[np.ndarray] = None,
) -> np.ndarray:
    du = _axis_divergence(u_cons, law, eps_vac, spec, 0)
    for axis in range(1, spec.d):
        du += _axis_divergence(u_cons, law, eps_vac, spec, axis)
    if field_values is None:
        field_values = electric_field(GridFunction(spec, u_cons[0])).values
    du[1:] -= u_cons[0] * field_values
    return du


def rhs(s: FluidState, law: GasLaw) -> tuple[GridFunction, VectorGridFunction]:
    """Conservative update rates (drho/dt, dm/dt) for one state."""
    u_cons = np.concatenate([s.rho.values[None], s.m.values])
    du = _rhs_arrays(u_cons, law, s.eps_vac, s.spec)
    return GridFunction(s.spec, du[0]), VectorGridFunction(s.spec, du[1:])


def _max_wave_speed(u_cons: np.ndarray, law: GasLaw, eps_vac: float) -> float:
    rho = u_cons[0]
    safe = rho > eps_vac
    u = np.zeros_like(u_cons[1:])
    np.divide(np.abs(u_cons[1:]), rho, out=u, where=safe)
    c = np.sqrt(law.gamma) * np.power(rho, 0.5 * (law.gamma - 1.0))
    return float(np.max(np.max(u, axis=0) + c))


def _clip_in_place(u_cons: np.ndarray, cell_volume: float) -> float:
    """Clip negative densities to zero, zero momentum on exact vacuum.

    Returns the clipped mass (positive when mass was added by clipping)."""
    rho = u_cons[0]
    neg = rho < 0.0
    clipped = 0.0
    if np.any(neg):
        clipped = -float(np.sum(rho[neg])) * cell_volume
        rho[neg] = 0.0
    u_cons[1:][:, rho == 0.0] = 0.0
    return clipped


def _build_initial(config: ScenarioConfig) -> np.ndarray:
    rho, m = initial_data(config.spec, config.preset, config.delta)
    u_cons = np.concatenate([rho.values[None], m.values])
    spec = config.spec
    peak = float(np.max(rho.values))
    if peak <= 0.0:
        raise ValueError("initial data carries no mass")
    sup = rho.values > SUPPORT_THRESHOLD_SCALE * peak
    mesh = spec.meshgrid()
    chebyshev = np.max(np.stack([np.abs(g) * np.ones(spec.shape) for g in mesh]), axis=0)
    reach = float(np.max(chebyshev[sup]))
    if reach > 0.5 * spec.half_width:
        raise ValueError(
            f"initial support reaches {reach}, beyond half the box half-width "
            f"{0.5 * spec.half_width}"
        )
    return u_cons


def run(config: ScenarioConfig) -> Trajectory:
    """Integrate the scenario, emitting frames at cadence-many equal intervals.

    The run completes at the final time or stops early with a status of
    `aborted-support` (support reached the boundary margin),
    `aborted-nan` (non-finite state), or `aborted-positivity` (a reference
    run lost strict positivity on its monitored core).
    """
    spec = config.spec
    law = config.law
    u_cons = _build_initial(config)
    peak0 = float(np.max(u_cons[0]))
    eps_vac = VACUUM_SCALE * peak0
    support_floor = SUPPORT_THRESHOLD_SCALE * peak0

    mesh = spec.meshgrid()
    chebyshev = np.max(np.stack([np.abs(g) * np.ones(spec.shape) for g in mesh]), axis=0)
    margin_zone = chebyshev > spec.half_width * (1.0 - 1.0 / 8.0)
    monitored = u_cons[0] > support_floor  # strict-positivity core of a reference

    def snapshot(t: float) -> None:
        state = FluidState(
            GridFunction(spec, u_cons[0].copy()),
            VectorGridFunction(spec, u_cons[1:].copy()),
            eps_vac,
        )
        times.append(t)
        states.append(state)
        ledgers.append(energy_ledger(state, t, law))

    times: list[float] = []
    states: list[FluidState] = []
    ledgers: list[EnergyLedger] = []
    dts: list[float] = []
    clipped_total = 0.0
    steps = 0
    status = "completed"
    snapshot(0.0)

    t = 0.0
    output_times = [config.final_time * k / config.cadence for k in range(1, config.cadence + 1)]
    for t_next in output_times:
        while t < t_next:
            s_max = _max_wave_speed(u_cons, law, eps_vac)
            dt_cfl = config.cfl * spec.h / s_max if s_max > 0.0 else math.inf
            closing = dt_cfl >= t_next - t
            dt = t_next - t if closing else dt_cfl

            stage1 = u_cons + dt * _rhs_arrays(u_cons, law, eps_vac, spec)
            if not np.isfinite(stage1).all():
                status = "aborted-nan"
                break
            clipped_total += _clip_in_place(stage1, spec.cell_volume)
            stage2 = 0.75 * u_cons + 0.25 * (
                stage1 + dt * _rhs_arrays(stage1, law, eps_vac, spec)
            )
            if not np.isfinite(stage2).all():
                status = "aborted-nan"
                break
            clipped_total += _clip_in_place(stage2, spec.cell_volume)
            u_new = u_cons / 3.0 + (2.0 / 3.0) * (
                stage2 + dt * _rhs_arrays(stage2, law, eps_vac, spec)
            )
            if not np.isfinite(u_new).all():
                status = "aborted-nan"
                break
            u_cons = u_new
            clipped_total += _clip_in_place(u_cons, spec.cell_volume)

            steps += 1
            dts.append(dt)
            t = t_next if closing else t + dt
            if np.any(u_cons[0][margin_zone] > support_floor):
                status = "aborted-support"
                break
            if config.role == "reference" and float(np.min(u_cons[0][monitored])) <= 0.0:
                status = "aborted-positivity"
                break
        if status != "completed":
            break
        snapshot(t_next)

    return Trajectory(
        config=config,
        times=times,
        states=states,
        ledgers=ledgers,
        status=status,
        steps=steps,
        clipped_mass=clipped_total,
        dts=dts,
    )


def make_reference(config: ScenarioConfig) -> Trajectory:
    """Strong-solution surrogate: smooth positive data on a fine grid."""
    if config.role != "reference":
        raise ValueError("make_reference needs a config with role='reference'")
    return run(config)


def make_weak(config: ScenarioConfig, ref: Optional[Trajectory] = None) -> Trajectory:
    """Weak branch: perturbed and/or coarser run of the same scenario family.

    When a reference trajectory is supplied, the horizons and gas laws must
    match so the pair can be compared frame by frame later.
    """
    if config.role != "weak":
        raise ValueError("make_weak needs a config with role='weak'")
    if ref is not None:
        if ref.config.final_time != config.final_time or ref.config.cadence != config.cadence:
            raise ValueError("weak and reference runs must share horizon and cadence")
        if ref.config.law != config.law:
            raise ValueError("weak and reference runs must share the gas law")
    return run(config)
