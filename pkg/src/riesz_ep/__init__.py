"""Riesz-potential operators, Euler-Poisson energy functionals, and the
relative-energy verification harness, on uniform cell-centered grids."""

__version__ = "0.1.0"

from .grid import (
    GridSpec,
    GridFunction,
    VectorGridFunction,
    lp_norm,
    integrate,
    gradient,
    divergence,
    read_grid,
    write_grid,
    resample_conservative,
)
from .thermo import GasLaw, weak_exponent_floor
from .riesz import (
    riesz_apply_fast,
    riesz_apply_direct,
    electric_potential,
    electric_field,
    hls_exponents,
    singular_cell_constant,
    poisson_normalization,
)
from .energy import (
    FluidState,
    ReferenceFrame,
    EnergyLedger,
    kinetic_energy,
    potential_energy,
    total_energy,
    relative_energy,
)
from .solver import ScenarioConfig, Trajectory, run, make_reference, make_weak
from .mollify import MollifyResult, mollify, mollify_approximate
from .verify import (
    VerificationSession,
    check_hls_family,
    check_ibp_bilinear,
    check_ibp_stress,
    dissipativity_check,
    gronwall_check,
    relative_energy_inequality,
    relative_series,
    resolve_config,
    run_suite,
    scenario_from_config,
    weak_strong_check,
)

__all__ = [
    "GridSpec",
    "GridFunction",
    "VectorGridFunction",
    "lp_norm",
    "integrate",
    "gradient",
    "divergence",
    "read_grid",
    "write_grid",
    "resample_conservative",
    "GasLaw",
    "weak_exponent_floor",
    "riesz_apply_fast",
    "riesz_apply_direct",
    "electric_potential",
    "electric_field",
    "hls_exponents",
    "singular_cell_constant",
    "poisson_normalization",
    "FluidState",
    "ReferenceFrame",
    "EnergyLedger",
    "kinetic_energy",
    "potential_energy",
    "total_energy",
    "relative_energy",
    "ScenarioConfig",
    "Trajectory",
    "run",
    "make_reference",
    "make_weak",
    "MollifyResult",
    "mollify",
    "mollify_approximate",
    "VerificationSession",
    "check_hls_family",
    "check_ibp_bilinear",
    "check_ibp_stress",
    "dissipativity_check",
    "gronwall_check",
    "relative_energy_inequality",
    "relative_series",
    "resolve_config",
    "run_suite",
    "scenario_from_config",
    "weak_strong_check",
    "__version__",
]
