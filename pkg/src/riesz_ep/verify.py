"""Inequality and stability verification harness.

Each check evaluates one analytic statement on concrete grid data and
returns a report of named cases; a case records the two sides of the
inequality, their ratio, the slack granted, and the verdict. Reports
flatten to plain dictionaries whose JSON encoding is bitwise identical
across reruns of the same (config, seed) pair: no timestamps, no machine
state, floats straight from the arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

try:
    import tomllib
except ModuleNotFoundError:  # 3.10 ships no tomllib
    import tomli as tomllib

from .energy import (
    FluidState,
    ReferenceFrame,
    electrostatic_energy_forms,
    j_integrands,
    relative_energy_parts,
)
from .grid import (
    GridFunction,
    GridSpec,
    VectorGridFunction,
    gradient,
    lp_norm,
    resample_conservative,
)
from .profiles import corpus, corpus_velocity_fields
from .riesz import (
    electric_field,
    electric_potential,
    hls_exponents,
    poisson_normalization,
    riesz_apply_direct,
    riesz_apply_fast,
)
from .solver import (
    SUPPORT_THRESHOLD_SCALE,
    ScenarioConfig,
    Trajectory,
    make_reference,
    make_weak,
)
from .thermo import GasLaw

SUITES = (
    "hls",
    "ibp",
    "re-inequality",
    "gronwall",
    "weak-strong",
    "dissipativity",
    "all",
)

# minimal separation demanded between consecutive coincidence-ladder rungs
LADDER_RATIO = 1.5

# growth-rate prefactor of the a-priori constant
GRONWALL_KAPPA = 3.0

_TINY = float(np.finfo(np.float64).tiny)


def load_default_config() -> dict:
    """Packaged default settings as a flat dict."""
    from importlib import resources

    text = resources.files("riesz_ep").joinpath("default.toml").read_text()
    return tomllib.loads(text)


def resolve_config(user: Optional[Mapping] = None) -> dict:
    """Defaults overlaid with user keys; unknown keys are rejected."""
    cfg = load_default_config()
    if user:
        unknown = sorted(set(user) - set(cfg))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(user)
    return cfg


def scenario_from_config(cfg: Mapping, **overrides) -> ScenarioConfig:
    merged = dict(cfg)
    merged.update(overrides)
    return ScenarioConfig(
        spec=GridSpec(int(merged["d"]), int(merged["n"]), float(merged["L"])),
        law=GasLaw(float(merged["gamma"])),
        final_time=float(merged["T"]),
        cfl=float(merged["cfl"]),
        preset=str(merged["preset"]),
        role=str(merged["role"]),
        delta=float(merged["delta"]),
        cadence=int(merged["cadence"]),
        seed=int(merged["seed"]),
    )


@dataclass(frozen=True)
class Case:
    """One named inequality instance: pass iff lhs <= rhs + slack."""

    name: str
    lhs: float
    rhs: float
    ratio: float
    slack: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "slack": self.slack,
            "pass": self.passed,
        }


def _case(name: str, lhs: float, rhs: float, slack: float = 0.0,
          passed: Optional[bool] = None) -> Case:
    lhs, rhs, slack = float(lhs), float(rhs), float(slack)
    if rhs != 0.0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0.0 else math.inf
    if passed is None:
        passed = math.isfinite(lhs) and lhs <= rhs + slack
    return Case(name, lhs, rhs, float(ratio), slack, bool(passed))


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of one check over one corpus or run pair."""

    name: str
    corpus: str
    cases: tuple[Case, ...]
    notes: tuple[str, ...] = ()
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    @property
    def empirical_constant(self) -> float:
        """Largest finite case ratio; the observed constant of the family."""
        finite = [c.ratio for c in self.cases if math.isfinite(c.ratio)]
        return max(finite) if finite else 0.0


@dataclass(frozen=True)
class GronwallReport:
    """Envelope and rate data for one weak/reference pairing."""

    times: tuple[float, ...]
    psi: tuple[float, ...]
    c_star: float
    c_apriori: float
    c_stepwise: float
    cases: tuple[Case, ...]
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)


# ---------------------------------------------------------------------------
# potential-to-Lebesgue inequality family


def check_hls_family(
    d: int, alpha: float, p: float, data: Sequence[tuple[str, GridFunction]]
) -> InequalityReport:
    """Sharp-exponent bounds for the fractional integral on a profile corpus.

    Runs every sub-inequality whose exponent hypotheses hold at (d, alpha, p):
    the potential bound ||I_a f||_q <= C ||f||_p with q = dp/(d - alpha p),
    its Hoelder pairing against a plain profile, the product of two
    potentials (admissible when q = 2), and the diagonal pairing of a
    profile against its own potential (admissible when p = 2d/(d+alpha)).
    A family passes when every ratio is finite, no ratio exceeds ten times
    its family median, and two-scale dilate pairs agree within 5%.
    """
    if not data:
        raise ValueError("empty corpus")
    spec = data[0][1].spec
    if spec.d != d:
        raise ValueError(f"corpus built in dimension {spec.d}, asked for {d}")
    q = hls_exponents(d, alpha, p)
    q_conj = q / (q - 1.0)
    self_conjugate = abs(q - 2.0) <= 1e-9
    diagonal = abs(p - 2.0 * d / (d + alpha)) <= 1e-9

    potentials = [riesz_apply_fast(f, alpha) for _, f in data]
    base_norms = [lp_norm(f, p) for _, f in data]

    families: dict[str, list[tuple[str, float]]] = {"potential-bound": []}
    for (name, f), pot, nf in zip(data, potentials, base_norms):
        families["potential-bound"].append((name, lp_norm(pot, q) / nf))

    families["hoelder-pairing"] = []
    count = len(data)
    for i, ((name, _), pot, nf) in enumerate(zip(data, potentials, base_norms)):
        g = data[(i + 1) % count][1]
        num = lp_norm(GridFunction(spec, pot.values * g.values), 1.0)
        families["hoelder-pairing"].append((name, num / (nf * lp_norm(g, q_conj))))

    if self_conjugate:
        families["potential-pair"] = []
        for i, ((name, _), pot, nf) in enumerate(zip(data, potentials, base_norms)):
            j = (i + 1) % count
            num = lp_norm(GridFunction(spec, pot.values * potentials[j].values), 1.0)
            families["potential-pair"].append(
                (name, num / (nf * base_norms[j]))
            )
    if diagonal:
        families["energy-diagonal"] = []
        for (name, f), pot, nf in zip(data, potentials, base_norms):
            num = lp_norm(GridFunction(spec, pot.values * f.values), 1.0)
            families["energy-diagonal"].append((name, num / nf**2))

    cases: list[Case] = []
    for fam, entries in families.items():
        ratios = np.array([r for _, r in entries])
        med = float(np.median(ratios[np.isfinite(ratios)]))
        for name, r in entries:
            cases.append(
                _case(
                    f"{fam}/{name}", r, 10.0 * med,
                    passed=math.isfinite(r) and r <= 10.0 * med,
                )
            )

    # adjacent -wide/-half entries are an analytic dilation pair; the bound is
    # scale-invariant at these exponents, so their ratios must agree
    bound = dict(families["potential-bound"])
    dilate_ratios = []
    for (name_w, _), (name_h, _) in zip(data, data[1:]):
        if name_w.endswith("-wide") and name_h.endswith("-half"):
            rw, rh = bound[name_w], bound[name_h]
            dilate_ratios.extend([rw, rh])
            cases.append(
                _case(
                    f"dilate-drift/{name_w[:-5]}",
                    abs(rw - rh),
                    0.05 * max(rw, rh),
                )
            )
    if dilate_ratios:
        arr = np.array(dilate_ratios)
        cases.append(
            _case("dilate-boundedness", float(arr.max()),
                  10.0 * float(np.median(arr)))
        )

    return InequalityReport(
        name=f"hls-d{d}-alpha{alpha:g}-p{p:g}",
        corpus=f"count={count} n={spec.n} d={d}",
        cases=tuple(cases),
        extras={"target_exponent": q, "checked": sorted(families)},
    )


# ---------------------------------------------------------------------------
# integration-by-parts identities


def check_ibp_bilinear(
    rho: GridFunction,
    eta: GridFunction,
    pairing_tol: Optional[float] = 3e-2,
) -> InequalityReport:
    """Bilinear potential identity on a pair of nonnegative profiles.

    Compares the whole-space gradient pairing int grad(phi).grad(psi)
    against the two source pairings int rho*psi and int eta*phi, and, on
    grids small enough for the quadratic-cost double sum, against the
    direct kernel evaluation. The two source pairings share one symmetric
    kernel and must agree to rounding at any resolution; the gradient
    pairing is a differentiated form and only approaches them under grid
    refinement, so its tolerance is the caller's (None reports the
    deviation without gating it).
    """
    if rho.spec != eta.spec:
        raise ValueError("profiles live on different grids")
    spec = rho.spec
    vol = spec.cell_volume
    phi = electric_potential(rho)
    psi = electric_potential(eta)
    source_a = float(np.sum(rho.values * psi.values)) * vol
    source_b = float(np.sum(eta.values * phi.values)) * vol

    # polarization of the flux-completed field energy: no second code path
    # for the exterior tail
    both = electrostatic_energy_forms(GridFunction(spec, rho.values + eta.values))[0]
    grad_pair = both - electrostatic_energy_forms(rho)[0] \
        - electrostatic_energy_forms(eta)[0]

    scale = max(abs(grad_pair), abs(source_a), abs(source_b), _TINY)
    cases = [
        _case("kernel-symmetry", abs(source_a - source_b), 1e-8 * scale),
        _case(
            "gradient-pairing",
            abs(grad_pair - source_a),
            (1.0 if pairing_tol is None else pairing_tol) * scale,
        ),
    ]
    if spec.n**spec.d <= 16**3:
        direct = riesz_apply_direct(eta, 2.0)
        psi_direct = direct.values / poisson_normalization(spec.d)
        double_sum = float(np.sum(rho.values * psi_direct)) * vol
        cases.append(_case("fast-vs-direct", abs(double_sum - source_a),
                           1e-10 * scale))

    return InequalityReport(
        name="ibp-bilinear",
        corpus=f"n={spec.n} d={spec.d}",
        cases=tuple(cases),
        extras={
            "gradient_pairing": grad_pair,
            "source_pairing": source_a,
            "deviation": abs(grad_pair - source_a) / scale,
        },
    )


def check_ibp_stress(
    rho: GridFunction,
    u_bar: VectorGridFunction,
    tol: float = 5e-2,
) -> InequalityReport:
    """Stress-tensor rewriting of the field-transport pairing.

    int rho (grad phi . u) must match int grad(u) : grad(phi) x grad(phi)
    - 1/2 int div(u) |grad phi|^2. Exact for constant u (both sides
    vanish to rounding against the natural magnitude of the terms), and a
    differentiated identity otherwise, converging under refinement.
    """
    spec = rho.spec
    if u_bar.spec != spec:
        raise ValueError("velocity and density live on different grids")
    vol = spec.cell_volume
    e = electric_field(rho).values
    u = u_bar.values
    g = np.stack([gradient(GridFunction(spec, u[i])).values
                  for i in range(spec.d)])
    div_u = np.einsum("ii...->...", g)
    e2 = np.sum(e * e, axis=0)

    transport = float(np.sum(rho.values * np.sum(e * u, axis=0))) * vol
    stress = (
        float(np.sum(np.einsum("ij...,i...,j...->...", g, e, e)))
        - 0.5 * float(np.sum(div_u * e2))
    ) * vol

    g_norm = np.sqrt(np.einsum("ij...,ij...->...", g, g))
    magnitude = (
        float(np.sum(rho.values * np.sqrt(e2) * np.sqrt(np.sum(u * u, axis=0))))
        + float(np.sum((g_norm + 0.5 * np.abs(div_u)) * e2))
    ) * vol
    scale = max(abs(transport), abs(stress), magnitude, _TINY)

    return InequalityReport(
        name="ibp-stress",
        corpus=f"n={spec.n} d={spec.d}",
        cases=(_case("stress-identity", abs(transport - stress), tol * scale),),
        extras={
            "transport": transport,
            "stress": stress,
            "deviation": abs(transport - stress) / scale,
        },
    )


# ---------------------------------------------------------------------------
# relative-energy machinery shared by the stability checks


@dataclass(frozen=True)
class RelativeSeries:
    """Relative energy and its production terms along a run pair."""

    times: np.ndarray
    psi: np.ndarray
    j_inst: np.ndarray       # rows: transport, compression, field (direct)
    j_rewritten: np.ndarray  # field term through the stress rewriting
    j_cum: np.ndarray        # trapezoid cumulatives of j_inst rows
    j_gamma_gap: float       # largest gap between the two compression forms
    grad_sup: float          # sup over time and space of |grad u_ref|_F
    div_sup: float           # sup of |div u_ref|
    h_scale: float           # initial total energy of the weak run

    @property
    def residual(self) -> np.ndarray:
        """Psi(t) - Psi(0) - sum of cumulative production terms."""
        return self.psi - self.psi[0] - self.j_cum.sum(axis=0)


def _resampled_state(state: FluidState, target: GridSpec) -> FluidState:
    if state.spec == target:
        return state
    rho = resample_conservative(state.rho, target)
    m = np.stack([
        resample_conservative(GridFunction(state.spec, comp), target).values
        for comp in state.m.values
    ])
    return FluidState(rho, VectorGridFunction(target, m), eps_vac=state.eps_vac)


def relative_series(
    weak: Trajectory,
    ref: Trajectory,
    frames: Optional[Sequence[ReferenceFrame]] = None,
) -> RelativeSeries:
    """Evaluate the relative energy of a weak run against a reference run.

    The runs must share the gas law and the output cadence; a coarser weak
    run is moved onto the reference grid by conservative injection before
    comparison. The reference density must stay positive wherever the weak
    run carries mass above its vacuum cutoff.
    """
    if weak.config.law != ref.config.law:
        raise ValueError("runs must share the gas law")
    if weak.status != "completed" or ref.status != "completed":
        raise ValueError(
            f"both runs must complete; got {weak.status!r} and {ref.status!r}"
        )
    if len(weak.times) != len(ref.times) or not np.array_equal(
        np.asarray(weak.times), np.asarray(ref.times)
    ):
        raise ValueError("runs must share the output cadence over one horizon")

    law = ref.config.law
    target = ref.config.spec
    if frames is None:
        frames = [ReferenceFrame(s) for s in ref.states]

    psi, j1, j2, j3d, j3r = [], [], [], [], []
    gamma_gap = 0.0
    grad_sup = 0.0
    div_sup = 0.0
    for wk_state, frame in zip(weak.states, frames):
        # positivity of the reference is a hypothesis about the pair as
        # given, so test it at the weak run's own resolution: the cell
        # average of the reference must be positive wherever the weak cell
        # carries mass in the solver's support sense. Injection then smears
        # boundary cells onto a few fine cells outside the reference
        # support, where the entropy gap stays finite and nonnegative.
        carrying = wk_state.rho.values > SUPPORT_THRESHOLD_SCALE * float(
            wk_state.rho.values.max()
        )
        ref_on_weak = (
            frame.state.rho
            if wk_state.spec == target
            else resample_conservative(frame.state.rho, wk_state.spec)
        )
        if np.any(ref_on_weak.values[carrying] <= 0.0):
            raise ValueError(
                "reference density vanishes inside the weak run's support; "
                "the entropy gap needs a positive reference there"
            )
        wk = _resampled_state(wk_state, target)
        psi.append(
            relative_energy_parts(wk, frame, law, vacuum_reference="extend")["psi"]
        )
        j = j_integrands(wk, frame, law, vacuum_reference="extend")
        j1.append(j["j1"])
        j2.append(j["j2"])
        j3d.append(j["j3_direct"])
        j3r.append(j["j3_rewritten"])
        gamma_gap = max(gamma_gap, abs(j["j2"] - j["j2_gamma_form"]))
        g = frame.grad_velocity
        grad_sup = max(grad_sup, float(
            np.sqrt(np.einsum("ij...,ij...->...", g, g)).max()
        ))
        div_sup = max(div_sup, float(np.abs(frame.div_velocity).max()))

    times = np.asarray(ref.times, dtype=float)
    j_inst = np.array([j1, j2, j3d])
    j_cum = np.concatenate(
        [np.zeros((3, 1)), cumulative_trapezoid(j_inst, times, axis=1)], axis=1
    )
    return RelativeSeries(
        times=times,
        psi=np.array(psi),
        j_inst=j_inst,
        j_rewritten=np.array(j3r),
        j_cum=j_cum,
        j_gamma_gap=float(gamma_gap),
        grad_sup=float(grad_sup),
        div_sup=float(div_sup),
        h_scale=float(weak.ledgers[0].total),
    )


def _slack(series: RelativeSeries, spec: GridSpec,
           slack_h: float, slack_dt: float) -> float:
    """Declared discretization slack a*h + b*dt, scaled by the run energy."""
    dt_out = float(series.times[1] - series.times[0])
    return (slack_h * spec.h + slack_dt * dt_out) * series.h_scale


def relative_energy_inequality(
    weak: Trajectory,
    ref: Trajectory,
    slack_h: float = 0.1,
    slack_dt: float = 0.1,
    series: Optional[RelativeSeries] = None,
) -> InequalityReport:
    """Cumulative form of the stability estimate along a run pair.

    Checks Psi(t) - Psi(0) <= J1(t) + J2(t) + J3(t) + slack at each output
    time, with the slack declared up front as a*h + b*dt relative to the
    initial total energy, h taken from the weak run's own grid. The
    compression term evaluated through the pressure gap and through the
    scaled entropy gap must agree to rounding.
    """
    if series is None:
        series = relative_series(weak, ref)
    spec = weak.config.spec
    slack = _slack(series, spec, slack_h, slack_dt)
    residual = float(series.residual.max())
    cases = (
        _case("re-inequality", residual, slack),
        _case("compression-two-forms", series.j_gamma_gap,
              1e-12 * max(series.h_scale, 1.0)),
    )
    return InequalityReport(
        name="re-inequality",
        corpus=f"weak n={spec.n} vs ref n={ref.config.spec.n}",
        cases=cases,
        extras={
            "residual": residual,
            "residual_magnitude": float(np.abs(series.residual).max()),
            "slack": slack,
            "slack_h": slack_h,
            "slack_dt": slack_dt,
            "h": spec.h,
            "dt_out": float(series.times[1] - series.times[0]),
            "energy_scale": series.h_scale,
            "field_two_forms_gap": float(
                np.abs(series.j_inst[2] - series.j_rewritten).max()
            ),
        },
    )


def gronwall_check(
    weak: Trajectory,
    ref: Trajectory,
    slack_h: float = 0.1,
    slack_dt: float = 0.1,
    series: Optional[RelativeSeries] = None,
) -> GronwallReport:
    """Exponential envelope and stepwise production bounds for one pairing.

    Requires Psi(0) > 0; a coinciding pair carries no growth rate and
    belongs to weak_strong_check. With a = sup |grad u_ref|_F and
    b = sup |div u_ref|, each production term is dominated stepwise:
    |j1| <= 2a Psi, |j2| <= (gamma-1) b Psi, and the rewritten field term
    by (2a+b) Psi; the same constants bound the cumulative ledger columns
    by the running integral of Psi. The envelope uses the a-priori rate
    C_ap = 3 (a + b max(1, gamma-1)); the observed rate
    C* = max_t log(Psi(t)/Psi(0))/t must not exceed it.
    """
    if series is None:
        series = relative_series(weak, ref)
    if series.psi[0] <= 1e-13 * series.h_scale:
        raise ValueError(
            "relative energy vanishes at the initial time; "
            "coincidence ladders belong to weak_strong_check"
        )
    gamma = ref.config.law.gamma
    a, b = series.grad_sup, series.div_sup
    c_ap = GRONWALL_KAPPA * (a + b * max(1.0, gamma - 1.0))
    consts = (2.0 * a, (gamma - 1.0) * b, 2.0 * a + b)
    c_stepwise = sum(consts)

    psi = series.psi
    times = series.times
    psi_cum = np.concatenate([[0.0], cumulative_trapezoid(psi, times)])
    inst = (series.j_inst[0], series.j_inst[1], series.j_rewritten)
    labels = ("transport", "compression", "field")

    cases: list[Case] = []
    for label, c, j in zip(labels, consts, inst):
        fp = 1e-10 * (c * float(psi.max()) + float(np.abs(j).max()) + _TINY)
        cases.append(
            _case(f"stepwise-{label}", float((np.abs(j) - c * psi).max()), 0.0,
                  slack=fp)
        )
        j_cum = np.concatenate([[0.0], cumulative_trapezoid(np.abs(j), times)])
        cases.append(
            _case(f"cumulative-{label}",
                  float((j_cum - c * psi_cum).max()), 0.0, slack=fp)
        )
    cases.append(
        _case("compression-two-forms", series.j_gamma_gap,
              1e-12 * max(series.h_scale, 1.0))
    )

    slack = _slack(series, weak.config.spec, slack_h, slack_dt)
    envelope = np.exp(c_ap * times) * (psi[0] + slack)
    cases.append(
        _case("envelope", float((psi / envelope).max()), 1.0)
    )

    later = times > 0.0
    rates = np.log(np.maximum(psi[later], _TINY) / psi[0]) / times[later]
    c_star = float(rates.max())
    cases.append(_case("rate", c_star, c_ap))

    return GronwallReport(
        times=tuple(float(t) for t in times),
        psi=tuple(float(v) for v in psi),
        c_star=c_star,
        c_apriori=float(c_ap),
        c_stepwise=float(c_stepwise),
        cases=tuple(cases),
    )


def weak_strong_check(
    ref: Trajectory,
    weaks: Sequence[Trajectory],
    series_by_n: Optional[Mapping[int, RelativeSeries]] = None,
) -> InequalityReport:
    """Coincidence ladder: weak runs of the same data against one reference.

    The peak relative energy must fall by at least LADDER_RATIO per rung as
    the weak grid refines toward the reference grid, and a same-grid weak
    run must reproduce the reference to rounding in the initial-energy
    scale. Window maxima over shrinking horizons [0, T'] are reported to
    pin the T -> 0 limit.
    """
    runs = sorted(weaks, key=lambda tr: tr.config.spec.n)
    ns = [tr.config.spec.n for tr in runs]
    if len(set(ns)) != len(ns):
        raise ValueError(f"duplicate ladder rungs: {ns}")
    n_ref = ref.config.spec.n
    if any(n > n_ref for n in ns):
        raise ValueError("ladder rungs must not exceed the reference grid")

    h_scale = float(ref.ledgers[0].total)
    sups: dict[int, float] = {}
    window_ok = True
    for tr in runs:
        series = None if series_by_n is None else series_by_n.get(tr.config.spec.n)
        if series is None:
            series = relative_series(tr, ref)
        sups[tr.config.spec.n] = float(series.psi.max())
        # max over [0, T'] is nondecreasing in T' by construction; assert the
        # computed series respects it so the shrinking-window limit is sane
        running = np.maximum.accumulate(series.psi)
        window_ok = window_ok and bool(np.all(np.diff(running) >= 0.0))

    cases: list[Case] = []
    notes: list[str] = []
    coarse = [n for n in ns if n < n_ref]
    for n_lo, n_hi in zip(coarse, coarse[1:]):
        cases.append(
            _case(
                f"ladder-n{n_lo}-to-n{n_hi}",
                LADDER_RATIO * sups[n_hi],
                sups[n_lo],
            )
        )
    if n_ref in sups:
        cases.append(
            _case("same-grid-coincidence", sups[n_ref], 1e-12 * h_scale)
        )
    cases.append(_case("window-monotone", 0.0, 0.0, passed=window_ok))

    if not all(c.passed for c in cases):
        notes.append(
            "sup Psi by rung: "
            + ", ".join(f"n={n}: {sups[n]:.6e}" for n in sorted(sups))
        )

    return InequalityReport(
        name="weak-strong",
        corpus=f"rungs {ns} vs ref n={n_ref}",
        cases=tuple(cases),
        notes=tuple(notes),
        extras={"sup_psi": {str(n): sups[n] for n in sorted(sups)}},
    )


def dissipativity_check(
    traj: Trajectory,
    slack_rel: float = 1e-3,
    windows: Optional[Sequence[float]] = None,
) -> InequalityReport:
    """Windowed-average and pointwise decay of the total energy.

    For every start t and width kappa on the output grid the average
    (1/kappa) int_t^{t+kappa} H must stay below H(0) plus the declared
    slack, and so must every pointwise value (the kappa -> 0 limit).
    Windows must be positive multiples of the output interval; a constant
    ledger meets every window with equality, the trapezoid rule being
    exact there.
    """
    times = np.asarray(traj.times, dtype=float)
    h_series = np.array([led.total for led in traj.ledgers])
    if len(times) < 2:
        raise ValueError("need at least two output times")
    dt_out = float(times[1] - times[0])
    k_max = len(times) - 1

    if windows is None:
        steps = sorted({m for m in (1, 2, 5) if m <= k_max})
    else:
        steps = []
        for kappa in windows:
            m = kappa / dt_out
            if m < 1.0 - 1e-9:
                raise ValueError(
                    f"output cadence too coarse to resolve the averaging "
                    f"window {kappa} (interval {dt_out})"
                )
            if abs(m - round(m)) > 1e-9 * max(1.0, m):
                raise ValueError(
                    f"averaging window {kappa} must be a multiple of the "
                    f"output interval {dt_out}"
                )
            steps.append(min(int(round(m)), k_max))
        steps = sorted(set(steps))

    h0 = float(h_series[0])
    slack = slack_rel * abs(h0)
    cases = [_case("pointwise-limit", float(h_series.max()), h0, slack=slack)]
    for m in steps:
        width = m * dt_out
        averages = [
            float(np.trapezoid(h_series[i:i + m + 1], dx=dt_out)) / width
            for i in range(len(times) - m)
        ]
        cases.append(
            _case(f"window-{m}x", max(averages), h0, slack=slack)
        )

    return InequalityReport(
        name="dissipativity",
        corpus=f"n={traj.config.spec.n} outputs={len(times)}",
        cases=tuple(cases),
        extras={"h0": h0, "slack": slack, "windows": [m * dt_out for m in steps]},
    )


# ---------------------------------------------------------------------------
# suite orchestration


class VerificationSession:
    """Shared runs and corpora for one verification pass over a config."""

    def __init__(self, config: Optional[Mapping] = None) -> None:
        self.config = resolve_config(config)
        self._runs: dict[tuple, Trajectory] = {}
        self._frames: dict[tuple, list[ReferenceFrame]] = {}
        self._series: dict[tuple, RelativeSeries] = {}

    # -- cached building blocks

    def _run(self, **overrides) -> Trajectory:
        sc = scenario_from_config(self.config, **overrides)
        key = (sc.spec.n, sc.role, sc.preset, sc.delta, sc.seed)
        if key not in self._runs:
            if sc.role == "reference":
                self._runs[key] = make_reference(sc)
            else:
                self._runs[key] = make_weak(sc)
        return self._runs[key]

    def reference(self, n: int) -> Trajectory:
        return self._run(n=n, role="reference", preset="gaussian", delta=0.0)

    def weak(self, n: int, preset: str, delta: float) -> Trajectory:
        return self._run(n=n, role="weak", preset=preset, delta=delta)

    def _ref_frames(self, ref: Trajectory) -> list[ReferenceFrame]:
        key = (ref.config.spec.n, ref.config.preset, ref.config.delta)
        if key not in self._frames:
            self._frames[key] = [ReferenceFrame(s) for s in ref.states]
        return self._frames[key]

    def pair_series(self, weak: Trajectory, ref: Trajectory) -> RelativeSeries:
        key = (
            weak.config.spec.n, weak.config.preset, weak.config.delta,
            ref.config.spec.n,
        )
        if key not in self._series:
            self._series[key] = relative_series(
                weak, ref, frames=self._ref_frames(ref)
            )
        return self._series[key]

    # -- individual suites

    def suite_hls(self) -> list[InequalityReport]:
        cfg = self.config
        spec = GridSpec(int(cfg["d"]), int(cfg["n"]), float(cfg["L"]))
        data = corpus(spec, int(cfg["seed"]), int(cfg["corpus_count"]))
        return [
            check_hls_family(spec.d, float(alpha), float(cfg["hls_p"]), data)
            for alpha in cfg["hls_alphas"]
        ]

    def suite_ibp(self) -> list[InequalityReport]:
        cfg = self.config
        sizes = [int(n) for n in cfg["ibp_sizes"]]
        seed = int(cfg["seed"])
        reports = []
        pair_devs = {}
        for n in sizes:
            spec = GridSpec(int(cfg["d"]), n, float(cfg["L"]))
            prof = corpus(spec, seed, 3)
            tol = 3e-2 if n == max(sizes) else None
            rep = check_ibp_bilinear(prof[0][1], prof[2][1], pairing_tol=tol)
            pair_devs[n] = rep.extras["deviation"]
            reports.append(
                InequalityReport(
                    name=f"ibp-bilinear-n{n}", corpus=rep.corpus,
                    cases=rep.cases, extras=rep.extras,
                )
            )
        refine = [
            _case(
                f"bilinear-refinement-n{lo}-to-n{hi}",
                pair_devs[hi], pair_devs[lo],
            )
            for lo, hi in zip(sizes, sizes[1:])
        ]

        stress_sizes = [int(n) for n in cfg["stress_sizes"]]
        stress_devs = {}
        for n in stress_sizes:
            spec = GridSpec(int(cfg["d"]), n, float(cfg["L"]))
            rho = corpus(spec, seed, 1)[0][1]
            u_bar = corpus_velocity_fields(spec, seed, 1)[0][1]
            tol = 5e-2 if n == max(stress_sizes) else 1.0
            rep = check_ibp_stress(rho, u_bar, tol=tol)
            stress_devs[n] = rep.extras["deviation"]
            reports.append(
                InequalityReport(
                    name=f"ibp-stress-n{n}", corpus=rep.corpus,
                    cases=rep.cases, extras=rep.extras,
                )
            )
        refine += [
            _case(
                f"stress-refinement-n{lo}-to-n{hi}",
                stress_devs[hi], stress_devs[lo],
            )
            for lo, hi in zip(stress_sizes, stress_sizes[1:])
        ]
        reports.append(
            InequalityReport(
                name="ibp-refinement", corpus=f"sizes {sizes}/{stress_sizes}",
                cases=tuple(refine),
            )
        )
        return reports

    def _pair(self, n: int) -> tuple[Trajectory, Trajectory, RelativeSeries]:
        cfg = self.config
        ref = self.reference(n)
        wk = self.weak(n, str(cfg["preset"]), float(cfg["delta"]))
        return wk, ref, self.pair_series(wk, ref)

    def suite_re(self) -> list[InequalityReport]:
        cfg = self.config
        coarse_n = int(cfg["ladder"][0])
        fine_n = int(cfg["n"])
        reports = []
        residuals = {}
        for n in (coarse_n, fine_n):
            wk, ref, series = self._pair(n)
            rep = relative_energy_inequality(
                wk, ref, float(cfg["slack_h"]), float(cfg["slack_dt"]),
                series=series,
            )
            residuals[n] = rep.extras["residual_magnitude"]
            reports.append(
                InequalityReport(
                    name=f"re-inequality-n{n}", corpus=rep.corpus,
                    cases=rep.cases, extras=rep.extras,
                )
            )
        reports.append(
            InequalityReport(
                name="re-refinement",
                corpus=f"n={coarse_n} vs n={fine_n}",
                cases=(
                    _case(
                        f"residual-refinement-n{coarse_n}-to-n{fine_n}",
                        LADDER_RATIO * residuals[fine_n],
                        residuals[coarse_n],
                    ),
                ),
            )
        )
        return reports

    def suite_gronwall(self) -> list[Union[InequalityReport, GronwallReport]]:
        cfg = self.config
        wk, ref, series = self._pair(int(cfg["n"]))
        re_rep = relative_energy_inequality(
            wk, ref, float(cfg["slack_h"]), float(cfg["slack_dt"]), series=series
        )
        gw = gronwall_check(
            wk, ref, float(cfg["slack_h"]), float(cfg["slack_dt"]), series=series
        )
        bound_cases = [c for c in gw.cases if c.name.startswith(("stepwise", "cumulative"))]
        premise = re_rep.passed and all(c.passed for c in bound_cases)
        envelope = next(c for c in gw.cases if c.name == "envelope")
        implication = InequalityReport(
            name="gronwall-implication",
            corpus=re_rep.corpus,
            cases=(
                _case(
                    "re-and-bounds-imply-envelope", 0.0, 0.0,
                    passed=(not premise) or envelope.passed,
                ),
            ),
        )
        return [gw, implication]

    def suite_weak_strong(self) -> list[InequalityReport]:
        cfg = self.config
        n_ref = int(cfg["ladder_reference_n"])
        ref = self.reference(n_ref)
        rungs = [int(n) for n in cfg["ladder"]] + [n_ref]
        weaks = [self.weak(n, "gaussian-coarsen", 0.0) for n in rungs]
        series = {
            tr.config.spec.n: self.pair_series(tr, ref) for tr in weaks
        }
        return [weak_strong_check(ref, weaks, series_by_n=series)]

    def suite_dissipativity(self) -> list[InequalityReport]:
        cfg = self.config
        return [
            dissipativity_check(
                self.reference(int(cfg["n"])),
                slack_rel=float(cfg["dissipativity_slack"]),
            )
        ]

    # -- parallel precomputation

    def required_scenarios(self, suite: str) -> list[ScenarioConfig]:
        """Distinct solver runs the suite will consume, in a stable order."""
        if suite not in SUITES:
            raise ValueError(
                f"unknown suite {suite!r}; choose from {', '.join(SUITES)}"
            )
        cfg = self.config
        wanted: list[ScenarioConfig] = []

        def ref(n: int) -> None:
            wanted.append(scenario_from_config(
                cfg, n=n, role="reference", preset="gaussian", delta=0.0))

        def weak(n: int, preset: str, delta: float) -> None:
            wanted.append(scenario_from_config(
                cfg, n=n, role="weak", preset=preset, delta=delta))

        names = [s for s in SUITES if s != "all"] if suite == "all" else [suite]
        for name in names:
            if name == "re-inequality":
                for n in (int(cfg["ladder"][0]), int(cfg["n"])):
                    ref(n)
                    weak(n, str(cfg["preset"]), float(cfg["delta"]))
            elif name == "gronwall":
                ref(int(cfg["n"]))
                weak(int(cfg["n"]), str(cfg["preset"]), float(cfg["delta"]))
            elif name == "weak-strong":
                n_ref = int(cfg["ladder_reference_n"])
                ref(n_ref)
                for n in [int(v) for v in cfg["ladder"]] + [n_ref]:
                    weak(n, "gaussian-coarsen", 0.0)
            elif name == "dissipativity":
                ref(int(cfg["n"]))

        seen: set[tuple] = set()
        out: list[ScenarioConfig] = []
        for sc in wanted:
            key = (sc.spec.n, sc.role, sc.preset, sc.delta, sc.seed)
            if key not in seen:
                seen.add(key)
                out.append(sc)
        return out

    def prefetch(self, suite: str, max_workers: int) -> None:
        """Precompute the suite's solver runs on a thread pool.

        Runs are independent and deterministic, so the schedule cannot
        change any result; the cache is filled from the main thread after
        all workers finish.
        """
        todo = [
            sc for sc in self.required_scenarios(suite)
            if (sc.spec.n, sc.role, sc.preset, sc.delta, sc.seed)
            not in self._runs
        ]
        if max_workers <= 1 or len(todo) < 2:
            return
        from concurrent.futures import ThreadPoolExecutor

        def solve(sc: ScenarioConfig) -> Trajectory:
            return make_reference(sc) if sc.role == "reference" else make_weak(sc)

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for sc, tr in zip(todo, pool.map(solve, todo)):
                self._runs[(sc.spec.n, sc.role, sc.preset, sc.delta, sc.seed)] = tr

    # -- report assembly

    def run(self, suite: str) -> dict:
        """Execute one suite (or all) and flatten to the report schema."""
        runners = {
            "hls": self.suite_hls,
            "ibp": self.suite_ibp,
            "re-inequality": self.suite_re,
            "gronwall": self.suite_gronwall,
            "weak-strong": self.suite_weak_strong,
            "dissipativity": self.suite_dissipativity,
        }
        if suite == "all":
            picked = list(runners)
        elif suite in runners:
            picked = [suite]
        else:
            raise ValueError(
                f"unknown suite {suite!r}; choose from {', '.join(SUITES)}"
            )

        cases = []
        details = {}
        for name in picked:
            for rep in runners[name]():
                rep_name = getattr(rep, "name", "gronwall")
                for c in rep.cases:
                    entry = c.as_dict()
                    entry["name"] = f"{name}/{rep_name}/{c.name}"
                    cases.append(entry)
                if isinstance(rep, GronwallReport):
                    details["gronwall"] = {
                        "c_star": rep.c_star,
                        "c_apriori": rep.c_apriori,
                        "c_stepwise": rep.c_stepwise,
                        "times": list(rep.times),
                        "psi": list(rep.psi),
                    }
                elif rep.extras:
                    details[f"{name}/{rep.name}"] = rep.extras
                for note in getattr(rep, "notes", ()):
                    details.setdefault("notes", []).append(
                        f"{name}/{rep_name}: {note}"
                    )

        passed = sum(1 for c in cases if c["pass"])
        return {
            "suite": suite,
            "seed": int(self.config["seed"]),
            "config": {k: self.config[k] for k in sorted(self.config)},
            "cases": cases,
            "details": details,
            "summary": {
                "cases": len(cases),
                "passed": passed,
                "failed": len(cases) - passed,
                "pass": passed == len(cases),
            },
        }


def run_suite(suite: str, config: Optional[Mapping] = None) -> dict:
    return VerificationSession(config).run(suite)
