"""Command-line front door: runs, inequality suites, grid transforms.

Every invocation writes its outputs plus a single `manifest.json` in the
output directory, keyed by subcommand: resolved configuration, seed, and
sha256 hashes of every file read and written. Artifact hashes reproduce
across reruns of the same configuration and seed; wall-clock timings live
in the manifest only, never in report payloads.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10 ships no tomllib
    import tomli as tomllib

from . import __version__
from .grid import GridFunction, GridSpec, read_grid, write_grid
from .mollify import mollify_approximate
from .profiles import corpus
from .riesz import riesz_apply_direct, riesz_apply_fast
from .solver import run as run_scenario
from .verify import (
    SUITES,
    VerificationSession,
    check_hls_family,
    load_default_config,
    resolve_config,
    scenario_from_config,
)

CONFIG_KEY_HELP = """\
configuration keys (shipped defaults in parentheses):
  d (3)                 spatial dimension
  n (64)                cells per axis
  L (1.0)               box half-width; the domain is [-L, L]^d
  gamma (2.0)           adiabatic exponent of the pressure law p = rho^gamma
  T (0.2)               final time of a run
  cfl (0.4)             CFL number of the explicit integrator
  preset (gaussian-shear)  initial data: gaussian, gaussian-bump,
                        gaussian-shear, gaussian-coarsen
  delta (0.01)          perturbation amplitude of the weak run
  cadence (10)          equal output intervals over [0, T]
  role (weak)           reference or weak
  seed (0)              corpus and scenario seed
  hls_alphas ([1.0, 2.0])   fractional-integral orders of the hls suite
  hls_p (1.2)           Lebesgue exponent of the hls corpus checks
  corpus_count (50)     profiles in the hls corpus
  ibp_sizes ([16, 32, 64])  grids of the bilinear-identity refinement scan
  stress_sizes ([32, 64])   grids of the stress-identity refinement scan
  slack_h (0.1)         spatial part of the declared inequality slack
  slack_dt (0.1)        temporal part of the declared inequality slack
  dissipativity_slack (0.001)  relative slack of the energy-decay windows
  ladder ([32, 48, 64])     weak-grid rungs of the coincidence ladder
  ladder_reference_n (96)   reference grid of the coincidence ladder

RIESZ_EP_THREADS caps worker parallelism (0 = one worker per CPU core)."""


# ---------------------------------------------------------------------------
# shared plumbing


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return "sha256:" + digest.hexdigest()


def _dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _rel_name(path: Path, base: Path) -> str:
    # names are stored relative to the manifest's directory so the whole
    # run directory stays relocatable
    return Path(os.path.relpath(path.resolve(), base.resolve())).as_posix()


def _update_manifest(
    out_dir: Path,
    argv: list[str],
    config: Optional[dict],
    seed: Optional[int],
    inputs: list[Path],
    outputs: list[Path],
    started: float,
) -> None:
    """Write or extend the run directory's single manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.json"
    runs: dict = {}
    if path.exists():
        try:
            prior = json.loads(path.read_text())
            if isinstance(prior, dict) and isinstance(prior.get("runs"), dict):
                runs = prior["runs"]
        except json.JSONDecodeError:
            pass  # damaged manifest is rebuilt from scratch
    runs[argv[0]] = {
        "command": list(argv),
        "config": config,
        "seed": seed,
        "inputs": {_rel_name(p, out_dir): _sha256(p) for p in inputs},
        "outputs": {_rel_name(p, out_dir): _sha256(p) for p in outputs},
        "timings": {"wall_seconds": time.monotonic() - started},
    }
    _dump_json(path, {"version": __version__, "runs": runs})


def manifest_hashes_verify(run_dir) -> bool:
    """Recompute every artifact hash recorded in a directory's manifest."""
    base = Path(run_dir)
    manifest = json.loads((base / "manifest.json").read_text())
    for entry in manifest["runs"].values():
        for section in ("inputs", "outputs"):
            for name, digest in entry[section].items():
                target = Path(name)
                if not target.is_absolute():
                    target = base / target
                if not target.exists() or _sha256(target) != digest:
                    return False
    return True


def _read_config_file(path_str: str) -> dict:
    """TOML key overrides; the bare name `default.toml` falls back to the
    packaged defaults so the shipped invocation works from any directory."""
    path = Path(path_str)
    if path.exists():
        return tomllib.loads(path.read_text())
    if path_str == "default.toml":
        return {}
    raise ValueError(f"config file not found: {path_str}")


def _worker_count() -> int:
    raw = os.environ.get("RIESZ_EP_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(
            f"RIESZ_EP_THREADS must be a nonnegative integer, got {raw!r}"
        ) from None
    if value < 0:
        raise ValueError(
            f"RIESZ_EP_THREADS must be a nonnegative integer, got {raw!r}"
        )
    return value if value > 0 else (os.cpu_count() or 1)


def _summarize(cases: list[dict]) -> dict:
    passed = sum(1 for c in cases if c["pass"])
    return {
        "cases": len(cases),
        "passed": passed,
        "failed": len(cases) - passed,
        "pass": passed == len(cases),
    }


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise ValueError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# subcommands


def _cmd_riesz(args, argv: list[str]) -> int:
    started = time.monotonic()
    inp = _require_file(Path(args.input), "input grid")
    f = read_grid(inp)
    apply_op = riesz_apply_direct if args.method == "direct" else riesz_apply_fast
    g = apply_op(f, args.alpha)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_grid(g, out)
    _update_manifest(
        out.parent, argv, config={"alpha": args.alpha, "method": args.method},
        seed=None, inputs=[inp], outputs=[out], started=started,
    )
    print(f"fractional integral (alpha={args.alpha:g}, {args.method}) -> {out}")
    return 0


def _cmd_hls_test(args, argv: list[str]) -> int:
    started = time.monotonic()
    defaults = load_default_config()
    n = int(defaults["n"]) if args.n is None else args.n
    half_width = float(defaults["L"]) if args.L is None else args.L
    seed = int(defaults["seed"]) if args.seed is None else args.seed
    data = corpus(GridSpec(args.d, n, half_width), seed, args.trials)
    rep = check_hls_family(args.d, args.alpha, args.p, data)
    cases = [c.as_dict() for c in rep.cases]
    payload = {
        "suite": "hls-test",
        "seed": seed,
        "params": {
            "d": args.d, "alpha": args.alpha, "p": args.p,
            "trials": args.trials, "n": n, "L": half_width,
        },
        "cases": cases,
        "details": {rep.name: rep.extras},
        "summary": _summarize(cases),
    }
    report = Path(args.report)
    report.parent.mkdir(parents=True, exist_ok=True)
    _dump_json(report, payload)
    _update_manifest(
        report.parent, argv, config=payload["params"], seed=seed,
        inputs=[], outputs=[report], started=started,
    )
    summary = payload["summary"]
    print(
        f"{rep.name}: {summary['passed']}/{summary['cases']} cases pass, "
        f"largest ratio {rep.empirical_constant:.4g}"
    )
    return 0 if summary["pass"] else 1


def _cmd_simulate(args, argv: list[str]) -> int:
    started = time.monotonic()
    cfg = resolve_config(_read_config_file(args.config))
    sc = scenario_from_config(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    traj = run_scenario(sc)

    outputs: list[Path] = []
    ledger_path = out_dir / "ledger.csv"
    lines = ["t,mass,kinetic,potential,total"]
    for led in traj.ledgers:
        lines.append(",".join(
            repr(v) for v in (led.t, led.mass, led.kinetic, led.potential,
                              led.total)
        ))
    ledger_path.write_text("\n".join(lines) + "\n")
    outputs.append(ledger_path)

    for k, state in enumerate(traj.states):
        rho_path = out_dir / f"frame_{k:04d}.rho.bin"
        write_grid(state.rho, rho_path)
        outputs.append(rho_path)
        for i in range(sc.spec.d):
            m_path = out_dir / f"frame_{k:04d}.m{i}.bin"
            write_grid(GridFunction(sc.spec, state.m.values[i]), m_path)
            outputs.append(m_path)

    led0, led1 = traj.ledgers[0], traj.ledgers[-1]
    summary = {
        "status": traj.status,
        "steps": traj.steps,
        "final_time": traj.times[-1],
        "outputs": len(traj.times),
        "mass_initial": led0.mass,
        "mass_final": led1.mass,
        "mass_drift_rel": abs(led1.mass - led0.mass) / abs(led0.mass),
        "energy_initial": led0.total,
        "energy_final": led1.total,
        "energy_drift_rel": (led1.total - led0.total) / abs(led0.total),
        "clipped_mass": traj.clipped_mass,
    }
    summary_path = out_dir / "summary.json"
    _dump_json(summary_path, summary)
    outputs.append(summary_path)

    _update_manifest(
        out_dir, argv, config=dict(cfg), seed=int(cfg["seed"]),
        inputs=[Path(args.config)] if Path(args.config).exists() else [],
        outputs=outputs, started=started,
    )
    print(
        f"{traj.status} after {traj.steps} steps; mass drift "
        f"{summary['mass_drift_rel']:.3e}, energy drift "
        f"{summary['energy_drift_rel']:.3e} -> {out_dir}"
    )
    return 0 if traj.completed else 1


def _cmd_verify(args, argv: list[str]) -> int:
    started = time.monotonic()
    user = _read_config_file(args.config)
    session = VerificationSession(user)
    session.prefetch(args.suite, _worker_count())
    report = session.run(args.suite)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _dump_json(out, report)
    _update_manifest(
        out.parent, argv, config=report["config"], seed=report["seed"],
        inputs=[Path(args.config)] if Path(args.config).exists() else [],
        outputs=[out], started=started,
    )

    summary = report["summary"]
    print(
        f"suite {args.suite}: {summary['passed']}/{summary['cases']} "
        f"cases pass"
    )
    for case in report["cases"]:
        if not case["pass"]:
            print(f"  FAIL {case['name']}: lhs={case['lhs']:.6e} "
                  f"rhs={case['rhs']:.6e} slack={case['slack']:.2e}")
    print("PASS" if summary["pass"] else "FAIL")
    return 0 if summary["pass"] else 1


def _cmd_mollify(args, argv: list[str]) -> int:
    started = time.monotonic()
    inp = _require_file(Path(args.input), "input grid")
    f = read_grid(inp)
    phi, result = mollify_approximate(f, args.gamma, args.epsilon)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_grid(phi, out)
    payload = {
        "gamma": args.gamma,
        "epsilon": args.epsilon,
        "delta": result.spec.delta,
        "truncation_radius": result.spec.truncation_radius,
        "range_level": result.range_level,
        "l1_error": result.l1_error,
        "lgamma_error": result.lgamma_error,
        "combined": result.combined,
        "ladder": [[d, c] for d, c in result.ladder],
        "pass": result.combined < args.epsilon,
    }
    report = Path(args.report)
    report.parent.mkdir(parents=True, exist_ok=True)
    _dump_json(report, payload)
    _update_manifest(
        out.parent, argv,
        config={"gamma": args.gamma, "epsilon": args.epsilon},
        seed=None, inputs=[inp], outputs=[out, report], started=started,
    )
    print(
        f"combined error {result.combined:.4e} < {args.epsilon:g} at "
        f"mollification radius {result.spec.delta:g} -> {out}"
    )
    return 0


def _read_ledger_csv(path: Path) -> dict[str, list[float]]:
    lines = path.read_text().strip().splitlines()
    if not lines:
        raise ValueError(f"ledger file is empty: {path}")
    header = lines[0].split(",")
    columns: dict[str, list[float]] = {name: [] for name in header}
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"malformed ledger row in {path}: {line!r}")
        for name, value in zip(header, parts):
            columns[name].append(float(value))
    return columns


def _cmd_report(args, argv: list[str]) -> int:
    started = time.monotonic()
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise ValueError(f"run directory not found: {run_dir}")
    ledger_path = run_dir / "ledger.csv"
    report_path = run_dir / "report.json"
    missing = [p.name for p in (ledger_path, report_path) if not p.is_file()]
    if missing:
        raise ValueError(
            f"run directory {run_dir} is missing artifacts: "
            f"{', '.join(missing)}"
        )

    columns = _read_ledger_csv(ledger_path)
    if "t" not in columns or "total" not in columns:
        raise ValueError(f"ledger {ledger_path} lacks t/total columns")
    report = json.loads(report_path.read_text())
    gron = report.get("details", {}).get("gronwall")
    if gron is None:
        raise ValueError(
            "report.json carries no envelope data; write a gronwall-suite "
            "report into this directory first"
        )

    times = [float(v) for v in gron["times"]]
    psi = [float(v) for v in gron["psi"]]
    c_ap = float(gron["c_apriori"])
    t_ledger = columns["t"]
    h_series = columns["total"]
    if len(times) != len(t_ledger) or any(
        abs(a - b) > 1e-12 * max(1.0, abs(a)) for a, b in zip(times, t_ledger)
    ):
        raise ValueError("ledger and report cover different output grids")

    envelope = [math.exp(c_ap * t) * psi[0] for t in times]
    t_arr = np.asarray(times)
    h_arr = np.asarray(h_series)
    h_cum = np.concatenate(
        [[0.0], np.cumsum((h_arr[1:] + h_arr[:-1]) / 2.0 * np.diff(t_arr))]
    )
    elapsed = t_arr - t_arr[0]
    h_bar = np.divide(
        h_cum, elapsed, out=np.full_like(h_arr, h_arr[0]), where=elapsed > 0.0
    )

    csv_path = run_dir / "series.csv"
    rows = ["t,Psi,exp(C_ap t)*Psi0,H,Hbar"]
    for k in range(len(times)):
        rows.append(",".join(
            repr(v) for v in (times[k], psi[k], envelope[k], h_series[k],
                              float(h_bar[k]))
        ))
    csv_path.write_text("\n".join(rows) + "\n")

    merged_path = run_dir / "consolidated.json"
    _dump_json(merged_path, {
        "ledger": columns,
        "report": report,
        "series": {
            "t": times,
            "psi": psi,
            "envelope": envelope,
            "h": h_series,
            "h_bar": [float(v) for v in h_bar],
        },
    })

    _update_manifest(
        run_dir, argv, config=None, seed=report.get("seed"),
        inputs=[ledger_path, report_path],
        outputs=[csv_path, merged_path], started=started,
    )
    print(f"rendered {csv_path} and {merged_path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riesz-ep",
        description=(
            "Pressure-driven flows with fractional-potential repulsion: "
            "simulation runs and verification suites for the energy "
            "identities and stability inequalities they must satisfy."
        ),
        epilog=CONFIG_KEY_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "riesz", help="apply the fractional-integral operator to a grid file"
    )
    p.add_argument("--alpha", type=float, required=True,
                   help="order of the fractional integral, 0 < alpha < d")
    p.add_argument("--input", required=True,
                   help="input grid file (RIESZ-EP GRID v1)")
    p.add_argument("--output", required=True, help="output grid file")
    p.add_argument("--method", choices=("direct", "fast"), default="fast",
                   help="direct double sum (quadratic cost) or zero-padded "
                        "convolution (default)")
    p.set_defaults(handler=_cmd_riesz)

    p = sub.add_parser(
        "hls-test",
        help="sharp-exponent inequality family on a seeded profile corpus",
    )
    p.add_argument("--d", type=int, default=3, help="spatial dimension")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="fractional-integral order")
    p.add_argument("--p", type=float, default=1.2,
                   help="Lebesgue exponent, 1 < p < d/alpha")
    p.add_argument("--trials", type=int, default=50, help="corpus size")
    p.add_argument("--report", default="hls.json", help="report JSON path")
    p.add_argument("--n", type=int, default=None,
                   help="cells per axis (default from packaged config)")
    p.add_argument("--L", type=float, default=None,
                   help="box half-width (default from packaged config)")
    p.add_argument("--seed", type=int, default=None,
                   help="corpus seed (default from packaged config)")
    p.set_defaults(handler=_cmd_hls_test)

    p = sub.add_parser(
        "simulate", help="integrate one scenario and dump its artifacts"
    )
    p.add_argument("--config", default="default.toml",
                   help="TOML config; keys listed at the bottom of --help")
    p.add_argument("--out", required=True, help="run output directory")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser(
        "verify", help="run a verification suite and write its report"
    )
    p.add_argument("--suite", required=True, choices=SUITES,
                   help="which suite to run")
    p.add_argument("--config", default="default.toml",
                   help="TOML config; keys listed at the bottom of --help")
    p.add_argument("--out", default="report.json", help="report JSON path")
    p.set_defaults(handler=_cmd_verify)

    p = sub.add_parser(
        "mollify",
        help="smooth compactly supported approximant of a grid function",
    )
    p.add_argument("--input", required=True, help="input grid file")
    p.add_argument("--gamma", type=float, required=True,
                   help="Lebesgue exponent of the combined error gauge")
    p.add_argument("--epsilon", type=float, required=True,
                   help="target for ||f-phi||_1 + ||f-phi||_gamma^gamma")
    p.add_argument("--output", required=True, help="output grid file")
    p.add_argument("--report", default="mollify.json",
                   help="report JSON path")
    p.set_defaults(handler=_cmd_mollify)

    p = sub.add_parser(
        "report",
        help="merge a run directory's ledger and check report into "
             "consolidated JSON and plot-ready CSV",
    )
    p.add_argument("--run", required=True, help="run directory to render")
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage; 2 on error, 0 on --help
        return int(exc.code or 0)
    try:
        return args.handler(args, argv)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
