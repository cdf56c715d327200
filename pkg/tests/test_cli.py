"""Command-line contract: exit codes, artifacts, manifests, reproducibility."""

import json
import subprocess

import numpy as np
import pytest

import riesz_ep.cli as cli_mod
import riesz_ep.solver as solver_mod
from riesz_ep.cli import build_parser, main, manifest_hashes_verify
from riesz_ep.grid import GridSpec, VectorGridFunction, read_grid, write_grid
from riesz_ep.profiles import bump
from riesz_ep.riesz import riesz_apply_fast

TINY_SCENARIO = """\
n = 12
T = 0.04
cadence = 2
role = "weak"
preset = "gaussian-shear"
delta = 0.01
"""


def write_blob(path, n=16):
    spec = GridSpec(3, n, 1.0)
    f = bump(spec, (0.0, 0.0, 0.0), 0.4, 1.0)
    write_grid(f, path)
    return f


@pytest.fixture()
def scenario_toml(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text(TINY_SCENARIO)
    return path


class TestUsage:
    def test_no_arguments_prints_usage_and_exits_2(self, capsys):
        assert main([]) == 2
        assert "usage:" in capsys.readouterr().err

    def test_unknown_flag_exits_2(self, capsys):
        assert main(["riesz", "--nope"]) == 2
        assert "usage:" in capsys.readouterr().err

    def test_unknown_suite_exits_2(self):
        assert main(["verify", "--suite", "nope"]) == 2

    def test_help_documents_config_keys_and_threads(self):
        text = build_parser().format_help()
        for key in ("gamma", "cadence", "ladder_reference_n", "slack_h",
                    "RIESZ_EP_THREADS"):
            assert key in text

    def test_console_script_installed(self):
        proc = subprocess.run(["riesz-ep"], capture_output=True, text=True)
        assert proc.returncode == 2
        assert "usage:" in proc.stderr


class TestRiesz:
    def test_applies_operator_and_manifests(self, tmp_path):
        inp = tmp_path / "blob.bin"
        f = write_blob(inp)
        out = tmp_path / "pot.bin"
        rc = main(["riesz", "--alpha", "2", "--input", str(inp),
                   "--output", str(out)])
        assert rc == 0
        g = read_grid(out)
        np.testing.assert_allclose(
            g.values, riesz_apply_fast(f, 2.0).values, rtol=0.0, atol=0.0
        )
        assert manifest_hashes_verify(tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert set(manifest["runs"]) == {"riesz"}
        assert manifest["runs"]["riesz"]["config"]["alpha"] == 2.0

    def test_alpha_out_of_range_exits_2(self, tmp_path, capsys):
        inp = tmp_path / "blob.bin"
        write_blob(inp)
        rc = main(["riesz", "--alpha", "5", "--input", str(inp),
                   "--output", str(tmp_path / "out.bin")])
        assert rc == 2
        assert "alpha" in capsys.readouterr().err

    def test_missing_input_exits_2(self, tmp_path):
        rc = main(["riesz", "--alpha", "1", "--input",
                   str(tmp_path / "nope.bin"), "--output",
                   str(tmp_path / "out.bin")])
        assert rc == 2


class TestHlsTest:
    def test_report_written_and_deterministic(self, tmp_path):
        report = tmp_path / "hls.json"
        args = ["hls-test", "--d", "3", "--alpha", "1", "--p", "1.2",
                "--trials", "6", "--n", "16", "--report", str(report)]
        assert main(args) == 0
        first = report.read_bytes()
        payload = json.loads(first)
        assert payload["suite"] == "hls-test"
        assert payload["summary"]["pass"] is True
        assert payload["params"]["trials"] == 6
        assert payload["cases"]
        assert main(args) == 0
        assert report.read_bytes() == first

    def test_bad_exponent_exits_2(self, tmp_path, capsys):
        rc = main(["hls-test", "--d", "3", "--alpha", "2", "--p", "2.0",
                   "--trials", "4", "--n", "16",
                   "--report", str(tmp_path / "hls.json")])
        assert rc == 2
        assert "1 < p < d/alpha" in capsys.readouterr().err


class TestSimulate:
    def test_artifacts_and_summary(self, tmp_path, scenario_toml):
        out_dir = tmp_path / "run"
        rc = main(["simulate", "--config", str(scenario_toml),
                   "--out", str(out_dir)])
        assert rc == 0
        ledger = (out_dir / "ledger.csv").read_text().splitlines()
        assert ledger[0] == "t,mass,kinetic,potential,total"
        assert len(ledger) == 4  # header + cadence+1 output rows
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["status"] == "completed"
        assert summary["outputs"] == 3
        assert summary["mass_drift_rel"] <= 1e-12
        rho = read_grid(out_dir / "frame_0000.rho.bin")
        assert rho.spec.n == 12
        for i in range(3):
            assert (out_dir / f"frame_0002.m{i}.bin").is_file()
        assert manifest_hashes_verify(out_dir)

    def test_gamma_floor_violation_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text('n = 12\ngamma = 1.2\nrole = "weak"\n')
        rc = main(["simulate", "--config", str(cfg),
                   "--out", str(tmp_path / "run")])
        assert rc == 2
        assert "2d/(d+1)" in capsys.readouterr().err

    def test_support_margin_violation_exits_2(self, tmp_path, capsys,
                                              monkeypatch):
        def wide(spec, preset, delta):
            rho = bump(spec, (0.0,) * spec.d, 0.9 * spec.half_width, 1.0)
            return rho, VectorGridFunction.zeros(spec)

        monkeypatch.setattr(solver_mod, "initial_data", wide)
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(TINY_SCENARIO)
        rc = main(["simulate", "--config", str(cfg),
                   "--out", str(tmp_path / "run")])
        assert rc == 2
        assert "support" in capsys.readouterr().err

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "typo.toml"
        cfg.write_text("n = 12\nnn = 3\n")
        rc = main(["simulate", "--config", str(cfg),
                   "--out", str(tmp_path / "run")])
        assert rc == 2
        assert "unknown config keys: nn" in capsys.readouterr().err

    def test_missing_config_file_exits_2(self, tmp_path):
        rc = main(["simulate", "--config", str(tmp_path / "nope.toml"),
                   "--out", str(tmp_path / "run")])
        assert rc == 2


class TestVerifyCommand:
    def test_dissipativity_report_and_manifest(self, tmp_path, scenario_toml):
        out = tmp_path / "report.json"
        rc = main(["verify", "--suite", "dissipativity",
                   "--config", str(scenario_toml), "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["suite"] == "dissipativity"
        assert report["summary"]["pass"] is True
        assert all(c["name"].startswith("dissipativity/")
                   for c in report["cases"])
        assert manifest_hashes_verify(tmp_path)

    def test_report_bytes_reproduce(self, tmp_path, scenario_toml):
        out1 = tmp_path / "a" / "report.json"
        out2 = tmp_path / "b" / "report.json"
        for out in (out1, out2):
            rc = main(["verify", "--suite", "dissipativity",
                       "--config", str(scenario_toml), "--out", str(out)])
            assert rc == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_failing_suite_exits_1(self, tmp_path, monkeypatch, capsys):
        class FailingSession:
            def __init__(self, config=None):
                pass

            def prefetch(self, suite, workers):
                pass

            def run(self, suite):
                case = {"name": f"{suite}/x/y", "lhs": 2.0, "rhs": 1.0,
                        "ratio": 2.0, "slack": 0.0, "pass": False}
                return {
                    "suite": suite, "seed": 0, "config": {}, "cases": [case],
                    "details": {},
                    "summary": {"cases": 1, "passed": 0, "failed": 1,
                                "pass": False},
                }

        monkeypatch.setattr(cli_mod, "VerificationSession", FailingSession)
        monkeypatch.chdir(tmp_path)
        rc = main(["verify", "--suite", "hls",
                   "--out", str(tmp_path / "report.json")])
        assert rc == 1
        assert "FAIL" in capsys.readouterr().out

    def test_threads_env_validated(self, tmp_path, scenario_toml,
                                   monkeypatch, capsys):
        monkeypatch.setenv("RIESZ_EP_THREADS", "zebra")
        rc = main(["verify", "--suite", "dissipativity",
                   "--config", str(scenario_toml),
                   "--out", str(tmp_path / "report.json")])
        assert rc == 2
        assert "RIESZ_EP_THREADS" in capsys.readouterr().err

    def test_threads_env_accepted(self, tmp_path, scenario_toml, monkeypatch):
        monkeypatch.setenv("RIESZ_EP_THREADS", "2")
        rc = main(["verify", "--suite", "dissipativity",
                   "--config", str(scenario_toml),
                   "--out", str(tmp_path / "report.json")])
        assert rc == 0

    def test_packaged_default_fallback(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert cli_mod._read_config_file("default.toml") == {}
        local = tmp_path / "default.toml"
        local.write_text("n = 12\n")
        assert cli_mod._read_config_file("default.toml") == {"n": 12}


class TestReportCommand:
    def _render_inputs(self, tmp_path, scenario_toml):
        run_dir = tmp_path / "run"
        assert main(["simulate", "--config", str(scenario_toml),
                     "--out", str(run_dir)]) == 0
        assert main(["verify", "--suite", "gronwall",
                     "--config", str(scenario_toml),
                     "--out", str(run_dir / "report.json")]) == 0
        return run_dir

    def test_renders_series_and_consolidated(self, tmp_path, scenario_toml):
        run_dir = self._render_inputs(tmp_path, scenario_toml)
        assert main(["report", "--run", str(run_dir)]) == 0

        rows = (run_dir / "series.csv").read_text().splitlines()
        assert rows[0] == "t,Psi,exp(C_ap t)*Psi0,H,Hbar"
        assert len(rows) == 4  # header + cadence+1 output rows
        table = [list(map(float, r.split(","))) for r in rows[1:]]
        for t, psi, envelope, h, hbar in table:
            assert envelope >= psi  # a passing rate check means dominance
        assert table[0][4] == table[0][3]  # Hbar(0) is the pointwise limit

        merged = json.loads((run_dir / "consolidated.json").read_text())
        assert set(merged) == {"ledger", "report", "series"}
        assert merged["series"]["t"] == [row[0] for row in table]
        assert manifest_hashes_verify(run_dir)
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert set(manifest["runs"]) == {"simulate", "verify", "report"}

    def test_rerender_is_bitwise_idempotent(self, tmp_path, scenario_toml):
        run_dir = self._render_inputs(tmp_path, scenario_toml)
        assert main(["report", "--run", str(run_dir)]) == 0
        first_csv = (run_dir / "series.csv").read_bytes()
        first_json = (run_dir / "consolidated.json").read_bytes()
        assert main(["report", "--run", str(run_dir)]) == 0
        assert (run_dir / "series.csv").read_bytes() == first_csv
        assert (run_dir / "consolidated.json").read_bytes() == first_json

    def test_empty_run_dir_lists_missing_artifacts(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["report", "--run", str(empty)]) == 2
        err = capsys.readouterr().err
        assert "ledger.csv" in err and "report.json" in err
        assert main(["report", "--run", str(tmp_path / "nowhere")]) == 2

    def test_mismatched_output_grids_exit_2(self, tmp_path, scenario_toml,
                                            capsys):
        run_dir = tmp_path / "run"
        assert main(["simulate", "--config", str(scenario_toml),
                     "--out", str(run_dir)]) == 0
        other = tmp_path / "other.toml"
        other.write_text(TINY_SCENARIO.replace("cadence = 2", "cadence = 4"))
        assert main(["verify", "--suite", "gronwall",
                     "--config", str(other),
                     "--out", str(run_dir / "report.json")]) == 0
        assert main(["report", "--run", str(run_dir)]) == 2
        assert "different output grids" in capsys.readouterr().err

    def test_report_without_envelope_data_exits_2(self, tmp_path,
                                                  scenario_toml, capsys):
        run_dir = tmp_path / "run"
        assert main(["simulate", "--config", str(scenario_toml),
                     "--out", str(run_dir)]) == 0
        assert main(["verify", "--suite", "dissipativity",
                     "--config", str(scenario_toml),
                     "--out", str(run_dir / "report.json")]) == 0
        assert main(["report", "--run", str(run_dir)]) == 2
        assert "envelope" in capsys.readouterr().err


class TestMollifyCommand:
    def test_writes_smooth_output_and_report(self, tmp_path):
        inp = tmp_path / "blob.bin"
        write_blob(inp)
        out = tmp_path / "smooth.bin"
        report = tmp_path / "mollify.json"
        rc = main(["mollify", "--input", str(inp), "--gamma", "2",
                   "--epsilon", "0.05", "--output", str(out),
                   "--report", str(report)])
        assert rc == 0
        payload = json.loads(report.read_text())
        assert payload["pass"] is True
        assert payload["combined"] < 0.05
        assert payload["l1_error"] + payload["lgamma_error"] > 0.0
        assert read_grid(out).spec.n == 16
        assert manifest_hashes_verify(tmp_path)

    def test_unresolvable_tolerance_exits_2(self, tmp_path, capsys):
        inp = tmp_path / "blob.bin"
        write_blob(inp)
        rc = main(["mollify", "--input", str(inp), "--gamma", "2",
                   "--epsilon", "1e-12", "--output",
                   str(tmp_path / "smooth.bin"),
                   "--report", str(tmp_path / "mollify.json")])
        assert rc == 2
        assert "refine the grid" in capsys.readouterr().err
