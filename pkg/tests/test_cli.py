import json
import subprocess
import sys
from pathlib import Path

import pytest

from toruscan.cli import main


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDetect:
    def test_single_seed_json(self, capsys):
        code, out, _ = run_cli(
            ["detect", "--mu", "0.1", "--seeds", "1.5:0.5", "--t-out", "10"], capsys
        )
        assert code == 0
        data = json.loads(out)
        assert data["format"] == "toruscan.detect.v1"
        r = data["results"][0]
        assert r["classification"] == "Nonexistence"
        assert 0.0 < r["t_detect"] <= 10.0
        assert r["q"] == pytest.approx(r["t_detect"] / 10.0)

    def test_symmetric_formulation_flag(self, capsys):
        code, out, _ = run_cli(
            [
                "detect",
                "--mu",
                "0.1",
                "--seeds",
                "1.5:0.5",
                "--formulation",
                "symmetric",
                "--t-out",
                "10",
            ],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["results"][0]["classification"] == "Nonexistence"

    def test_missing_seeds_is_config_error(self, capsys):
        code, _, err = run_cli(["detect", "--mu", "0.1"], capsys)
        assert code == 2
        payload = json.loads(err)
        assert payload["error"] == "ConfigError"
        assert any("seed" in m for m in payload["messages"])


class TestScan:
    def test_writes_csv_json_png(self, tmp_path, capsys):
        prefix = str(tmp_path / "run")
        code, _, _ = run_cli(
            [
                "scan",
                "--mu",
                "0.1",
                "--n-r",
                "5",
                "--n-L",
                "5",
                "--t-out",
                "2",
                "--out",
                prefix,
                "--png",
                "--ratios",
                "9/4",
            ],
            capsys,
        )
        assert code == 0
        assert (tmp_path / "run.csv").exists()
        assert (tmp_path / "run.json").exists()
        assert (tmp_path / "run.png").exists()
        lines = (tmp_path / "run.csv").read_text().strip().splitlines()
        data_lines = [ln for ln in lines if not ln.startswith("#")]
        assert len(data_lines) == 26
        assert any(ln.startswith("# config:") for ln in lines)
        data = json.loads((tmp_path / "run.json").read_text())
        assert any(o["label"] == "resonance 9/4" for o in data["overlays"])

    def test_fixed_step_csv_identical_across_worker_flags(self, tmp_path, capsys):
        texts = []
        for k, workers in enumerate(("1", "2")):
            prefix = str(tmp_path / f"w{k}")
            code, _, _ = run_cli(
                [
                    "scan",
                    "--mu",
                    "0.1",
                    "--n-r",
                    "4",
                    "--n-L",
                    "4",
                    "--t-out",
                    "2",
                    "--fixed-step",
                    "--h-init",
                    "0.02",
                    "--workers",
                    workers,
                    "--out",
                    prefix,
                ],
                capsys,
            )
            assert code == 0
            texts.append((tmp_path / f"w{k}.csv").read_bytes())
        assert texts[0] == texts[1]

    def test_stdout_json_without_out(self, capsys):
        code, out, _ = run_cli(
            ["scan", "--n-r", "3", "--n-L", "3", "--t-out", "1"], capsys
        )
        assert code == 0
        assert json.loads(out)["format"] == "toruscan.scan.v1"

    def test_config_file_with_cli_override(self, tmp_path, capsys):
        cfgfile = tmp_path / "c.cfg"
        cfgfile.write_text(
            "command = scan\nmu = 0.1\nn_r = 4\nn_L = 4\nt_out = 5\n"
        )
        code, out, _ = run_cli(
            ["scan", "--config", str(cfgfile), "--t-out", "1"], capsys
        )
        assert code == 0
        data = json.loads(out)
        assert data["metadata"]["t_out"] == 1.0
        assert len(data["r_values"]) == 4


class TestOtherCommands:
    def test_pendulum_sweep(self, capsys):
        code, out, _ = run_cli(
            [
                "pendulum",
                "--p0-min",
                "0.5",
                "--p0-max",
                "2.5",
                "--n-p0",
                "3",
                "--t-out",
                "60",
                "--rel-tol",
                "1e-8",
                "--abs-tol",
                "1e-10",
            ],
            capsys,
        )
        assert code == 0
        results = json.loads(out)["results"]
        assert [r["classification"] for r in results] == [
            "Nonexistence",
            "Nonexistence",
            "Undetermined",
        ]

    def test_overlays_blocks(self, capsys):
        code, out, _ = run_cli(
            ["overlays", "--mu", "0.0", "--ratios", "2,9/4", "--curve-samples", "16"],
            capsys,
        )
        assert code == 0
        assert "# curve: resonance 2" in out
        assert "# curve: resonance 9/4" in out
        assert "# curve: crossing-boundary(+)" in out

    def test_section_csv(self, tmp_path, capsys):
        prefix = str(tmp_path / "sec")
        code, _, err = run_cli(
            [
                "section",
                "--mu",
                "0.0",
                "--seeds",
                "1.2:1.0",
                "--n-returns",
                "2",
                "--t-out",
                "40",
                "--out",
                prefix,
            ],
            capsys,
        )
        assert code == 0
        text = (tmp_path / "sec.csv").read_text()
        assert text.startswith("# seed: r=1.2 L=1.0")
        assert "t,x,y,v_x,v_y,r,L" in text
        summary = json.loads(err)
        assert summary["results"][0]["n_crossings"] == 2

    def test_lyapunov(self, capsys):
        code, out, _ = run_cli(
            ["lyapunov", "--mu", "0.1", "--seeds", "1.05:-0.5", "--t-out", "20"],
            capsys,
        )
        assert code == 0
        r = json.loads(out)["results"][0]
        assert r["lyapunov"] is not None

    def test_invalid_flag_value(self, capsys):
        code, _, err = run_cli(["scan", "--plane", "sideways"], capsys)
        assert code == 2
        assert "plane" in json.loads(err)["messages"][0]


class TestEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "toruscan.cli", "--version"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.strip() == "0.1.0"
