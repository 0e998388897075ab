import json
import subprocess
import sys

import numpy as np
import pytest

from ilwlab import cli
from ilwlab.errors import ConfigurationError, FormatError
from ilwlab.evolution import EvolutionConfig, evolve
from ilwlab.experiments import ExperimentReport, qdelta_scan
from ilwlab.io import (
    DIAGNOSTIC_HEADER,
    REPORT_HEADER,
    SCHEMA_VERSION,
    TRAJECTORY_HEADER,
    format_float,
    read_report,
    report_rows,
    trajectory_rows,
    write_csv,
    write_report,
)
from ilwlab.normalform import RatioReport
from ilwlab.spectral import field_from_function, make_grid


def _synthetic():
    return ExperimentReport(
        "synthetic",
        "delta",
        [1.0, 2.0, 4.0],
        [0.5, 0.25, 0.125],
        metrics={"aux": [1.0, 2.0, 3.0]},
        slopes={"s": -1.0},
        scalars={"c": 1e-300},
        criteria={"dec": {"kind": "decreasing"}},
        provenance={"seed": 0, "note": "x"},
    ).finalize()


class TestGolden:
    def test_headers(self):
        assert ",".join(TRAJECTORY_HEADER) == "t,n,re_c,im_c"
        assert ",".join(DIAGNOSTIC_HEADER) == "t,metric,value"
        assert ",".join(REPORT_HEADER) == "param,error,slope_window"

    def test_report_csv_body(self, tmp_path):
        path = write_csv(tmp_path / "r.csv", REPORT_HEADER, report_rows([1.0, 2.0], [1.0, 0.25]))
        assert path.read_text() == "param,error,slope_window\n1.0,1.0,\n2.0,0.25,-2.0\n"

    def test_format_float(self):
        assert format_float(0.1) == "0.1"
        assert format_float(3) == "3"
        assert format_float(float("nan")) == "nan"
        assert float(format_float(1 / 3)) == 1 / 3

    def test_row_width_checked(self, tmp_path):
        with pytest.raises(FormatError):
            write_csv(tmp_path / "x.csv", REPORT_HEADER, [(1.0, 2.0)])

    def test_trajectory_rows(self):
        g = make_grid(8)
        traj = evolve(field_from_function(np.cos, g), EvolutionConfig("bo", g, 0.1, 0.2))
        rows = list(trajectory_rows(traj))
        assert len(rows) == 3 * 8
        assert [r[1] for r in rows[:8]] == list(range(-4, 4))


class TestReportIO:
    def test_roundtrip(self, tmp_path):
        rep = _synthetic()
        back = read_report(write_report(rep, tmp_path / "r.json"))
        assert back == rep

    def test_roundtrip_real_experiment(self, tmp_path):
        rep = qdelta_scan(s_list=(0.0,), delta_list=(1.0, 2.0), n_modes=32)
        assert read_report(write_report(rep, tmp_path / "q.json")) == rep

    def test_ratio_roundtrip(self, tmp_path):
        rep = RatioReport("N1_0", "M", (4, 8), (1.0, 0.5), (0.9, 0.4), -1.0, -0.125, 100, 0, 32, 0.2, 0.0)
        assert read_report(write_report(rep, tmp_path / "n.json")) == rep

    def test_truncated(self, tmp_path):
        path = write_report(_synthetic(), tmp_path / "r.json")
        text = path.read_text()
        path.write_text(text[: len(text) // 2])
        with pytest.raises(FormatError):
            read_report(path)

    def test_nan_rejected(self, tmp_path):
        rep = _synthetic()
        rep.scalars["c"] = float("nan")
        with pytest.raises(FormatError):
            write_report(rep, tmp_path / "bad.json")
        assert not (tmp_path / "bad.json").exists()
        assert list(tmp_path.iterdir()) == []

    def test_version_mismatch(self, tmp_path):
        path = write_report(_synthetic(), tmp_path / "r.json")
        data = json.loads(path.read_text())
        data["schema_version"] = SCHEMA_VERSION + 1
        path.write_text(json.dumps(data))
        with pytest.raises(FormatError):
            read_report(path)

    def test_missing_field(self, tmp_path):
        path = write_report(_synthetic(), tmp_path / "r.json")
        data = json.loads(path.read_text())
        del data["report"]["errors"]
        path.write_text(json.dumps(data))
        with pytest.raises(FormatError):
            read_report(path)

    def test_verdicts_recomputable(self, tmp_path):
        from ilwlab.experiments import evaluate

        back = read_report(write_report(_synthetic(), tmp_path / "r.json"))
        assert evaluate(back) == back.verdicts


class TestParse:
    def test_defaults_and_override(self, tmp_path, monkeypatch):
        monkeypatch.delenv(cli.OUT_DIR_ENV, raising=False)
        cfg = tmp_path / "c.cfg"
        cfg.write_text("# comment\ns = 0.1\np = 2\n")
        cmd, p, _ = cli.parse_config(["exponents", f"config={cfg}", "s=0.3"])
        assert cmd == "exponents" and p["s"] == 0.3 and p["p"] == 2.0
        assert p["seed"] == 0 and p["out_dir"] == "ilwlab_out"

    def test_env_out_dir(self, monkeypatch):
        monkeypatch.setenv(cli.OUT_DIR_ENV, "/tmp/somewhere")
        assert cli.parse_config(["qscan"])[1]["out_dir"] == "/tmp/somewhere"

    def test_unknown_key_listed(self):
        with pytest.raises(ConfigurationError, match="bogus"):
            cli.parse_config(["qscan", "bogus=1"])

    def test_unknown_command(self):
        with pytest.raises(cli.UsageError):
            cli.parse_config(["fly"])
        with pytest.raises(cli.UsageError):
            cli.parse_config([])

    def test_bad_value(self):
        with pytest.raises(ConfigurationError):
            cli.parse_config(["simulate", "dt=fast"])


class TestMain:
    def test_exponents_output(self, capsys, tmp_path):
        assert cli.main(["exponents", "s=0.25", "p=4", f"out_dir={tmp_path}"]) == 0
        out = capsys.readouterr().out
        assert "alpha=0.0625" in out and "beta=-0.09375" in out and "s0=0.127718676" in out

    def test_config_errors_exit_2(self, tmp_path):
        assert cli.main(["simulate", "dt=0.1", "t_final=0.01", f"out_dir={tmp_path}"]) == 2
        assert cli.main(["nope"]) == 2
        assert cli.main(["qscan", "colour=red"]) == 2

    def test_simulate_outputs(self, tmp_path):
        args = ["simulate", "equation=bo", "grid.n=16", "dt=0.01", "t_final=0.05", "stride=1", f"out_dir={tmp_path}"]
        assert cli.main(args) == 0
        traj = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert traj[0] == "t,n,re_c,im_c" and len(traj) == 1 + 6 * 16
        assert (tmp_path / "diagnostics.csv").read_text().startswith("t,metric,value\n")
        assert (tmp_path / "verdict").read_text() == "pass\n"
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["status"] == "ok" and "trajectory.csv" in man["outputs"]
        assert man["config"]["equation"] == "bo"

    def test_deterministic_csv(self, tmp_path):
        base = ["qscan", "grid.n=32", "s_list=0,0.25", "deltas=1,2,4"]
        assert cli.main(base + [f"out_dir={tmp_path / 'a'}"]) == 0
        assert cli.main(base + [f"out_dir={tmp_path / 'b'}"]) == 0
        for name in ("qscan.csv", "qscan.report.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_report_csv_rows(self, tmp_path):
        args = ["deepwater", "grid.n=32", "dt=0.01", "t_final=0.1", "deltas=1,2,4", "linear=true", f"out_dir={tmp_path}"]
        cli.main(args)
        rows = (tmp_path / "deepwater.csv").read_text().splitlines()
        assert rows[0] == "param,error,slope_window" and len(rows) == 4

    def test_divergence_exit_3(self, tmp_path):
        args = [
            "simulate", "equation=kdv", "grid.n=16", "dt=0.2", "t_final=20", "amplitude=40",
            "dealias=false", f"out_dir={tmp_path}",
        ]
        assert cli.main(args) == 3
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["status"] == "diverged" and man["summary"]["partial"] is True
        assert (tmp_path / "verdict").read_text() == "diverged\n"

    def test_failed_verdict_exit_1(self, tmp_path):
        args = ["nf-audit", "operator=N1_0", "grid.n=32", "params=4,8", "n_samples=100", "slack=-10", f"out_dir={tmp_path}"]
        assert cli.main(args) == 1
        assert (tmp_path / "verdict").read_text() == "fail\n"

    def test_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "ilwlab.cli", "exponents", f"out_dir={tmp_path}"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0 and proc.stdout.startswith("alpha=")
