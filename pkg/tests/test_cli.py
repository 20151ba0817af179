"""Tests for the CLI client: argument handling, file writing, exit codes."""

import pytest

from semiflow_lab.cli import _detail_record, _parse_eps, build_parser, main
from semiflow_lab.errors import ConfigError

FAST_TEXT = """\
[model]
lambda_influx = 1.0
mu = 0.1
beta_I = 0.5
beta_J = 0.0
nu_I = 0.5
nu_J = 0.2

[profile]
kappa = 0.643
rate = 0.156

[grid]
da = 0.1
a_max = 140.0

[sim]
horizon = 120

[sweep]
initials = 2
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "fast.cfg"
    path.write_text(FAST_TEXT)
    return path


# --- parser ------------------------------------------------------------------


class TestParser:
    def test_all_commands_present(self):
        parser = build_parser()
        for name in (
            "r0",
            "equilibria",
            "simulate",
            "crosscheck",
            "spectrum",
            "lyapunov",
            "fit",
            "sweep",
            "extinction",
            "serve",
        ):
            args = parser.parse_args(
                [name] if name == "serve" else [name, "--config", "x.cfg"]
            )
            assert args.command == name

    def test_config_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["r0"])

    def test_eps_parsing(self):
        assert _parse_eps("0,1e-3, 1e-2") == [0.0, 1e-3, 1e-2]
        with pytest.raises(ConfigError) as info:
            _parse_eps("0,fast")
        assert info.value.key == "eps"


# --- happy paths ---------------------------------------------------------------


class TestRun:
    def test_r0_writes_summary(self, config_path, tmp_path, capsys):
        out = tmp_path / "results"
        code = main(["r0", "--config", str(config_path), "--out", str(out)])
        assert code == 0
        assert (out / "summary.json").exists()
        assert '"R0"' in (out / "summary.json").read_text()
        status = capsys.readouterr().out
        assert status.startswith("r0: ok")
        assert str(out / "summary.json") in status

    def test_out_dir_defaults_to_config(self, config_path, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code = main(["r0", "--config", str(config_path)])
        assert code == 0
        assert (tmp_path / "out" / "summary.json").exists()

    def test_eps_override_controls_rows(self, config_path, tmp_path):
        out = tmp_path / "sweep_out"
        code = main(
            [
                "sweep",
                "--config",
                str(config_path),
                "--out",
                str(out),
                "--eps",
                "0,1e-3",
            ]
        )
        assert code == 0
        raw = (out / "sweep.csv").read_bytes().decode()
        rows = raw.strip().split("\r\n")
        assert len(rows) == 1 + 2

    def test_horizon_override(self, config_path, tmp_path):
        out = tmp_path / "short"
        code = main(
            [
                "simulate",
                "--config",
                str(config_path),
                "--out",
                str(out),
                "--horizon",
                "5",
            ]
        )
        assert code == 0
        assert '"horizon": 5' in (out / "summary.json").read_text()

    def test_reruns_are_byte_identical(self, config_path, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            code = main(
                ["simulate", "--config", str(config_path), "--out", str(out)]
            )
            assert code == 0
        for name in ("summary.json", "trajectory.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


# --- failure paths -------------------------------------------------------------


class TestFailures:
    def test_verdict_failure_exits_2(self, config_path, tmp_path, capsys):
        out = tmp_path / "failed"
        code = main(
            [
                "sweep",
                "--config",
                str(config_path),
                "--out",
                str(out),
                "--eps",
                "0",
                "--horizon",
                "5",
            ]
        )
        assert code == 2
        status = capsys.readouterr().out
        assert "verdict failure" in status
        assert "all_rows" in status
        assert (out / "sweep.csv").exists()

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["r0", "--config", str(tmp_path / "none.cfg")])
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error kind=io")

    def test_config_error_record(self, tmp_path, capsys):
        path = tmp_path / "broken.cfg"
        path.write_text(FAST_TEXT.replace("mu = 0.1", "mew = 0.1"))
        code = main(["r0", "--config", str(path)])
        assert code == 1
        err = capsys.readouterr().err.strip()
        assert err.startswith("error kind=config")
        assert "key=mew" in err
        assert "line=3" in err

    def test_bad_eps_list(self, config_path, capsys):
        code = main(["sweep", "--config", str(config_path), "--eps", "0,fast"])
        assert code == 1
        err = capsys.readouterr().err
        assert "kind=config" in err
        assert "key=eps" in err

    def test_unreachable_server(self, config_path, capsys):
        code = main(
            ["r0", "--config", str(config_path), "--server", "http://127.0.0.1:9"]
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("error kind=transport")

    def test_detail_record_rendering(self):
        record = _detail_record(
            {"kind": "config", "key": "mu", "line": 3, "message": "bad"}
        )
        assert record == "error kind=config key=mu line=3 message=bad"
        assert _detail_record("gateway text").startswith("error kind=unexpected")
        assert _detail_record({"message": "x"}).startswith("error kind=unexpected")
