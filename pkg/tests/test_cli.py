"""Tests for the command-line frontend and its exit codes."""

import json

import pytest

from rigidlid.cli import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, main
from rigidlid.solver import read_header

RUN_CONFIG = {
    "model": {"kind": "classical", "dim": 1, "eps": 0.1},
    "grid": {"dim": 1, "modes_per_axis": 64, "length_per_axis": 32.0},
    "t_end": 0.1,
}


def _write_config(tmp_path, config, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return path


class TestSimulate:
    def test_run_writes_trajectory(self, tmp_path, capsys):
        config = _write_config(tmp_path, RUN_CONFIG)
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(config), "--out", str(out)]) == EXIT_OK
        assert (out / "resolved_config.json").exists()
        header = read_header(out / "trajectory" / "header.txt")
        assert header["model.kind"] == "classical"
        assert "snapshots written" in capsys.readouterr().out

    def test_zero_horizon(self, tmp_path):
        config = _write_config(tmp_path, {**RUN_CONFIG, "t_end": 0.0})
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(config), "--out", str(out)]) == EXIT_OK
        assert read_header(out / "trajectory" / "header.txt")["snapshot_count"] == "1"

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "model": \n}')
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_CONFIG
        assert f"{path}:3:1" in capsys.readouterr().out
        assert not (tmp_path / "out").exists()

    def test_unknown_key(self, tmp_path, capsys):
        config = _write_config(tmp_path, {**RUN_CONFIG, "bogus": 1})
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_CONFIG
        assert "bogus" in capsys.readouterr().out

    def test_dimension_mismatch(self, tmp_path, capsys):
        config = _write_config(
            tmp_path,
            {**RUN_CONFIG, "model": {"kind": "abcd", "dim": 2, "eps": 0.1, "abcd": {"a": 0.0, "b": 0.3333333333333333, "c": 0.0, "d": 0.3333333333333333}}},
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(config), "--out", str(out)]) == EXIT_CONFIG
        assert "does not match grid.dim" in capsys.readouterr().out
        assert not out.exists()

    def test_snapshot_beyond_horizon(self, tmp_path, capsys):
        config = _write_config(tmp_path, {**RUN_CONFIG, "solver": {"snapshot_times": [0.0, 0.05, 0.5]}})
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(config), "--out", str(out)]) == EXIT_CONFIG
        assert "beyond t_end" in capsys.readouterr().out
        assert not out.exists()

    def test_missing_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG

    def test_depth_floor_abort(self, tmp_path, capsys):
        config = _write_config(
            tmp_path,
            {
                "model": {"kind": "green_naghdi", "dim": 1, "eps": 1.0, "h0": 0.5},
                "grid": {"dim": 1, "modes_per_axis": 64, "length_per_axis": 32.0},
                "initial": {"zeta_amplitude": -0.6},
                "t_end": 0.02,
            },
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(config), "--out", str(out)]) == EXIT_ABORT
        assert "depth floor violated" in capsys.readouterr().out
        assert not (out / "trajectory").exists()

    def test_repeatable(self, tmp_path):
        config = _write_config(tmp_path, {**RUN_CONFIG, "initial": {"noise_amplitude": 0.05, "seed": 11}})
        for name in ("a", "b"):
            assert main(["simulate", "--config", str(config), "--out", str(tmp_path / name)]) == EXIT_OK
        first = (tmp_path / "a" / "trajectory" / "snapshots.bin").read_bytes()
        second = (tmp_path / "b" / "trajectory" / "snapshots.bin").read_bytes()
        assert first == second

    def test_writes_only_under_out(self, tmp_path, monkeypatch):
        cwd = tmp_path / "cwd"
        cwd.mkdir()
        monkeypatch.chdir(cwd)
        config = _write_config(tmp_path, RUN_CONFIG)
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_OK
        assert list(cwd.iterdir()) == []
        assert sorted(p.name for p in tmp_path.iterdir()) == ["cwd", "out", "run.json"]


class TestPhase:
    def test_classical(self, tmp_path, capsys):
        out = tmp_path / "phase"
        assert main(["phase", "--abcd", "0", "0", "0", "0.3333333333333333", "--out", str(out)]) == EXIT_OK
        assert "p=3" in capsys.readouterr().out
        record = json.loads((out / "phase.json").read_text())
        assert record["classification"]["p0"] == 1

    def test_negative_coefficients(self, tmp_path):
        out = tmp_path / "phase"
        assert main(["phase", "--abcd", "-0.1666666666666667", "0.5", "-0.3333333333333333", "0", "--out", str(out)]) == EXIT_OK
        assert json.loads((out / "phase.json").read_text())["classification"]["sum_zero"] is True

    def test_inadmissible(self, tmp_path):
        assert main(["phase", "--abcd", "0.5", "0", "0", "1", "--out", str(tmp_path / "phase")]) == EXIT_CONFIG
        assert not (tmp_path / "phase").exists()


class TestSuiteAndReport:
    def test_unknown_suite(self, tmp_path, capsys):
        assert main(["suite", "thm9.9", "--out", str(tmp_path / "out")]) == EXIT_CONFIG
        assert "unknown theorem suite" in capsys.readouterr().out

    def test_bad_override(self, tmp_path):
        assert main(["suite", "thm2.1", "--smoke", "--set", "t_end", "--out", str(tmp_path / "out")]) == EXIT_CONFIG

    def test_report_on_empty_directory(self, tmp_path):
        raw = tmp_path / "raw"
        raw.mkdir()
        assert main(["report", str(raw)]) == EXIT_CONFIG
        assert list(raw.iterdir()) == []

    def test_smoke_suite_and_rerender(self, tmp_path):
        out = tmp_path / "thm2.1"
        code = main(["suite", "thm2.1", "--smoke", "--set", "t_end=0.25", "--out", str(out)])
        assert code in (EXIT_OK, EXIT_PARTIAL)
        report = (out / "report.json").read_text()
        assert json.loads(report)["theorem_tag"] == "thm2.1"
        assert main(["report", str(out)]) == EXIT_OK
        assert (out / "report.json").read_text() == report

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert "1.0.0" in capsys.readouterr().out
