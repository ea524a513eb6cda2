"""Command-line tests: subcommands, outputs, exit codes, determinism."""

from __future__ import annotations

import numpy as np
import pytest

from trotbench.analysis import read_history, read_trace
from trotbench.cli import cli_main
from trotbench.config import DEFAULTS, build_experiment_config, parse_config_text
from trotbench.experiment import schedule_height

QUICK_CFG = """
# quick settings for tests
trial_duration_s = 1.0
n_candidates = 256
n_local = 32
"""

REFERENCE_PARAMS_TEXT = """
x0 = 77.99391797172291
x1 = -0.08307456005155922
x2 = 0.17227550937265934
x3 = 0.4861753588049966
x4 = -0.05160482932681609
"""


@pytest.fixture()
def quick_cfg(tmp_path):
    path = tmp_path / "quick.cfg"
    path.write_text(QUICK_CFG)
    return path


@pytest.fixture()
def params_file(tmp_path):
    path = tmp_path / "params.txt"
    path.write_text(REFERENCE_PARAMS_TEXT)
    return path


class TestRunCommand:
    def test_outputs_and_schedule(self, tmp_path, quick_cfg):
        out = tmp_path / "out"
        code = cli_main([
            "run", "--condition", "red", "--iters", "6", "--seed", "7",
            "--out", str(out), "--config", str(quick_cfg),
        ])
        assert code == 0
        for name in ("history.csv", "p3_probe.csv", "metrics.txt",
                     "fitness_history.png"):
            assert (out / name).exists()
        table = read_history(out / "history.csv")
        assert list(table.iterations) == list(range(1, 7))
        expected = [schedule_height("reducing", i) for i in range(1, 7)]
        np.testing.assert_allclose(table.support_heights, expected)
        # the best iteration's trace is exported alongside
        best_iter = int(table.iterations[np.argmax(table.fitness)])
        assert (out / f"trace_iter_{best_iter}.csv").exists()

    def test_deterministic_history(self, tmp_path, quick_cfg):
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = cli_main([
                "run", "--condition", "min", "--iters", "6", "--seed", "3",
                "--out", str(out), "--config", str(quick_cfg), "--no-plots",
            ])
            assert code == 0
            blobs.append((out / "history.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_save_all_traces(self, tmp_path, quick_cfg):
        out = tmp_path / "all"
        code = cli_main([
            "run", "--condition", "none", "--iters", "5", "--seed", "1",
            "--out", str(out), "--config", str(quick_cfg),
            "--save-traces", "all", "--no-plots",
        ])
        assert code == 0
        for i in range(1, 6):
            assert (out / f"trace_iter_{i}.csv").exists()
        # no probe without a scaffold: header-only file
        assert (out / "p3_probe.csv").read_text().count("\n") == 1

    def test_config_file_iters_win_when_flag_absent(self, tmp_path):
        cfg = tmp_path / "cfg"
        cfg.write_text(QUICK_CFG + "iters = 5\nseed = 2\n")
        out = tmp_path / "out"
        code = cli_main([
            "run", "--condition", "none", "--out", str(out),
            "--config", str(cfg), "--no-plots",
        ])
        assert code == 0
        assert len(read_history(out / "history.csv").iterations) == 5

    def test_bad_condition_is_usage_error(self, tmp_path):
        assert cli_main(["run", "--condition", "max", "--out", str(tmp_path)]) == 1

    def test_bad_config_key_is_runtime_error(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("rope_thickness = 3\n")
        code = cli_main([
            "run", "--condition", "min", "--iters", "5", "--seed", "0",
            "--out", str(tmp_path / "o"), "--config", str(cfg),
        ])
        assert code == 2

    def test_partial_history_persisted_on_mid_run_failure(self, tmp_path, monkeypatch):
        import trotbench.cli as cli_module
        from trotbench.bo import ObjectiveError, run_bo_loop, ParamVector

        def dying(p: ParamVector, i: int) -> float:
            if i == 3:
                raise RuntimeError("servo melted")
            return 0.25

        def fake_run_experiment(cfg):
            run_bo_loop(dying, n_iter=5, seed=0)

        monkeypatch.setattr(cli_module, "run_experiment", fake_run_experiment)
        out = tmp_path / "crashed"
        code = cli_main([
            "run", "--condition", "min", "--iters", "5", "--seed", "0",
            "--out", str(out), "--no-plots",
        ])
        assert code == 2
        table = read_history(out / "history.csv")
        assert list(table.iterations) == [1, 2]  # iterations before the failure


class TestReplayCommand:
    def test_deterministic_trace(self, tmp_path, quick_cfg, params_file):
        blobs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            code = cli_main([
                "replay", "--params", str(params_file), "--height", "0.325",
                "--duration", "1.0", "--seed", "5", "--out", str(out),
                "--config", str(quick_cfg), "--no-plots",
            ])
            assert code == 0
            blobs.append((out / "trace.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_without_height_rope_is_disabled(self, tmp_path, params_file):
        out = tmp_path / "free"
        code = cli_main([
            "replay", "--params", str(params_file), "--duration", "1.0",
            "--seed", "0", "--out", str(out), "--no-plots",
        ])
        assert code == 0
        table = read_trace(out / "trace.csv")
        assert np.all(table.rope_tension == 0.0)

    def test_missing_param_key_is_runtime_error(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("x0 = 90\nx1 = 0\n")
        code = cli_main([
            "replay", "--params", str(bad), "--out", str(tmp_path / "o"),
        ])
        assert code == 2


class TestAnalyzeCommand:
    def test_constant_height_trace(self, tmp_path, capsys):
        path = tmp_path / "trace.csv"
        header = "t,z,roll,pitch,rope_N,hipFL,kneeFL,hipFR,kneeFR,hipRL,kneeRL,hipRR,kneeRR"
        rows = [header]
        for k in range(501):
            rows.append(",".join([f"{k * 0.01:.6e}", "3.200000000e-01"] + ["0.0"] * 11))
        path.write_text("\n".join(rows) + "\n")
        code = cli_main(["analyze", "--trace", str(path), "--duration", "5.0"])
        assert code == 0
        outp = capsys.readouterr().out
        assert "vertical_delta_m = 0.000000" in outp
        assert "dominant_period_s = none" in outp
        assert "termination = completed" in outp

    def test_truncated_trace_flagged(self, tmp_path, capsys):
        path = tmp_path / "trace.csv"
        header = "t,z,roll,pitch,rope_N,hipFL,kneeFL,hipFR,kneeFR,hipRL,kneeRL,hipRR,kneeRR"
        rows = [header]
        for k in range(100):
            rows.append(",".join([f"{k * 0.01:.6e}"] + ["0.0"] * 12))
        path.write_text("\n".join(rows) + "\n")
        code = cli_main(["analyze", "--trace", str(path), "--duration", "15.0"])
        assert code == 0
        assert "termination = truncated" in capsys.readouterr().out

    def test_missing_file_is_runtime_error(self, tmp_path):
        assert cli_main(["analyze", "--trace", str(tmp_path / "none.csv")]) == 2


class TestBoBenchCommand:
    def test_quad1d_outputs(self, tmp_path, capsys):
        out = tmp_path / "bench"
        code = cli_main([
            "bo-bench", "--objective", "quad1d", "--iters", "12", "--seeds", "3",
            "--out", str(out),
        ])
        assert code == 0
        outp = capsys.readouterr().out
        assert "surrogate search" in outp and "random search" in outp
        assert (out / "bo_bench.csv").exists()
        assert (out / "bo_bench.png").exists()
        lines = (out / "bo_bench.csv").read_text().splitlines()
        assert lines[0] == "method,seed,iter,value,best_so_far"
        # best-so-far curves non-decreasing for every method and seed
        curves: dict[tuple[str, str], list[float]] = {}
        for line in lines[1:]:
            method, seed, _i, _v, best = line.split(",")
            curves.setdefault((method, seed), []).append(float(best))
        assert len(curves) == 6
        for series in curves.values():
            assert all(b >= a for a, b in zip(series, series[1:]))

    def test_sphere5d_smoke(self, capsys):
        assert cli_main(
            ["bo-bench", "--objective", "sphere5d", "--iters", "8", "--seeds", "2"]
        ) == 0
        assert "sphere5d" in capsys.readouterr().out


class TestUsageErrors:
    def test_no_subcommand(self):
        assert cli_main([]) == 1

    def test_unknown_flag(self):
        assert cli_main(["run", "--frobnicate"]) == 1

    def test_unknown_subcommand(self):
        assert cli_main(["walk"]) == 1


class TestConfigParsing:
    def test_defaults_cover_all_keys(self):
        cfg = build_experiment_config({})
        assert cfg.trial_duration == DEFAULTS["trial_duration_s"]
        assert cfg.bo.kappa == DEFAULTS["kappa"]

    def test_comments_and_blanks_ignored(self):
        parsed = parse_config_text("# comment\n\nkappa = 3.5  # inline\n")
        assert parsed == {"kappa": 3.5}

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown key"):
            parse_config_text("flux_capacitance = 1\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError, match="key = value"):
            parse_config_text("kappa 3.5\n")

    def test_bool_coercion(self):
        assert parse_config_text("imu_noise = true\n") == {"imu_noise": True}
        with pytest.raises(ValueError, match="true/false"):
            parse_config_text("imu_noise = maybe\n")

    def test_short_condition_names_accepted(self):
        cfg = build_experiment_config({"condition": "red", "iters": 6})
        assert cfg.schedule.condition == "reducing"
