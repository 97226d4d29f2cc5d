import json
import os

import numpy as np
import pytest

from alloc_bench.backtest import run_classical
from alloc_bench.cli import main
from alloc_bench.errors import TrainingDivergedError
from alloc_bench.market_data import load_csv
from alloc_bench.metrics import MetricsReport, full_report
from alloc_bench.report import (
    metrics_to_dict,
    render_table,
    write_curve_csv,
    write_weights_csv,
)

SAMPLE = MetricsReport(
    annual_return=0.1234,
    cumulative_return=0.5,
    annual_volatility=0.2,
    sharpe=1.5,
    calmar=None,
    stability=0.987,
    max_drawdown=-0.15,
)


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "prices.csv"
    rc = main(["synth", "--out", str(path), "--days", "200", "--assets", "3",
               "--seed", "7"])
    assert rc == 0
    return str(path)


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def snapshot_dir(out_dir):
    return {
        name: read_bytes(os.path.join(out_dir, name))
        for name in sorted(os.listdir(out_dir))
        if os.path.isfile(os.path.join(out_dir, name))
    }


class TestReportPrimitives:
    def test_metrics_to_dict_order_and_none(self):
        d = metrics_to_dict(SAMPLE)
        assert list(d) == [
            "annual_return", "cumulative_return", "annual_volatility",
            "sharpe", "calmar", "stability", "max_drawdown",
        ]
        assert d["calmar"] is None
        assert d["annual_return"] == 0.1234

    def test_render_table_formats(self):
        table = render_table([("Equal weight", SAMPLE)])
        lines = table.splitlines()
        assert lines[0].startswith("Strategy")
        assert set(lines[1]) <= {"-", " "}
        row = lines[2]
        assert "12.34%" in row      # pct cells
        assert "-15.00%" in row
        assert "1.500" in row       # num cells
        assert "n/a" in row         # undefined calmar
        assert table.endswith("\n")

    def test_render_table_separator_rows(self):
        table = render_table([("Equal weight", SAMPLE), ("best of 3 runs", None)])
        assert any(
            line.startswith("-- best of 3 runs ") and line.endswith("-")
            for line in table.splitlines()
        )

    def test_curve_csv_contents(self, tmp_path, small_frame):
        result = run_classical(small_frame, "equalweight", window=30)
        path = tmp_path / "curve.csv"
        write_curve_csv(path, result)
        lines = path.read_text().splitlines()
        assert lines[0] == "date,cumulative_return"
        assert len(lines) == 1 + len(result.dates)
        first_date, first_value = lines[1].split(",")
        assert first_date == result.dates[0].isoformat()
        assert first_value == "0"
        want = result.equity / result.equity[0] - 1.0
        got = np.array([float(line.split(",")[1]) for line in lines[1:]])
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_weights_csv_contents(self, tmp_path, small_frame):
        result = run_classical(small_frame, "equalweight", window=30)
        path = tmp_path / "weights.csv"
        write_weights_csv(path, result, small_frame.tickers)
        lines = path.read_text().splitlines()
        assert lines[0] == "date," + ",".join(small_frame.tickers)
        assert len(lines) == 1 + result.weights_history.shape[0]
        cell = f"{1.0 / 3.0:.10g}"
        for line in lines[1:]:
            assert line.split(",")[1:] == [cell, cell, cell]


class TestSynthMode:
    def test_writes_loadable_csv(self, data_csv):
        frame = load_csv(data_csv)
        assert frame.n_days == 200
        assert frame.n_assets == 3

    def test_deterministic(self, tmp_path, data_csv):
        other = tmp_path / "again.csv"
        rc = main(["synth", "--out", str(other), "--days", "200", "--assets", "3",
                   "--seed", "7"])
        assert rc == 0
        assert read_bytes(str(other)) == read_bytes(data_csv)

    def test_rejects_bad_sizes(self, tmp_path, capsys):
        rc = main(["synth", "--out", str(tmp_path / "x.csv"), "--days", "1"])
        assert rc == 2
        assert "error:" in capsys.readouterr().err


class TestBacktestMode:
    def test_prints_table_and_writes_files(self, data_csv, tmp_path, capsys):
        out = tmp_path / "bt"
        rc = main(["backtest", "--data", data_csv, "--window", "40",
                   "--out", str(out)])
        assert rc == 0
        table = capsys.readouterr().out
        for label in ("Tangency", "Min variance", "Risk parity", "Equal weight"):
            assert label in table
        names = set(os.listdir(out))
        want = {"report.json", "table.txt"}
        for s in ("tangency", "minvariance", "riskparity", "equalweight"):
            want |= {f"curve_{s}.csv", f"weights_{s}.csv"}
        assert names == want
        assert read_bytes(os.path.join(out, "table.txt")).decode() == table

    def test_report_json_matches_recomputation(self, data_csv, tmp_path):
        out = tmp_path / "bt"
        main(["backtest", "--data", data_csv, "--strategy", "equalweight",
              "--window", "40", "--out", str(out)])
        payload = json.loads(read_bytes(os.path.join(out, "report.json")))
        assert payload["manifest"]["mode"] == "backtest"
        assert payload["manifest"]["strategies"] == ["equalweight"]
        assert payload["manifest"]["window"] == 40
        (entry,) = payload["strategies"]
        frame = load_csv(data_csv)
        result = run_classical(frame, "equalweight", window=40)
        assert entry["cumulative_return"] == pytest.approx(
            result.cumulative_return, rel=1e-12
        )
        want = metrics_to_dict(full_report(result.daily_returns))
        assert entry["metrics"] == pytest.approx(want)

    def test_rerun_is_byte_identical(self, data_csv, tmp_path):
        out = tmp_path / "bt"
        args = ["backtest", "--data", data_csv, "--window", "40", "--out", str(out)]
        assert main(args) == 0
        first = snapshot_dir(out)
        assert main(args) == 0
        assert snapshot_dir(out) == first

    def test_unknown_strategy_lists_valid_ids(self, data_csv, capsys):
        rc = main(["backtest", "--data", data_csv, "--strategy", "momentum"])
        assert rc == 2
        err = capsys.readouterr().err
        assert "momentum" in err and "equalweight" in err and "sac" in err

    def test_drl_strategy_rejected_here(self, data_csv, capsys):
        rc = main(["backtest", "--data", data_csv, "--strategy", "sac"])
        assert rc == 2
        assert "not available in this mode" in capsys.readouterr().err

    def test_missing_data_file(self, tmp_path, capsys):
        rc = main(["backtest", "--data", str(tmp_path / "nope.csv")])
        assert rc == 3
        assert "no such data file" in capsys.readouterr().err

    def test_malformed_data_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("this is not a price table\n1,2,3\n")
        rc = main(["backtest", "--data", str(bad)])
        assert rc == 3

    def test_window_too_small(self, data_csv):
        assert main(["backtest", "--data", data_csv, "--window", "1"]) == 2

    def test_out_path_is_a_file(self, data_csv, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("x")
        rc = main(["backtest", "--data", data_csv, "--window", "40",
                   "--out", str(blocker)])
        assert rc == 5


class TestTrainMode:
    def test_trains_and_writes_artifacts(self, data_csv, tmp_path, capsys):
        out = tmp_path / "run"
        rc = main(["train", "--data", data_csv, "--strategy", "a2c",
                   "--steps", "200", "--seed", "3", "--out", str(out)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "A2C" in text
        assert "trained a2c seed 3 for 200 steps" in text
        names = set(os.listdir(out))
        assert {"checkpoints", "training_log.csv", "curve_a2c.csv",
                "weights_a2c.csv", "report.json"} <= names
        log_lines = (out / "training_log.csv").read_text().splitlines()
        assert log_lines[0] == "episode,reward"
        assert len(log_lines) == 2  # one finished episode at 200 steps
        payload = json.loads(read_bytes(os.path.join(out, "report.json")))
        assert payload["manifest"]["mode"] == "train"
        assert payload["manifest"]["total_steps"] == 200
        assert payload["strategies"][0]["seed"] == 3

    def test_requires_exactly_one_algorithm(self, data_csv, capsys):
        assert main(["train", "--data", data_csv]) == 2
        assert main(["train", "--data", data_csv, "--strategy", "a2c",
                     "--strategy", "sac"]) == 2
        rc = main(["train", "--data", data_csv, "--strategy", "tangency"])
        assert rc == 2
        assert "non-trainable" in capsys.readouterr().err

    def test_divergence_exit_code(self, data_csv, monkeypatch, capsys):
        import alloc_bench.cli as cli_module

        def exploding_train(cfg, frame, env_cfg):
            raise TrainingDivergedError("loss not finite", step=5, seed=cfg.seed)

        monkeypatch.setattr(cli_module, "train", exploding_train)
        rc = main(["train", "--data", data_csv, "--strategy", "ppo",
                   "--steps", "100"])
        assert rc == 4
        assert "diverged" in capsys.readouterr().err


PROTO_ARGS = [
    "--window", "30", "--runs", "2", "--seed", "11", "--steps", "60",
    "--strategy", "equalweight", "--strategy", "minvariance",
    "--strategy", "a2c", "--strategy", "ddpg",
]


@pytest.fixture(scope="module")
def proto_out(data_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("proto") / "out"
    rc = main(["protocol", "--data", data_csv, "--out", str(out), *PROTO_ARGS])
    assert rc == 0
    return out


class TestProtocolMode:
    def test_file_set(self, proto_out):
        names = set(os.listdir(proto_out))
        want = {"report.json", "table.txt"}
        for s in ("equalweight", "minvariance"):
            want |= {f"curve_{s}.csv", f"weights_{s}.csv"}
        for algo in ("a2c", "ddpg"):
            for seed in (11, 12):
                want |= {f"curve_{algo}_seed{seed}.csv",
                         f"weights_{algo}_seed{seed}.csv"}
        assert names == want

    def test_table_has_best_and_worst_blocks(self, proto_out):
        table = (proto_out / "table.txt").read_text()
        assert "-- best of 2 runs " in table
        assert "-- worst of 2 runs " in table
        assert table.count("A2C (seed 1") == 2

    def test_report_json_structure(self, proto_out):
        payload = json.loads(read_bytes(os.path.join(proto_out, "report.json")))
        manifest = payload["manifest"]
        assert manifest["mode"] == "protocol"
        assert manifest["n_runs"] == 2
        assert manifest["base_seed"] == 11
        # canonical declaration order, not request order
        ids = [entry["id"] for entry in payload["strategies"]]
        assert ids == ["minvariance", "equalweight", "a2c", "ddpg"]
        for entry in payload["strategies"][2:]:
            assert entry["kind"] == "drl"
            assert [run["seed"] for run in entry["runs"]] == [11, 12]
            stats = entry["protocol_stats"]
            assert stats["n_runs"] == 2
            assert stats["n_failed"] == 0
            values = [run["cumulative_return"] for run in entry["runs"]]
            assert stats["mean_cumulative_return"] == pytest.approx(np.mean(values))
            assert stats["stdev_cumulative_return"] == pytest.approx(
                np.std(values, ddof=1)
            )
            assert stats["best_seed"] in (11, 12)

    def test_rerun_is_byte_identical(self, data_csv, proto_out, capsys):
        first = snapshot_dir(proto_out)
        rc = main(["protocol", "--data", data_csv, "--out", str(proto_out),
                   *PROTO_ARGS])
        assert rc == 0
        capsys.readouterr()
        assert snapshot_dir(proto_out) == first

    def test_usage_errors(self, data_csv, tmp_path):
        out = str(tmp_path / "o")
        assert main(["protocol", "--data", data_csv, "--out", out,
                     "--runs", "0"]) == 2
        assert main(["protocol", "--data", data_csv, "--out", out,
                     "--cost", "0.5"]) == 2
        assert main(["protocol", "--data", data_csv, "--out", out,
                     "--train-split", "1.5"]) == 2


class TestParsing:
    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "alloc-bench" in capsys.readouterr().out

    def test_no_mode_is_usage_error(self, capsys):
        assert main([]) == 2
        capsys.readouterr()

    def test_unknown_mode_is_usage_error(self, capsys):
        assert main(["evaluate"]) == 2
        capsys.readouterr()
