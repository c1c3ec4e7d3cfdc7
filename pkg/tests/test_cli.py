"""Command-line interface: exit codes, determinism, atomicity, config."""

import json
import os
from datetime import datetime, timezone

import numpy as np
import pytest

import quakefis as qf
from quakefis.cli import main, parse_boundary, parse_distance_km, parse_duration_days


def run(argv):
    return main(argv)


class TestValueParsing:
    def test_distance_units(self):
        assert parse_distance_km("190mi") == pytest.approx(305.77536, abs=1e-9)
        assert parse_distance_km("305.8km") == 305.8
        assert parse_distance_km("42") == 42.0
        assert parse_distance_km(10) == 10.0

    def test_duration_units(self):
        assert parse_duration_days("91.3d") == 91.3
        assert parse_duration_days("3mo") == pytest.approx(91.32)
        assert parse_duration_days("14") == 14.0

    def test_boundary_forms(self):
        assert parse_boundary("1985") == datetime(1985, 1, 1, tzinfo=timezone.utc)
        assert parse_boundary("1985-06-01") == datetime(1985, 6, 1, tzinfo=timezone.utc)
        assert parse_boundary("1985-06-01T10:00:00Z") == datetime(
            1985, 6, 1, 10, tzinfo=timezone.utc
        )


class TestCouplesCommand:
    def test_defaults_banner_and_outputs(self, demo_catalog, tmp_path, capsys):
        out = tmp_path / "couples.csv"
        code = run(
            ["couples", "--catalog", str(demo_catalog), "--out", str(out),
             "--max-dist", "190mi"]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        assert "min_mag=5.0 max_dt=91.3d max_dist=305.78km" in stdout
        assert out.exists()
        text = out.read_text()
        assert text.startswith("primary_id,mate_id,x1,x2,x3_days,x4_km,target,censored")
        assert (tmp_path / "run_config.json").exists()

    def test_empty_catalog_reports_zero_couples(self, tmp_path, capsys):
        catalog = tmp_path / "empty.csv"
        catalog.write_text("id,origin_time,lat,lon,depth_km,mag\n")
        out = tmp_path / "couples.csv"
        code = run(["couples", "--catalog", str(catalog), "--out", str(out)])
        assert code == 0
        assert "0 couples" in capsys.readouterr().out
        assert out.read_text().count("\n") == 1  # header only

    def test_rerun_is_byte_identical(self, demo_catalog, tmp_path, capsys):
        out = tmp_path / "couples.csv"
        run(["couples", "--catalog", str(demo_catalog), "--out", str(out)])
        first = out.read_bytes()
        run(["couples", "--catalog", str(demo_catalog), "--out", str(out)])
        assert out.read_bytes() == first

    def test_malformed_catalog_exits_2(self, tmp_path, capsys):
        catalog = tmp_path / "bad.csv"
        catalog.write_text("id,origin_time,lat,lon,depth_km,mag\nx,huh,30,50,,5\n")
        assert run(["couples", "--catalog", str(catalog)]) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_catalog_exits_1(self, tmp_path, capsys):
        assert run(["couples", "--catalog", str(tmp_path / "nope.csv")]) == 1


def train_demo(demo_catalog, tmp_path, *extra):
    model = tmp_path / "model.json"
    report = tmp_path / "report.csv"
    code = run(
        ["train", "--catalog", str(demo_catalog), "--model", str(model),
         "--report", str(report), "--epochs", "3", "--seed", "7", *extra]
    )
    return code, model, report


class TestTrainCommand:
    def test_outputs_and_summary(self, demo_catalog, tmp_path, capsys):
        code, model, report = train_demo(demo_catalog, tmp_path)
        assert code == 0
        stdout = capsys.readouterr().out
        assert "best validation RMSE" in stdout
        assert model.exists() and report.exists()
        lines = report.read_text().splitlines()
        assert lines[0] == "epoch,train_rmse,val_rmse,learning_rate"

    def test_same_seed_same_bytes(self, demo_catalog, tmp_path, capsys):
        _, m1, r1 = train_demo(demo_catalog, tmp_path / "run1")
        _, m2, r2 = train_demo(demo_catalog, tmp_path / "run2")
        assert m1.read_bytes() == m2.read_bytes()
        assert r1.read_bytes() == r2.read_bytes()

    def test_epochs_zero_is_grid_init_plus_lms(self, demo_catalog, tmp_path, capsys):
        code, model, _ = train_demo(demo_catalog, tmp_path, "--epochs", "0")
        assert code == 0
        events = qf.parse_catalog(demo_catalog)
        cfg = qf.CouplingConfig()
        couples = qf.assign_targets(qf.extract_couples(events, cfg), events, cfg)
        boundary = datetime(1985, 1, 1, tzinfo=timezone.utc)
        end = datetime(2001, 1, 1, tzinfo=timezone.utc)
        train_c, _, _ = qf.split_by_epoch(couples, boundary, (boundary, end))
        X, y = qf.training_arrays(train_c)
        init = qf.init_grid_fis(
            X, n_rules=2, input_labels=["primary_mag", "mate_mag", "dt_days", "dist_km"]
        )
        expected, _ = qf.fit_consequents(init, X, y)
        assert model.read_text() == expected.to_json()

    def test_empty_training_partition_exits_2(self, demo_catalog, tmp_path, capsys):
        code = run(
            ["train", "--catalog", str(demo_catalog),
             "--model", str(tmp_path / "m.json"),
             "--train-before", "1970", "--test-start", "1970"]
        )
        assert code == 2
        assert "cannot train" in capsys.readouterr().err


class TestPredictCommand:
    def test_predictions_deterministic(self, demo_catalog, tmp_path, capsys):
        _, model, _ = train_demo(demo_catalog, tmp_path)
        out = tmp_path / "pred.csv"
        code = run(
            ["predict", "--model", str(model), "--catalog", str(demo_catalog),
             "--out", str(out)]
        )
        assert code == 0
        first = out.read_bytes()
        assert first.startswith(b"primary_id,alarm_time,predicted_mag")
        run(
            ["predict", "--model", str(model), "--catalog", str(demo_catalog),
             "--out", str(out)]
        )
        assert out.read_bytes() == first

    def test_missing_model_exits_1_without_partial_output(self, demo_catalog, tmp_path, capsys):
        out = tmp_path / "pred.csv"
        code = run(
            ["predict", "--model", str(tmp_path / "missing.json"),
             "--catalog", str(demo_catalog), "--out", str(out)]
        )
        assert code == 1
        assert not out.exists()
        assert not (tmp_path / "run_config.json").exists()

    def test_version_mismatch_exits_2_naming_expected(self, demo_catalog, tmp_path, capsys):
        _, model, _ = train_demo(demo_catalog, tmp_path)
        doc = json.loads(model.read_text())
        doc["version"] = 9
        bad = tmp_path / "bad_model.json"
        bad.write_text(json.dumps(doc))
        code = run(
            ["predict", "--model", str(bad), "--catalog", str(demo_catalog),
             "--out", str(tmp_path / "pred.csv")]
        )
        assert code == 2
        assert "expected 1" in capsys.readouterr().err

    def test_couples_file_input(self, demo_catalog, tmp_path, capsys):
        _, model, _ = train_demo(demo_catalog, tmp_path)
        couples_csv = tmp_path / "couples.csv"
        run(["couples", "--catalog", str(demo_catalog), "--out", str(couples_csv)])
        out = tmp_path / "pred_from_file.csv"
        code = run(
            ["predict", "--model", str(model), "--catalog", str(demo_catalog),
             "--couples", str(couples_csv), "--out", str(out)]
        )
        assert code == 0
        direct = tmp_path / "pred_direct.csv"
        run(
            ["predict", "--model", str(model), "--catalog", str(demo_catalog),
             "--out", str(direct)]
        )
        assert out.read_bytes() == direct.read_bytes()


class TestEvaluateCommand:
    def test_two_threshold_rows(self, demo_catalog, tmp_path, capsys):
        _, model, _ = train_demo(demo_catalog, tmp_path)
        out = tmp_path / "evaluation.csv"
        code = run(
            ["evaluate", "--model", str(model), "--catalog", str(demo_catalog),
             "--thresholds", "5.5,6.0", "--test-end", "1992-01-01",
             "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "threshold,alarms,false_alarms,hits,missed,false_alarm_rate,rmse"
        assert len(lines) == 3
        assert lines[1].startswith("5.5,")
        assert lines[2].startswith("6.0,")
        stdout = capsys.readouterr().out
        assert "threshold" in stdout and "missed" in stdout


class TestPlotDataCommand:
    def test_rows_bounded_by_range(self, demo_catalog, tmp_path, capsys):
        _, model, _ = train_demo(demo_catalog, tmp_path)
        out = tmp_path / "plot.csv"
        code = run(
            ["plot-data", "--model", str(model), "--catalog", str(demo_catalog),
             "--start", "1985-01-01", "--end", "1990-01-01", "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "time,series,magnitude"
        assert len(lines) > 1
        for line in lines[1:]:
            t = line.split(",")[0]
            assert "1985-01-01" <= t < "1990-01-01"

    def test_missing_range_exits_2(self, demo_catalog, tmp_path, capsys):
        _, model, _ = train_demo(demo_catalog, tmp_path)
        code = run(
            ["plot-data", "--model", str(model), "--catalog", str(demo_catalog)]
        )
        assert code == 2


class TestModelShowCommand:
    def test_prints_rule_base(self, demo_catalog, tmp_path, capsys):
        _, model, _ = train_demo(demo_catalog, tmp_path)
        assert run(["model-show", "--model", str(model)]) == 0
        stdout = capsys.readouterr().out
        assert "rules: 2" in stdout
        assert "primary_mag" in stdout
        assert "then z =" in stdout


class TestConfigFile:
    def test_file_supplies_defaults_and_flags_win(self, demo_catalog, tmp_path, capsys):
        cfg = tmp_path / "run.toml"
        cfg.write_text('min_mag = 5.2\nmax_dist = "200km"\n')
        out = tmp_path / "couples.csv"
        run(
            ["couples", "--catalog", str(demo_catalog), "--out", str(out),
             "--config", str(cfg)]
        )
        stdout = capsys.readouterr().out
        assert "min_mag=5.2" in stdout
        assert "max_dist=200.00km" in stdout
        run(
            ["couples", "--catalog", str(demo_catalog), "--out", str(out),
             "--config", str(cfg), "--min-mag", "5.0"]
        )
        assert "min_mag=5.0" in capsys.readouterr().out

    def test_effective_config_echoed(self, demo_catalog, tmp_path, capsys):
        out = tmp_path / "couples.csv"
        run(["couples", "--catalog", str(demo_catalog), "--out", str(out)])
        doc = json.loads((tmp_path / "run_config.json").read_text())
        assert doc["command"] == "couples"
        assert doc["parameters"]["min_mag"] == 5.0
        assert doc["parameters"]["max_dist"] == pytest.approx(305.77536)
