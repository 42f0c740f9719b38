"""Tests for the command-line interface."""

import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml
from typer.testing import CliRunner

from pqc_reupload.analysis import RobustnessGrid
from pqc_reupload.main import app

runner = CliRunner()


def _flat(output: str) -> str:
    """Console output with Rich line wrapping undone."""
    return output.replace("\n", "")


@pytest.fixture
def trained(tmp_path: Path) -> Path:
    """Output directory of a short parity training run."""
    out = tmp_path / "train"
    result = runner.invoke(app, ["train", "--dataset", "parity", "--iterations", "3", "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


class TestTrain:
    """Test the train and eval commands."""

    def test_outputs(self, trained):
        """Test checkpoint, history, metrics and the configuration snapshot are written."""
        for name in ("model.ckpt", "history.csv", "scores.csv", "metrics.csv", "resolved-config.yaml"):
            assert (trained / name).is_file()
        history = pd.read_csv(trained / "history.csv")
        assert history["iteration"].tolist() == [1, 2, 3]
        snapshot = yaml.safe_load((trained / "resolved-config.yaml").read_text())
        assert snapshot["iterations"] == 3
        assert snapshot["arch"] == "simple-a"

    def test_replay_from_snapshot(self, trained, tmp_path):
        """Test rerunning with the snapshot reproduces the history byte for byte."""
        replay = tmp_path / "replay"
        result = runner.invoke(
            app,
            ["train", "--config", str(trained / "resolved-config.yaml"), "--out", str(replay)],
        )
        assert result.exit_code == 0, result.output
        assert (replay / "history.csv").read_bytes() == (trained / "history.csv").read_bytes()

    def test_eval(self, trained, tmp_path):
        """Test scoring a checkpoint on the whole dataset."""
        out = tmp_path / "eval"
        args = ["eval", "--checkpoint", str(trained / "model.ckpt"), "--split", "all", "--out", str(out)]
        result = runner.invoke(app, args)
        assert result.exit_code == 0, result.output
        metrics = pd.read_csv(out / "metrics.csv").set_index("metric")["value"]
        assert metrics["samples"] == 16
        assert 0.0 <= metrics["accuracy"] <= 1.0
        first = (out / "metrics.csv").read_bytes()
        runner.invoke(app, args)
        assert (out / "metrics.csv").read_bytes() == first

    def test_eval_bad_split(self, trained, tmp_path):
        """Test unknown --split values are configuration errors."""
        result = runner.invoke(
            app, ["eval", "--checkpoint", str(trained / "model.ckpt"), "--split", "dev", "--out", str(tmp_path)]
        )
        assert result.exit_code == 2

    def test_eval_arch_mismatch(self, trained, tmp_path):
        """Test --arch must match the checkpoint."""
        result = runner.invoke(
            app,
            ["eval", "--checkpoint", str(trained / "model.ckpt"), "--arch", "simple-b", "--out", str(tmp_path)],
        )
        assert result.exit_code == 3

    def test_corrupted_checkpoint(self, trained, tmp_path):
        """Test a damaged header exits with the data error code."""
        checkpoint = trained / "model.ckpt"
        checkpoint.write_text(checkpoint.read_text().replace("format_version: 1", "format_version: 2"))
        result = runner.invoke(app, ["eval", "--checkpoint", str(checkpoint), "--out", str(tmp_path)])
        assert result.exit_code == 3
        assert "format_version" in _flat(result.output)

    def test_multiclass(self, data_dir, tmp_path):
        """Test wines trains an ensemble and writes a confusion matrix."""
        out = tmp_path / "wines"
        result = runner.invoke(
            app,
            ["train", "--dataset", "wines", "--data-dir", str(data_dir), "--iterations", "1", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        for class_id in range(3):
            assert (out / f"history_class-{class_id}.csv").is_file()
        counts = pd.read_csv(out / "confusion_counts.csv")
        assert list(counts.columns) == ["true", "pred_0", "pred_1", "pred_2"]
        assert counts.drop(columns="true").to_numpy().sum() == 59


class TestErrors:
    """Test exit codes and messages."""

    def test_missing_data(self, tmp_path):
        """Test a missing dataset file names its path."""
        missing = tmp_path / "nowhere"
        result = runner.invoke(
            app, ["train", "--dataset", "cancer", "--data-dir", str(missing), "--out", str(tmp_path / "o")]
        )
        assert result.exit_code == 3
        assert "cancer.csv" in _flat(result.output)

    def test_unknown_architecture(self, tmp_path):
        """Test an unknown --arch is a configuration error."""
        result = runner.invoke(app, ["train", "--arch", "simple-z", "--out", str(tmp_path)])
        assert result.exit_code == 2

    def test_missing_config_file(self, tmp_path):
        """Test --config must exist."""
        result = runner.invoke(app, ["train", "--config", str(tmp_path / "none.yaml")])
        assert result.exit_code == 2


class TestAnalysisCommands:
    """Test the analysis commands end to end."""

    def test_crossval(self, tmp_path):
        """Test one row per split."""
        result = runner.invoke(
            app, ["crossval", "--splits", "2", "--iterations", "2", "--out", str(tmp_path)]
        )
        assert result.exit_code == 0, result.output
        assert len(pd.read_csv(tmp_path / "crossval.csv")) == 2
        assert "±" in result.output

    def test_landscape(self, tmp_path):
        """Test the grid, minima and slice files of a freshly trained model."""
        config = tmp_path / "landscape.yaml"
        config.write_text(yaml.safe_dump({"landscape_resolution": 3, "iterations": 2}))
        out = tmp_path / "out"
        result = runner.invoke(app, ["landscape", "--config", str(config), "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert len(pd.read_csv(out / "landscape.csv")) == 9
        assert len(pd.read_csv(out / "slice.csv")) == 3
        assert (out / "landscape_minima.csv").is_file()

    def test_scan(self, tmp_path):
        """Test a single scan and the per-angle summary."""
        result = runner.invoke(app, ["scan", "--param", "3", "--all-params", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert len(pd.read_csv(tmp_path / "harmonic.csv")) == 32
        summary = pd.read_csv(tmp_path / "harmonic_summary.csv")
        assert len(summary) == 15
        assert (summary["residual"] < 1e-8).all()

    def test_sweep(self, mocker, tmp_path):
        """Test the sweep converts angles to radians and writes the grid."""
        sweep = mocker.patch(
            "pqc_reupload.main.robustness_sweep",
            return_value=RobustnessGrid(
                [0.5 * math.pi], [0.1 * math.pi], np.array([[0.9]]), np.array([[0.01]])
            ),
        )
        result = runner.invoke(app, ["sweep", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        thetas = sweep.call_args.args[4]
        assert thetas == pytest.approx([0.2 * math.pi, 0.5 * math.pi, 0.8 * math.pi])
        frame = pd.read_csv(tmp_path / "sweep.csv")
        assert frame["accuracy"].tolist() == [0.9]

    def test_arch_compare_counts(self, tmp_path):
        """Test image architecture counts without training."""
        result = runner.invoke(
            app, ["arch-compare", "--counts-only", "--dataset", "mnist", "--out", str(tmp_path)]
        )
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "arch_compare.csv")
        assert frame["params"].tolist() == [248, 92, 164, 244, 376]

    def test_estimate_time(self, tmp_path):
        """Test the published timing example."""
        result = runner.invoke(app, ["estimate-time", "--batch-size", "64", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert "t_grad = 1.55 s" in result.output
        assert "t_iteration = 192 s" in result.output
        timing = pd.read_csv(tmp_path / "timing.csv").set_index("quantity")
        assert float(timing.loc["m", "value"]) == 15


class TestUtilityCommands:
    """Test dataset generation and configuration management."""

    def test_gen_parity(self, tmp_path):
        """Test 16 labelled bit strings."""
        result = runner.invoke(app, ["gen-parity", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "parity.csv")
        assert len(frame) == 16
        assert list(frame.columns) == ["b0", "b1", "b2", "b3", "label"]

    def test_create_config(self, tmp_path):
        """Test creating, refusing to overwrite and forcing."""
        target = tmp_path / "pqc-config.yaml"
        assert runner.invoke(app, ["create-config", "-o", str(target)]).exit_code == 0
        assert yaml.safe_load(target.read_text())["dataset"] == "parity"
        assert runner.invoke(app, ["create-config", "-o", str(target)]).exit_code == 1
        assert runner.invoke(app, ["create-config", "-o", str(target), "--force"]).exit_code == 0

    def test_show_config(self):
        """Test the resolved settings and template summary are shown."""
        result = runner.invoke(app, ["show-config", "--dataset", "mnist"])
        assert result.exit_code == 0, result.output
        assert "Resolved Configuration" in result.output
        assert "mnist-c: 244 parameters" in result.output
