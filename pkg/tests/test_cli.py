import csv
import json
import logging
from pathlib import Path
from unittest.mock import MagicMock

import numpy as np
import pytest
import yaml
from pytest import CaptureFixture

from timebin_shor import __version__
from timebin_shor.cli import LOG_FILE_NAME, PackageFilter, main

logger = logging.getLogger(__name__)

BELL = "qubits a b\nH a\nCNOT a b\n"


def test_version():
    assert __version__ == "0.1.0"


@pytest.fixture
def dirs(tmp_path: Path) -> dict:
    return {"out": tmp_path / "results", "logs": tmp_path / "logs"}


def cli(dirs: dict, *args: str, output: bool = True) -> int:
    argv = list(args) + ["--log-dir", str(dirs["logs"])]
    if output:
        argv += ["--output-dir", str(dirs["out"])]
    return main(argv)


def read_csv(path: Path) -> list:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class TestPackageFilter:
    def test_filters_on_package_name(self):
        record = MagicMock()
        record.name = "timebin_shor.compiler._lowering"
        assert PackageFilter("timebin_shor").filter(record)
        record.name = "matplotlib.font_manager"
        assert not PackageFilter("timebin_shor").filter(record)


class TestRun:
    @pytest.fixture
    def bell_file(self, tmp_path: Path) -> Path:
        path = tmp_path / "bell.txt"
        path.write_text(BELL)
        return path

    def test_bell_pair(self, dirs: dict, bell_file: Path):
        assert cli(dirs, "run", str(bell_file), "--no-loss") == 0
        report = json.loads((dirs["out"] / "probabilities.json").read_text())
        probs = [entry["prob"] for entry in report["probabilities"]]
        np.testing.assert_allclose(probs, [0.5, 0, 0, 0.5], atol=1e-12)
        assert report["metadata"]["survival_probability"] == pytest.approx(1.0)
        assert (dirs["logs"] / LOG_FILE_NAME).exists()

    def test_resolved_config_is_written(self, dirs: dict, bell_file: Path):
        assert cli(dirs, "run", str(bell_file), "--seed", "11") == 0
        written = yaml.safe_load((dirs["out"] / "run_config.yaml").read_text())
        assert written["seed"] == 11
        assert written["loss"] is True

    def test_losses(self, dirs: dict, bell_file: Path):
        assert cli(dirs, "run", str(bell_file)) == 0
        metadata = json.loads((dirs["out"] / "probabilities.json").read_text())["metadata"]
        assert metadata["survival_probability"] < 0.01
        assert metadata["survival_probability"] == pytest.approx(metadata["analytic_transmission"])

    def test_events(self, dirs: dict, bell_file: Path):
        assert cli(dirs, "run", str(bell_file), "--shots", "500", "--efficiency", "1.0") == 0
        events = read_csv(dirs["out"] / "events.csv")
        assert len(events) == 500
        histogram = read_csv(dirs["out"] / "histogram.csv")
        assert len(histogram) == 4
        detected = sum(int(row["detected"]) for row in events)
        assert sum(int(row["count"]) for row in histogram) == detected

    def test_config_file_then_flags(self, dirs: dict, bell_file: Path, tmp_path: Path):
        config_path = tmp_path / "run.yaml"
        config_path.write_text("loss: false\nseed: 3\nshots: 10\n")
        assert cli(dirs, "run", str(bell_file), "--config", str(config_path), "--seed", "4") == 0
        written = yaml.safe_load((dirs["out"] / "run_config.yaml").read_text())
        assert written["loss"] is False
        assert written["seed"] == 4
        assert written["shots"] == 10

    def test_bad_config_file(self, dirs: dict, bell_file: Path, tmp_path: Path):
        config_path = tmp_path / "run.yaml"
        config_path.write_text("shots: many\n")
        assert cli(dirs, "run", str(bell_file), "--config", str(config_path)) == 2

    def test_parse_error(self, dirs: dict, tmp_path: Path, capsys: CaptureFixture):
        path = tmp_path / "broken.txt"
        path.write_text("qubits a\nSWAP a\n")
        assert cli(dirs, "run", str(path)) == 2
        assert "error: line 2" in capsys.readouterr().err

    def test_frame_too_small(self, dirs: dict, bell_file: Path):
        assert cli(dirs, "run", str(bell_file), "--n-bins", "2") == 3

    def test_bad_flag(self, dirs: dict, bell_file: Path):
        assert cli(dirs, "run", str(bell_file), "--amplitudes", "square") == 2


class TestShor:
    def test_ideal_run(self, dirs: dict):
        assert cli(dirs, "shor", "--no-loss") == 0
        report = json.loads((dirs["out"] / "shor_report.json").read_text())
        assert report["order"] == 4
        assert report["factors"] == [3, 5]
        np.testing.assert_allclose(report["marginal"], [0.25, 0] * 4, atol=1e-10)
        rows = read_csv(dirs["out"] / "order_finding.csv")
        assert [row["y_bits"] for row in rows][:3] == ["000", "001", "010"]
        assert rows[2]["order"] == "4"
        assert rows[4]["reason"] == "no-valid-denominator"
        assert rows[0]["reason"] == "inherent-failure"

    def test_sampled_run(self, dirs: dict):
        args = ["shor", "--qft", "classical", "--amplitudes", "wavepacket", "--no-loss"]
        assert cli(dirs, *args, "--shots", "4000", "--seed", "2") == 0
        report = json.loads((dirs["out"] / "shor_report.json").read_text())
        counts = np.array(report["counts"])
        assert counts.sum() > 0
        assert counts[::2].sum() / counts.sum() > 0.9
        assert report["order"] == 4
        assert (dirs["out"] / "events.csv").exists()

    def test_unsupported_base(self, dirs: dict, capsys: CaptureFixture):
        assert cli(dirs, "shor", "-a", "11") == 2
        assert "encoding" in capsys.readouterr().err

    def test_custom_encoding(self, dirs: dict, tmp_path: Path):
        path = tmp_path / "encoding.yaml"
        path.write_text('1: "00"\n11: "01"\n')
        assert cli(dirs, "shor", "-a", "11", "--encoding", str(path), "--no-loss") == 0
        report = json.loads((dirs["out"] / "shor_report.json").read_text())
        assert report["order"] == 2
        assert report["factors"] == [3, 5]

    def test_base_shares_a_factor(self, dirs: dict):
        assert cli(dirs, "shor", "-a", "5") == 2

    def test_stage_histograms(self, dirs: dict):
        assert cli(dirs, "shor", "--no-loss") == 0
        rows = read_csv(dirs["out"] / "stage_histograms.csv")
        assert len(rows) == 32
        assert list(rows[0]) == ["bin", "bits", "init", "cnot1", "modexp", "qft"]
        assert rows[17]["bits"] == "10001"
        assert sum(float(row["init"]) for row in rows) == pytest.approx(1.0)
        assert float(rows[1]["cnot1"]) == pytest.approx(1 / 8)
        assert float(rows[17]["cnot1"]) == pytest.approx(0.0)
        report = json.loads((dirs["out"] / "shor_report.json").read_text())
        assert list(report["stage_survival"]) == ["init", "cnot1", "modexp", "qft"]

    def test_missing_encoding_file(self, dirs: dict, tmp_path: Path, capsys: CaptureFixture):
        assert cli(dirs, "shor", "--encoding", str(tmp_path / "missing.yaml")) == 2
        assert "Cannot read encoding file" in capsys.readouterr().err

    def test_frame_is_fixed_by_the_register(self, dirs: dict, capsys: CaptureFixture):
        assert cli(dirs, "shor", "--n-bins", "64") == 2
        assert "fixes the frame at 32 bins" in capsys.readouterr().err
        assert cli(dirs, "shor", "--n-bins", "32", "--no-loss") == 0


class TestCharacterize:
    def test_cnot_truth_table(self, dirs: dict):
        assert cli(dirs, "characterize", "cnot") == 0
        with open(dirs["out"] / "cnot_truth_table.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["input", "00", "01", "10", "11"]
        table = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
        np.testing.assert_allclose(table, np.eye(4)[[0, 1, 3, 2]], atol=1e-10)

    def test_ry_sweep(self, dirs: dict):
        assert cli(dirs, "characterize", "ry-sweep", "--steps", "5") == 0
        rows = read_csv(dirs["out"] / "ry_sweep.csv")
        assert len(rows) == 5
        assert float(rows[0]["sz"]) == pytest.approx(1.0)
        assert float(rows[1]["sx"]) == pytest.approx(1.0)
        assert float(rows[2]["sz"]) == pytest.approx(-1.0)

    def test_rz_sweep(self, dirs: dict):
        assert cli(dirs, "characterize", "rz-sweep", "--steps", "5") == 0
        rows = read_csv(dirs["out"] / "rz_sweep.csv")
        assert float(rows[0]["sx"]) == pytest.approx(1.0)
        assert float(rows[1]["sy"]) == pytest.approx(1.0)
        assert float(rows[2]["sx"]) == pytest.approx(-1.0)
        assert abs(float(rows[1]["sz"])) < 1e-9

    def test_too_few_steps(self, dirs: dict):
        assert cli(dirs, "characterize", "ry-sweep", "--steps", "1") == 2


class TestBench:
    def test_small_bench(self, dirs: dict, capsys: CaptureFixture):
        assert cli(dirs, "bench", "--n-bins", "64") == 0
        report = json.loads((dirs["out"] / "bench_report.json").read_text())
        assert report["n_qubits"] == 6
        assert report["depth"] == 20
        assert json.loads(capsys.readouterr().out)["n_bins"] == 64

    def test_too_many_bins(self, dirs: dict):
        assert cli(dirs, "bench", "--n-bins", str(2**17)) == 4

    def test_not_a_power_of_two(self, dirs: dict):
        assert cli(dirs, "bench", "--n-bins", "100") == 2


class TestMain:
    def test_help(self, capsys: CaptureFixture):
        assert main(["--help"]) == 0
        assert "Exit status" in capsys.readouterr().out

    def test_missing_command(self):
        assert main([]) == 2
