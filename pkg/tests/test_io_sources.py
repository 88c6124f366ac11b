"""
Test IMU CSV ingestion, validation checks and CSV export
"""
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from app.errors import DegenerateSample, NonMonotoneTime, NonUnitQuaternion, ParseError
from app.io_sources import (
    CSV_COLUMNS,
    estimate_dip_angle,
    ingest_csv,
    write_ground_truth,
    write_measurement_log,
    write_orientation,
)
from app.simulator import generate_trajectory, synthesize_measurements
from app.spec_schema import FILE_BETA, SimConfig


def write_rows(path, rows, columns=CSV_COLUMNS):
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)
    return path


def stationary_rows(n, t0=0.0):
    return [[t0 + 0.1 * k, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.8, 0.0, -0.6] for k in range(n)]


class TestIngest:
    """Parsing and preprocessing of well-formed logs"""

    def test_three_row_file(self, sample_csv):
        """Test that a 3-row file gives 3 unit-norm samples"""
        log, cfg = ingest_csv(sample_csv, dip=0.0)
        assert len(log) == 3
        np.testing.assert_allclose(np.linalg.norm(log.acc, axis=-1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(log.mag, axis=-1), 1.0, atol=1e-12)
        assert cfg.T == pytest.approx(0.1)
        assert cfg.beta == FILE_BETA

    def test_sampling_time_is_median_difference(self, temp_workspace):
        """Test that a single dropped sample does not change T"""
        rows = stationary_rows(6)
        del rows[3]
        path = write_rows(Path(temp_workspace, "datasets", "gap.csv"), rows)
        _, cfg = ingest_csv(path, dip=0.0)
        assert cfg.T == pytest.approx(0.1)

    def test_bias_removal(self, temp_workspace):
        """Test that the mean gyroscope reading over the window is subtracted"""
        rows = stationary_rows(10)
        for k, row in enumerate(rows):
            row[1:4] = [0.02, -0.01, 0.005 + (0.1 if k >= 5 else 0.0)]
        path = write_rows(Path(temp_workspace, "datasets", "bias.csv"), rows)
        log, _ = ingest_csv(path, bias_window=5, dip=0.0)
        np.testing.assert_allclose(log.gyro[:5], 0.0, atol=1e-15)
        np.testing.assert_allclose(log.gyro[5:], [[0.0, 0.0, 0.1]] * 5, atol=1e-15)

    def test_bias_window_disabled(self, sample_csv):
        """Test that bias_window = 0 keeps the gyroscope data"""
        log, _ = ingest_csv(sample_csv, dip=0.0)
        np.testing.assert_allclose(log.gyro[0], [0.01, 0.0, 0.005])

    def test_bias_window_longer_than_log_fails(self, sample_csv):
        """Test that the bias window must fit in the log"""
        with pytest.raises(ValueError):
            ingest_csv(sample_csv, bias_window=10, dip=0.0)

    def test_dip_required(self, sample_csv):
        """Test that a dip angle or its estimation is required"""
        with pytest.raises(ValueError, match="dip"):
            ingest_csv(sample_csv)

    def test_estimated_dip(self, temp_workspace):
        """Test dip estimation on a noiseless simulated log"""
        dip = math.radians(55.0)
        cfg = SimConfig(dip=dip, sigma_omega=0.0, sigma_acc=0.0, sigma_mag=0.0, n_cycles=1)
        log = synthesize_measurements(generate_trajectory(cfg), cfg)
        assert estimate_dip_angle(log.acc, log.mag) == pytest.approx(dip, abs=1e-9)
        path = write_measurement_log(log, Path(temp_workspace, "datasets", "sim.csv"))
        _, filter_cfg = ingest_csv(path, bias_window=100, estimate_dip=True)
        assert filter_cfg.dip == pytest.approx(dip, abs=1e-9)

    def test_round_trip(self, temp_workspace):
        """Test that a simulated log survives export and ingestion"""
        cfg = SimConfig(sigma_omega=0.0, sigma_acc=0.0, sigma_mag=0.0, n_cycles=1, dip=0.4)
        log = synthesize_measurements(generate_trajectory(cfg), cfg)
        path = write_measurement_log(log, Path(temp_workspace, "datasets", "sim.csv"))
        parsed, filter_cfg = ingest_csv(path, dip=0.4)
        np.testing.assert_allclose(parsed.t, log.t, atol=1e-12)
        np.testing.assert_allclose(parsed.gyro, log.gyro, atol=1e-12)
        np.testing.assert_allclose(parsed.acc, log.acc, atol=1e-12)
        np.testing.assert_allclose(parsed.mag, log.mag, atol=1e-12)
        assert filter_cfg.T == pytest.approx(cfg.T)


class TestRejects:
    """Malformed logs"""

    def test_missing_file(self, temp_workspace):
        """Test that a missing input file raises FileNotFoundError"""
        with pytest.raises(FileNotFoundError):
            ingest_csv(Path(temp_workspace, "datasets", "absent.csv"), dip=0.0)

    def test_decreasing_time(self, temp_workspace):
        """Test that a timestamp going backwards at row 5 is rejected"""
        rows = stationary_rows(8)
        rows[4][0] = 0.05
        path = write_rows(Path(temp_workspace, "datasets", "backwards.csv"), rows)
        with pytest.raises(NonMonotoneTime) as exc_info:
            ingest_csv(path, dip=0.0)
        assert exc_info.value.line == 6

    def test_repeated_time(self, temp_workspace):
        """Test that equal timestamps are rejected"""
        rows = stationary_rows(4)
        rows[2][0] = rows[1][0]
        path = write_rows(Path(temp_workspace, "datasets", "repeat.csv"), rows)
        with pytest.raises(NonMonotoneTime):
            ingest_csv(path, dip=0.0)

    def test_missing_column(self, temp_workspace):
        """Test that a missing magnetometer column is reported on the header line"""
        columns = CSV_COLUMNS[:-1]
        rows = [row[:-1] for row in stationary_rows(3)]
        path = write_rows(Path(temp_workspace, "datasets", "short.csv"), rows, columns)
        with pytest.raises(ParseError) as exc_info:
            ingest_csv(path, dip=0.0)
        assert exc_info.value.line == 1
        assert "mz" in exc_info.value.reason

    def test_non_numeric_cell(self, temp_workspace):
        """Test that text in a numeric column is reported with its line"""
        path = Path(temp_workspace, "datasets", "text.csv")
        rows = stationary_rows(3)
        lines = [",".join(CSV_COLUMNS)] + [",".join(str(v) for v in row) for row in rows]
        lines[2] = lines[2].replace("-1.0", "minus one", 1)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError) as exc_info:
            ingest_csv(path, dip=0.0)
        assert exc_info.value.line == 3
        assert "az" in exc_info.value.reason

    def test_empty_cell(self, temp_workspace):
        """Test that an empty cell is rejected"""
        path = Path(temp_workspace, "datasets", "empty_cell.csv")
        rows = ["0.0,0,0,0,0,0,-1,1,0,", "0.1,0,0,0,0,0,-1,1,0,0"]
        path.write_text("\n".join([",".join(CSV_COLUMNS)] + rows) + "\n")
        with pytest.raises(ParseError) as exc_info:
            ingest_csv(path, dip=0.0)
        assert exc_info.value.line == 2

    def test_empty_file(self, temp_workspace):
        """Test that an empty file is rejected"""
        path = Path(temp_workspace, "datasets", "empty.csv")
        path.write_text("")
        with pytest.raises(ParseError):
            ingest_csv(path, dip=0.0)

    def test_zero_accelerometer_row(self, temp_workspace):
        """Test that a zero accelerometer vector is rejected with its line"""
        rows = stationary_rows(4)
        rows[2][4:7] = [0.0, 0.0, 0.0]
        path = write_rows(Path(temp_workspace, "datasets", "zero.csv"), rows)
        with pytest.raises(DegenerateSample) as exc_info:
            ingest_csv(path, dip=0.0)
        assert exc_info.value.line == 4


class TestExport:
    """CSV writers"""

    def test_orientation_output(self, temp_workspace, random_quaternions):
        """Test the t,q0,q1,q2,q3 layout"""
        t = 0.1 * np.arange(len(random_quaternions))
        path = Path(temp_workspace, "results", "orientation.csv")
        df = pd.read_csv(write_orientation(t, random_quaternions, path))
        assert list(df.columns) == ["t", "q0", "q1", "q2", "q3"]
        norms = np.linalg.norm(df[["q0", "q1", "q2", "q3"]].to_numpy(), axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-9)

    def test_orientation_rejects_non_unit(self, temp_workspace):
        """Test that non-unit quaternions are never written"""
        path = Path(temp_workspace, "results", "bad.csv")
        with pytest.raises(NonUnitQuaternion):
            write_orientation([0.0], [[1.0, 0.1, 0.0, 0.0]], path)
        assert not path.exists()

    def test_ground_truth_output(self, temp_workspace, small_sim_config):
        """Test the exported ground-truth columns and length"""
        truth = generate_trajectory(small_sim_config)
        df = pd.read_csv(write_ground_truth(truth, Path(temp_workspace, "results", "truth.csv")))
        assert list(df.columns) == ["t", "q0", "q1", "q2", "q3", "wx", "wy", "wz"]
        assert len(df) == len(truth)
