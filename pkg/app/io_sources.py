"""
IMU log ingestion and CSV export.

Input logs carry the header ``t,gx,gy,gz,ax,ay,az,mx,my,mz``: time in seconds,
gyroscope in rad/s, accelerometer and magnetometer in any consistent units.
Ingestion normalises accelerometer and magnetometer rows to unit norm,
optionally removes a gyroscope bias estimated over a stationary window and
estimates the sampling time as the median timestamp difference.
"""
import logging
import math
import re
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike

from .checks import (
    assert_columns,
    assert_monotone,
    assert_nonzero_norm,
    assert_numeric,
    assert_unit_quaternions,
)
from .errors import ParseError
from .simulator import GroundTruth, MeasurementLog
from .spec_schema import FILE_BETA, FilterConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TIME_COLUMN = "t"
GYRO_COLUMNS = ["gx", "gy", "gz"]
ACC_COLUMNS = ["ax", "ay", "az"]
MAG_COLUMNS = ["mx", "my", "mz"]
CSV_COLUMNS = [TIME_COLUMN] + GYRO_COLUMNS + ACC_COLUMNS + MAG_COLUMNS
QUAT_COLUMNS = ["q0", "q1", "q2", "q3"]
FLOAT_FORMAT = "%.17g"
MIN_SAMPLE_NORM = 1e-9


def read_imu_csv(path: PathLike) -> pd.DataFrame:
    """Read and validate a log, returning float columns in schema order"""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No such input file: {path}")
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise ParseError(1, "file is empty")
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise ParseError(int(match.group(1)) if match else 1, f"malformed row ({e})")

    raw.columns = [c.strip() for c in raw.columns]
    assert_columns(raw, CSV_COLUMNS)
    if raw.empty:
        raise ParseError(2, "no data rows")
    return assert_numeric(raw, CSV_COLUMNS)


def estimate_dip_angle(acc: ArrayLike, mag: ArrayLike, window: int = 0) -> float:
    """
    Dip angle from unit accelerometer and magnetometer rows: g^n · m^n = −sin δ
    and −y_a · y_m estimates g^n · m^n while the sensor is at rest.
    """
    acc = np.asarray(acc, dtype=np.float64)
    mag = np.asarray(mag, dtype=np.float64)
    if window > 0:
        acc, mag = acc[:window], mag[:window]
    vertical = float(np.mean(np.sum(-acc * mag, axis=-1)))
    return -math.asin(float(np.clip(vertical, -1.0, 1.0)))


def ingest_csv(path: PathLike, bias_window: int = 0, dip: Optional[float] = None,
               estimate_dip: bool = False,
               beta: float = FILE_BETA) -> Tuple[MeasurementLog, FilterConfig]:
    df = read_imu_csv(path)
    t = df[TIME_COLUMN].to_numpy()
    gyro = df[GYRO_COLUMNS].to_numpy()
    acc = df[ACC_COLUMNS].to_numpy()
    mag = df[MAG_COLUMNS].to_numpy()

    assert_monotone(t)
    assert_nonzero_norm(acc, "accelerometer", MIN_SAMPLE_NORM)
    assert_nonzero_norm(mag, "magnetometer", MIN_SAMPLE_NORM)
    if len(t) < 2:
        raise ParseError(3, "at least two samples are needed to estimate the sampling time")
    if bias_window > len(t):
        raise ValueError(f"bias_window {bias_window} exceeds the {len(t)} samples in {path}")

    acc = acc / np.linalg.norm(acc, axis=-1, keepdims=True)
    mag = mag / np.linalg.norm(mag, axis=-1, keepdims=True)
    if bias_window > 0:
        bias = gyro[:bias_window].mean(axis=0)
        gyro = gyro - bias
        logger.info("Gyroscope bias over %d samples: %s rad/s", bias_window, bias)

    if estimate_dip:
        dip = estimate_dip_angle(acc, mag, bias_window)
        logger.info("Estimated dip angle: %.3f deg", math.degrees(dip))
    elif dip is None:
        raise ValueError("a dip angle is required unless estimate_dip is set")

    T = float(np.median(np.diff(t)))
    no_outliers = np.zeros((len(t), 2), dtype=bool)
    log = MeasurementLog(t=t, gyro=gyro, acc=acc, mag=mag, outlier_mask=no_outliers)
    logger.info("Ingested %d samples from %s (T = %.6g s)", len(log), path, T)
    return log, FilterConfig(T=T, beta=beta, dip=dip)


def write_frame(df: pd.DataFrame, path: PathLike) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return str(path)


def write_measurement_log(log: MeasurementLog, path: PathLike) -> str:
    """Export a log in the ingestion schema"""
    data = np.column_stack([log.t, log.gyro, log.acc, log.mag])
    return write_frame(pd.DataFrame(data, columns=CSV_COLUMNS), path)


def write_ground_truth(truth: GroundTruth, path: PathLike) -> str:
    data = np.column_stack([truth.t, truth.q_true, truth.omega_true])
    columns = [TIME_COLUMN] + QUAT_COLUMNS + ["wx", "wy", "wz"]
    return write_frame(pd.DataFrame(data, columns=columns), path)


def write_orientation(t: ArrayLike, estimates: ArrayLike, path: PathLike) -> str:
    """Per-sample estimates as t,q0,q1,q2,q3; rows must be unit quaternions"""
    estimates = np.asarray(estimates, dtype=np.float64)
    assert_unit_quaternions(estimates)
    data = np.column_stack([np.asarray(t, dtype=np.float64), estimates])
    return write_frame(pd.DataFrame(data, columns=[TIME_COLUMN] + QUAT_COLUMNS), path)
