"""
Ground-truth trajectory and sensor-measurement synthesis for the Monte Carlo study.

The trajectory repeats a cycle of a stationary period followed by one full
revolution about each body axis (x, then y, then z). Measurements follow the
gyroscope, accelerometer and magnetometer models with additive Gaussian noise on
the normalised directions; noisy vectors are not re-normalised. Accelerometer and
magnetometer samples observe the orientation vector_delay samples back (clamped
at the first sample), which with the default of 1 is the orientation at the
start of the gyroscope interval that ends at the same index.

Random numbers come from PCG64 generators seeded through
``numpy.random.SeedSequence(seed)``, spawned into an independent noise stream
and outlier stream.
"""
import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .rotmath import Quaternion, Vec3, quat_exp, quat_mul, quat_normalize, quat_to_rotmat
from .spec_schema import SimConfig, gravity_ref, magnetic_ref

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ImuSample:
    t: float
    y_omega: Vec3
    y_acc: Vec3
    y_mag: Vec3


@dataclass(frozen=True, eq=False)
class GroundTruth:
    t: NDArray[np.float64]
    q_true: NDArray[np.float64]
    omega_true: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True, eq=False)
class MeasurementLog(Sequence):
    """Time-stamped gyro/acc/mag arrays, indexable as a sequence of ImuSample"""

    t: NDArray[np.float64]
    gyro: NDArray[np.float64]
    acc: NDArray[np.float64]
    mag: NDArray[np.float64]
    outlier_mask: NDArray[np.bool_]

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return MeasurementLog(self.t[k], self.gyro[k], self.acc[k], self.mag[k], self.outlier_mask[k])
        return ImuSample(float(self.t[k]), self.gyro[k], self.acc[k], self.mag[k])

    def __iter__(self) -> Iterator[ImuSample]:
        for k in range(len(self)):
            yield self[k]


def run_seed(cfg: SimConfig, run_index: int) -> int:
    return cfg.seed + run_index


def _streams(seed: int):
    noise_seq, outlier_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(noise_seq), np.random.default_rng(outlier_seq)


def angular_velocity_profile(cfg: SimConfig) -> NDArray[np.float64]:
    """Body-frame angular velocity for every sample, shape (N, 3)"""
    rate = 2.0 * math.pi / (cfg.n_per_rotation * cfg.T)
    cycle = [np.zeros((cfg.n_stationary, 3))]
    for axis in range(3):
        segment = np.zeros((cfg.n_per_rotation, 3))
        segment[:, axis] = rate
        cycle.append(segment)
    return np.tile(np.concatenate(cycle), (cfg.n_cycles, 1))


def generate_trajectory(cfg: SimConfig) -> GroundTruth:
    """Integrate the rotation profile exactly: q[k+1] = q[k] ⊙ exp_q(T/2 ω[k+1])"""
    omega = angular_velocity_profile(cfg)
    increments = quat_exp(0.5 * cfg.T * omega)
    q_true = np.empty((len(omega), 4))
    q_true[0] = cfg.initial_orientation
    for k in range(1, len(omega)):
        q_true[k] = quat_mul(q_true[k - 1], increments[k])
    t = np.arange(len(omega)) * cfg.T
    logger.debug("Generated trajectory: %d samples over %.1f s", len(t), len(t) * cfg.T)
    return GroundTruth(t=t, q_true=q_true, omega_true=omega)


def synthesize_measurements(truth: GroundTruth, cfg: SimConfig) -> MeasurementLog:
    """Noisy gyro, accelerometer and magnetometer samples along the trajectory"""
    rng, _ = _streams(cfg.seed)
    n = len(truth)
    e_omega = rng.normal(0.0, cfg.sigma_omega, (n, 3))
    e_acc = rng.normal(0.0, cfg.sigma_acc, (n, 3))
    e_mag = rng.normal(0.0, cfg.sigma_mag, (n, 3))

    # Vector sensors of sample k see the orientation at the start of gyro interval k
    observed = truth.q_true[np.maximum(np.arange(n) - cfg.vector_delay, 0)]
    rot = quat_to_rotmat(observed)
    g_b = np.einsum("nji,j->ni", rot, gravity_ref())
    m_b = np.einsum("nji,j->ni", rot, magnetic_ref(cfg.dip))
    return MeasurementLog(
        t=truth.t.copy(),
        gyro=truth.omega_true + e_omega,
        acc=-g_b + e_acc,
        mag=m_b + e_mag,
        outlier_mask=np.zeros((n, 2), dtype=bool),
    )


def inject_outliers(log: MeasurementLog, cfg: SimConfig) -> MeasurementLog:
    """
    Replace accelerometer and magnetometer vectors, independently per sample and
    sensor with probability outlier_prob, by draws from N(0, I₃).
    """
    _, rng = _streams(cfg.seed)
    n = len(log)
    hit = rng.random((n, 2)) < cfg.outlier_prob
    draws = rng.standard_normal((n, 2, 3))
    acc = np.where(hit[:, 0, None], draws[:, 0], log.acc)
    mag = np.where(hit[:, 1, None], draws[:, 1], log.mag)
    logger.debug("Injected %d accelerometer and %d magnetometer outliers",
                 hit[:, 0].sum(), hit[:, 1].sum())
    return MeasurementLog(
        t=log.t,
        gyro=log.gyro,
        acc=acc,
        mag=mag,
        outlier_mask=log.outlier_mask | hit,
    )


def initial_estimate(truth: GroundTruth, cfg: SimConfig) -> Quaternion:
    """True initial orientation perturbed by the configured rotation vector"""
    return quat_normalize(quat_mul(truth.q_true[0], quat_exp(0.5 * np.asarray(cfg.init_error))))


def simulate_run(truth: GroundTruth, cfg: SimConfig, run_index: int = 0) -> MeasurementLog:
    """Measurement log of one Monte Carlo run, outliers included when configured"""
    run_cfg = cfg.model_copy(update={"seed": run_seed(cfg, run_index)})
    log = synthesize_measurements(truth, run_cfg)
    if cfg.outlier_prob > 0.0:
        log = inject_outliers(log, run_cfg)
    return log
