"""
Error metrics, Monte Carlo orchestration, convergence curves, op counting and
per-iteration timing for the three filters.

Monte Carlo runs are independent, so a batch of runs is advanced as one
vectorised filter; results are aggregated in run-index order.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import kernels
from .baselines import run_madgwick, run_mekf
from .errors import FusionError, LengthMismatch, MonteCarloRunError, UnsupportedFilter
from .estimator import beta_from_gyro_sigma, body_references, run_filter
from .opcount import OpCounter
from .rotmath import euler_to_quat, quat_conj, quat_mul, quat_to_euler, rotation_angle
from .simulator import GroundTruth, generate_trajectory, initial_estimate, run_seed, simulate_run
from .spec_schema import (
    FILTER_IDS,
    FilterConfig,
    MekfConfig,
    SimConfig,
    TuningConfig,
    gravity_ref,
    magnetic_ref,
)

logger = logging.getLogger(__name__)

AXES = ("roll", "pitch", "yaw")
KNOWN_INIT_P0 = 1e-6
UNKNOWN_INIT_P0 = (math.pi / 2) ** 2 / 3
# MEKF measurement variances are floored so the innovation covariance stays invertible
MIN_MEASUREMENT_VAR = 1e-8
MIN_BENCH_ITERS = 100_000
WARMUP_ITERS = 1_000
BENCH_REPEATS = 5


@dataclass(eq=False)
class RunReport:
    filter_id: str
    run_index: int
    seed: int
    euler_err_deg: NDArray[np.float64]
    angle_err_deg: NDArray[np.float64]
    rmse_deg: NDArray[np.float64]
    time_per_iter: Optional[float] = None
    op_count: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "run": self.run_index,
            "seed": self.seed,
            "rmse_deg": dict(zip(AXES, (float(v) for v in self.rmse_deg))),
            "final_angle_deg": float(self.angle_err_deg[-1]),
            "max_angle_deg": float(self.angle_err_deg.max()),
        }


@dataclass(eq=False)
class McSummary:
    """Pooled RMSE and per-sample rotation-angle statistics across runs"""

    filter_id: str
    n_runs: int
    rmse_deg: NDArray[np.float64]
    run_rmse_deg: NDArray[np.float64]
    mean_angle_deg: NDArray[np.float64]
    std_angle_deg: NDArray[np.float64]
    reports: List[RunReport] = field(default_factory=list)

    def band(self, k: float = 2.0) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
        spread = k * self.std_angle_deg
        return self.mean_angle_deg - spread, self.mean_angle_deg + spread

    def to_dict(self) -> dict:
        return {
            "filter": self.filter_id,
            "n_runs": self.n_runs,
            "rmse_deg": dict(zip(AXES, (float(v) for v in self.rmse_deg))),
            "final_mean_angle_deg": float(self.mean_angle_deg[-1]),
            "final_std_angle_deg": float(self.std_angle_deg[-1]),
            "runs": [r.to_dict() for r in self.reports],
        }


@dataclass(frozen=True)
class ResolvedTuning:
    filter_cfg: FilterConfig
    madgwick_gain: float
    mekf_cfg: MekfConfig
    mekf_p0: float


def resolve_tuning(sim: SimConfig, tuning: Optional[TuningConfig] = None) -> ResolvedTuning:
    """Fill unset tuning values from the simulated noise levels"""
    tuning = tuning or TuningConfig()

    def pick(value, default):
        return default if value is None else value

    beta = pick(tuning.beta, beta_from_gyro_sigma(sim.sigma_omega))
    gain = pick(tuning.madgwick_gain, math.sqrt(3.0 / 4.0) * sim.sigma_omega)
    gyro_var = pick(tuning.mekf_gyro_var, sim.sigma_omega**2)
    acc_var = pick(tuning.mekf_acc_var, max(sim.sigma_acc**2, MIN_MEASUREMENT_VAR))
    mag_var = pick(tuning.mekf_mag_var, max(sim.sigma_mag**2, MIN_MEASUREMENT_VAR))
    p0 = pick(tuning.mekf_p0, UNKNOWN_INIT_P0 if sim.has_init_error else KNOWN_INIT_P0)
    return ResolvedTuning(
        filter_cfg=FilterConfig(T=sim.T, beta=beta, dip=sim.dip),
        madgwick_gain=gain,
        mekf_cfg=MekfConfig.from_noise(sim.T, gyro_var, acc_var, mag_var, dip=sim.dip),
        mekf_p0=p0,
    )


def run_filter_batch(filter_id: str, q_init: ArrayLike, gyro: ArrayLike, acc: ArrayLike,
                     mag: ArrayLike, tuning: ResolvedTuning) -> NDArray[np.float64]:
    """Estimates after every sample for one or many runs shaped (..., N, 3)"""
    if filter_id == "fast":
        return run_filter(q_init, gyro, acc, mag, tuning.filter_cfg)
    if filter_id == "madgwick":
        cfg = tuning.filter_cfg
        return run_madgwick(q_init, gyro, acc, mag, cfg.T, tuning.madgwick_gain, cfg.dip)
    if filter_id == "mekf":
        return run_mekf(q_init, tuning.mekf_p0, gyro, acc, mag, tuning.mekf_cfg)
    raise UnsupportedFilter(f"unknown filter '{filter_id}', expected one of {FILTER_IDS}")


# -- error metrics ----------------------------------------------------------


def wrap_deg(angle: ArrayLike) -> NDArray[np.float64]:
    """Wrap degrees to (−180, 180]"""
    wrapped = np.mod(np.asarray(angle, dtype=np.float64) + 180.0, 360.0) - 180.0
    return np.where(wrapped == -180.0, 180.0, wrapped)


def euler_errors_deg(estimates: ArrayLike, q_true: ArrayLike) -> NDArray[np.float64]:
    """Roll/pitch/yaw of conj(q_true) ⊙ q_est, in degrees"""
    delta = quat_mul(quat_conj(q_true), estimates)
    return wrap_deg(np.degrees(quat_to_euler(delta)))


def angle_errors_deg(estimates: ArrayLike, q_true: ArrayLike) -> NDArray[np.float64]:
    return np.degrees(rotation_angle(q_true, estimates))


def pooled_rmse(errors: ArrayLike) -> NDArray[np.float64]:
    """RMSE per axis over every leading dimension of (..., 3) errors"""
    errors = np.asarray(errors, dtype=np.float64)
    return np.sqrt(np.mean(errors.reshape(-1, errors.shape[-1]) ** 2, axis=0))


def rmse_euler(estimates: ArrayLike, truth: GroundTruth, skip: int = 0) -> NDArray[np.float64]:
    """Per-axis (roll, pitch, yaw) RMSE in degrees over samples >= skip"""
    estimates = np.asarray(estimates, dtype=np.float64)
    if estimates.shape[-2] != len(truth):
        raise LengthMismatch(f"{estimates.shape[-2]} estimates for {len(truth)} ground-truth samples")
    if not 0 <= skip < len(truth):
        raise ValueError(f"skip must be in [0, {len(truth)}), got {skip}")
    errors = euler_errors_deg(estimates, truth.q_true)
    return pooled_rmse(errors[..., skip:, :])


# -- Monte Carlo ------------------------------------------------------------


def _truncate(truth: GroundTruth, n: int) -> GroundTruth:
    return GroundTruth(t=truth.t[:n], q_true=truth.q_true[:n], omega_true=truth.omega_true[:n])


def _campaign(filter_id: str, cfg: SimConfig, n_runs: int, tuning: Optional[TuningConfig],
              n_samples: Optional[int], batch_size: int, skip: int) -> McSummary:
    if n_runs < 1:
        raise ValueError(f"n_runs must be at least 1, got {n_runs}")
    if filter_id not in FILTER_IDS:
        raise UnsupportedFilter(f"unknown filter '{filter_id}', expected one of {FILTER_IDS}")
    resolved = resolve_tuning(cfg, tuning)
    truth = generate_trajectory(cfg)
    q_init = initial_estimate(truth, cfg)
    if n_samples is not None:
        truth = _truncate(truth, n_samples)

    euler_err, angle_err = [], []
    for start in range(0, n_runs, batch_size):
        indices = range(start, min(start + batch_size, n_runs))
        logs = [simulate_run(truth, cfg, i) for i in indices]
        gyro = np.stack([log.gyro[: len(truth)] for log in logs])
        acc = np.stack([log.acc[: len(truth)] for log in logs])
        mag = np.stack([log.mag[: len(truth)] for log in logs])
        q0 = np.broadcast_to(q_init, (len(logs), 4))
        try:
            estimates = run_filter_batch(filter_id, q0, gyro, acc, mag, resolved)
        except FusionError as exc:
            offset = exc.batch_index if exc.batch_index is not None else 0
            raise MonteCarloRunError(start + offset, exc) from exc
        euler_err.append(euler_errors_deg(estimates, truth.q_true))
        angle_err.append(angle_errors_deg(estimates, truth.q_true))
        logger.info("%s: finished runs %d-%d of %d", filter_id, indices[0], indices[-1], n_runs)

    euler_err = np.concatenate(euler_err)
    angle_err = np.concatenate(angle_err)
    reports = [
        RunReport(
            filter_id=filter_id,
            run_index=i,
            seed=run_seed(cfg, i),
            euler_err_deg=euler_err[i],
            angle_err_deg=angle_err[i],
            rmse_deg=pooled_rmse(euler_err[i, skip:]),
        )
        for i in range(n_runs)
    ]
    return McSummary(
        filter_id=filter_id,
        n_runs=n_runs,
        rmse_deg=pooled_rmse(euler_err[:, skip:]),
        run_rmse_deg=np.stack([r.rmse_deg for r in reports]),
        mean_angle_deg=angle_err.mean(axis=0),
        std_angle_deg=angle_err.std(axis=0),
        reports=reports,
    )


def run_monte_carlo(filter_id: str, cfg: SimConfig, n_runs: int,
                    tuning: Optional[TuningConfig] = None, skip: int = 0,
                    batch_size: int = 100) -> McSummary:
    """Simulate n_runs runs (seed + run index) and pool the filter's errors"""
    logger.info("Monte Carlo: filter=%s runs=%d outlier_prob=%.3f",
                filter_id, n_runs, cfg.outlier_prob)
    return _campaign(filter_id, cfg, n_runs, tuning, None, batch_size, skip)


def convergence_curves(filter_id: str, cfg: SimConfig, n_runs: int, horizon: int = 150,
                       tuning: Optional[TuningConfig] = None,
                       batch_size: int = 100) -> McSummary:
    """Mean and spread of the rotation-angle error over the first `horizon` samples"""
    if not 0 < horizon <= cfg.n_samples:
        raise ValueError(f"horizon must be in (0, {cfg.n_samples}], got {horizon}")
    return _campaign(filter_id, cfg, n_runs, tuning, horizon, batch_size, skip=0)


# -- op counts and timing ---------------------------------------------------


GENERIC_DIP = math.radians(30.0)


def _generic_inputs():
    """A non-degenerate sample: estimate and measurements disagree, all rates non-zero"""
    q = tuple(float(c) for c in euler_to_quat([0.3, -0.2, 0.5]))
    q_true = euler_to_quat([0.25, -0.15, 0.6])
    g_b, m_b = body_references(q_true, gravity_ref(), magnetic_ref(GENERIC_DIP))
    gyro = (0.1, -0.2, 0.3)
    acc = tuple(float(c) for c in -g_b + np.array([0.01, -0.02, 0.005]))
    mag = tuple(float(c) for c in m_b + np.array([-0.01, 0.015, 0.02]))
    return q, gyro, acc, mag


def _kernel_call(filter_id: str, tuning: ResolvedTuning) -> Callable:
    """Scalar step advancing a filter state: q for the gradient filters, (q, P) for the MEKF"""
    cfg = tuning.filter_cfg
    mag_ref = (math.cos(cfg.dip), -math.sin(cfg.dip))
    if filter_id == "fast":
        half_t = 0.5 * cfg.T
        return lambda q, w, a, m, sqrt=math.sqrt, **_: kernels.fast_step(
            q, w, a, m, half_t, cfg.beta, mag_ref, cfg.grad_eps, sqrt)
    if filter_id == "madgwick":
        return lambda q, w, a, m, sqrt=math.sqrt, **_: kernels.madgwick_step(
            q, w, a, m, cfg.T, tuning.madgwick_gain, mag_ref, cfg.grad_eps, sqrt)
    if filter_id == "mekf":
        mc = tuning.mekf_cfg
        mekf_ref = (math.cos(mc.dip), -math.sin(mc.dip))
        q_gyro, r_acc, r_mag = (tuple(map(tuple, m.tolist())) for m in (mc.q_gyro, mc.r_acc, mc.r_mag))
        return lambda s, w, a, m, sqrt=math.sqrt, sin=math.sin, cos=math.cos: kernels.mekf_step(
            s[0], s[1], w, a, m, mc.T, mekf_ref, q_gyro, r_acc, r_mag, sqrt, sin, cos)
    raise UnsupportedFilter(f"unknown filter '{filter_id}', expected one of {FILTER_IDS}")


def _initial_state(filter_id: str, q, tuning: ResolvedTuning, wrap=float):
    q = tuple(wrap(c) for c in q)
    if filter_id != "mekf":
        return q
    p0 = tuning.mekf_p0
    P = tuple(tuple(wrap(p0 if i == j else 0.0) for j in range(3)) for i in range(3))
    return q, P


def count_ops(filter_id: str) -> int:
    """Dynamic arithmetic-op count of one step on generic inputs"""
    q, gyro, acc, mag = _generic_inputs()
    tuning = resolve_tuning(SimConfig(dip=GENERIC_DIP))
    call = _kernel_call(filter_id, tuning)
    counter = OpCounter()
    wrap = lambda values: tuple(counter.wrap(v) for v in values)  # noqa: E731
    state = _initial_state(filter_id, q, tuning, counter.wrap)
    call(state, wrap(gyro), wrap(acc), wrap(mag), sqrt=counter.sqrt, sin=counter.sin, cos=counter.cos)
    logger.debug("%s step: %d arithmetic operations", filter_id, counter.count)
    return counter.count


def _timed_block(advance: Callable, state, n_iters: int):
    elapsed = np.empty(n_iters)
    clock = time.perf_counter_ns
    for _ in range(WARMUP_ITERS):
        state = advance(state)
    for i in range(n_iters):
        start = clock()
        state = advance(state)
        elapsed[i] = clock() - start
    return float(np.median(elapsed)) * 1e-9, state


def benchmark_filters(filter_ids: Sequence[str], n_iters: int = MIN_BENCH_ITERS,
                      tuning: Optional[ResolvedTuning] = None,
                      repeats: int = BENCH_REPEATS) -> Dict[str, float]:
    """
    Seconds per step for each filter's scalar kernel: the minimum over `repeats`
    interleaved blocks of the per-block median, n_iters timed steps in total.

    Blocks alternate between filters in rotating order so that drift in machine
    load affects every filter alike.
    """
    if n_iters < 1:
        raise ValueError("n_iters must be at least 1")
    if repeats < 1:
        raise ValueError(f"repeats must be at least 1, got {repeats}")
    repeats = min(repeats, n_iters)
    if n_iters < MIN_BENCH_ITERS:
        logger.warning("Timing over %d iterations; %d or more give stable medians",
                       n_iters, MIN_BENCH_ITERS)
    tuning = tuning or resolve_tuning(SimConfig(dip=GENERIC_DIP))
    q, gyro, acc, mag = _generic_inputs()

    advances, states = {}, {}
    for fid in filter_ids:
        call = _kernel_call(fid, tuning)
        advances[fid] = lambda s, call=call: call(s, gyro, acc, mag)
        states[fid] = _initial_state(fid, q, tuning)

    block = n_iters // repeats
    best = {fid: math.inf for fid in filter_ids}
    order = list(filter_ids)
    for r in range(repeats):
        for fid in order[r % len(order):] + order[: r % len(order)]:
            median, states[fid] = _timed_block(advances[fid], states[fid], block)
            best[fid] = min(best[fid], median)
    logger.debug("Benchmark over %d x %d steps: %s", repeats, block, best)
    return best


def time_per_iteration(filter_id: str, n_iters: int = MIN_BENCH_ITERS,
                       tuning: Optional[ResolvedTuning] = None,
                       repeats: int = BENCH_REPEATS) -> float:
    """Min-of-medians wall time in seconds of one filter step over n_iters warm iterations"""
    return benchmark_filters([filter_id], n_iters, tuning, repeats)[filter_id]
