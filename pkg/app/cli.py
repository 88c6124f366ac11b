"""
Command-line front end: Monte Carlo campaigns over the simulated scenarios and
filtering of recorded IMU logs.

    python -m app.cli --scenario gaussian --filter all --runs 100 --seed 42
    python -m app.cli --scenario file --input log.csv --filter fast --dip 1.2

Settings are merged as built-in defaults < JSON config file < command-line flags.
Every result is computed before the first output file is written.
"""
import argparse
import json
import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from .catalog import record_run
from .checks import assert_unit_quaternions
from .estimator import init_from_accmag
from .evaluation import (
    ResolvedTuning,
    benchmark_filters,
    convergence_curves,
    count_ops,
    resolve_tuning,
    run_filter_batch,
    run_monte_carlo,
)
from .io_sources import (
    ingest_csv,
    write_frame,
    write_ground_truth,
    write_measurement_log,
    write_orientation,
)
from .report import curve_frame, render_table, rmse_frame, table_rows, write_json
from .simulator import generate_trajectory, simulate_run
from .spec_schema import (
    FILE_BETA,
    FILE_MADGWICK_GAIN,
    FILE_MEKF_ACC_VAR,
    FILE_MEKF_GYRO_VAR,
    FILE_MEKF_MAG_VAR,
    FILE_MEKF_P0,
    ExperimentSpec,
    MekfConfig,
)

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "ORIENTATION_FUSION_CONFIG"
# Fields that never reach summary.json: they name locations or machine-dependent work
NON_RESULT_FIELDS = {"output_dir", "catalog", "bench", "bench_iters", "save_log"}


class ExperimentRunner:
    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.output_dir = Path(spec.output_dir)
        # Pending outputs: file name -> writer callable
        self.outputs: Dict[str, Callable] = {}
        self.table = ""

    def _per_filter_name(self, stem: str, filter_id: str) -> str:
        return f"{stem}_{filter_id}.csv" if len(self.spec.filter_ids) > 1 else f"{stem}.csv"

    def _benchmarks(self, tuning: ResolvedTuning):
        spec = self.spec
        op_counts, timings = {}, {}
        if spec.count_ops:
            op_counts = {fid: count_ops(fid) for fid in spec.filter_ids}
        if spec.bench:
            timings = benchmark_filters(spec.filter_ids, spec.bench_iters, tuning)
        return op_counts, timings

    def run_simulated(self):
        spec = self.spec
        sim = spec.to_sim_config()
        tuning = spec.to_tuning()

        summaries = []
        for fid in spec.filter_ids:
            if spec.scenario == "convergence":
                summary = convergence_curves(fid, sim, spec.runs, spec.horizon, tuning)
            else:
                summary = run_monte_carlo(fid, sim, spec.runs, tuning)
            summaries.append(summary)
            frame = curve_frame(summary)
            self.outputs[self._per_filter_name("convergence", fid)] = (
                lambda path, frame=frame: write_frame(frame, path)
            )

        op_counts, timings = self._benchmarks(resolve_tuning(sim, tuning))
        rows = table_rows(spec.filter_ids, summaries, timings, op_counts)
        self.outputs["rmse_table.csv"] = lambda path: write_frame(rmse_frame(rows), path)

        payload = {
            "experiment": spec.model_dump(exclude=NON_RESULT_FIELDS),
            "simulation": sim.model_dump(),
            "op_counts": op_counts,
            "filters": [s.to_dict() for s in summaries],
        }
        self.outputs["summary.json"] = lambda path: write_json(payload, path)

        if spec.save_log:
            truth = generate_trajectory(sim)
            log = simulate_run(truth, sim, 0)
            self.outputs["measurements.csv"] = lambda path: write_measurement_log(log, path)
            self.outputs["ground_truth.csv"] = lambda path: write_ground_truth(truth, path)

        title = f"{spec.scenario} scenario, {spec.runs} runs, seed {spec.seed}"
        self.table = render_table(rows, title)

    def run_file(self):
        spec = self.spec
        beta = FILE_BETA if spec.beta is None else spec.beta
        log, filter_cfg = ingest_csv(spec.input, spec.bias_window, spec.dip, spec.estimate_dip, beta)
        tuning = ResolvedTuning(
            filter_cfg=filter_cfg,
            madgwick_gain=FILE_MADGWICK_GAIN if spec.madgwick_gain is None else spec.madgwick_gain,
            mekf_cfg=MekfConfig.from_noise(
                filter_cfg.T, FILE_MEKF_GYRO_VAR, FILE_MEKF_ACC_VAR, FILE_MEKF_MAG_VAR,
                dip=filter_cfg.dip,
            ),
            mekf_p0=FILE_MEKF_P0,
        )
        q_init = init_from_accmag(log.acc[0], log.mag[0], filter_cfg)

        finals = {}
        for fid in spec.filter_ids:
            estimates = run_filter_batch(fid, q_init, log.gyro, log.acc, log.mag, tuning)
            assert_unit_quaternions(estimates)
            finals[fid] = [float(c) for c in estimates[-1]]
            self.outputs[self._per_filter_name("orientation", fid)] = (
                lambda path, estimates=estimates: write_orientation(log.t, estimates, path)
            )

        op_counts, timings = self._benchmarks(tuning)
        payload = {
            "experiment": spec.model_dump(exclude=NON_RESULT_FIELDS),
            "n_samples": len(log),
            "T": filter_cfg.T,
            "dip": filter_cfg.dip,
            "beta": filter_cfg.beta,
            "madgwick_gain": tuning.madgwick_gain,
            "initial_quaternion": [float(c) for c in q_init],
            "final_quaternion": finals,
            "op_counts": op_counts,
        }
        self.outputs["summary.json"] = lambda path: write_json(payload, path)

        rows = table_rows(spec.filter_ids, None, timings, op_counts)
        self.table = render_table(rows, f"file {spec.input}, {len(log)} samples")

    def write_outputs(self) -> List[str]:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, writer in self.outputs.items():
            path = self.output_dir / name
            writer(path)
            written.append(str(path))
        return written


def run_experiment(spec: ExperimentSpec) -> int:
    """Run one experiment; returns the process exit code"""
    started_at = datetime.now()
    written: List[str] = []
    error: Optional[str] = None
    try:
        runner = ExperimentRunner(spec)
        if spec.scenario == "file":
            runner.run_file()
        else:
            runner.run_simulated()
        written = runner.write_outputs()
        print(runner.table)
        for path in written:
            print(f"✓ Wrote: {path}")
    except (ValueError, OSError) as e:
        error = str(e)
        print(f"✗ Error: {e}")

    if spec.catalog:
        record_run(
            spec.catalog,
            spec.scenario,
            spec.filter_ids,
            "failed" if error else "success",
            seed=spec.seed,
            output_paths=written,
            started_at=started_at,
            ended_at=datetime.now(),
            error_message=error,
        )
    return 1 if error else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Orientation filter experiments")
    # Flags default to None so that only explicitly given ones override the config file
    parser.add_argument("--config", help="JSON file with experiment settings")
    parser.add_argument("--scenario", choices=["gaussian", "outliers", "convergence", "file"])
    parser.add_argument("--filter", choices=["fast", "madgwick", "mekf", "all"])
    parser.add_argument("--runs", type=int, help="Monte Carlo runs")
    parser.add_argument("--seed", type=int, help="Base seed; run i uses seed + i")
    parser.add_argument("--fs", type=float, help="Sampling rate in Hz")
    parser.add_argument("--beta", type=float, help="Gradient gain of the fast filter in rad/s")
    parser.add_argument("--madgwick-gain", type=float, help="Gain of the Madgwick filter")
    parser.add_argument("--sigma-gyro", type=float, help="Gyroscope noise std in rad/s")
    parser.add_argument("--sigma-acc", type=float, help="Accelerometer noise std")
    parser.add_argument("--sigma-mag", type=float, help="Magnetometer noise std")
    parser.add_argument("--outlier-prob", type=float, help="Per-sample outlier probability")
    parser.add_argument("--init-error-deg", type=float, help="Initial orientation error in degrees")
    parser.add_argument("--vector-delay", type=int,
                        help="Samples by which accelerometer and magnetometer trail the gyroscope")
    parser.add_argument("--horizon", type=int, help="Samples in the convergence curves")
    parser.add_argument("--input", help="IMU CSV log for the file scenario")
    parser.add_argument("--output-dir", help="Directory for result files")
    parser.add_argument("--dip", type=float, help="Magnetic dip angle in rad")
    parser.add_argument("--estimate-dip", action="store_true", default=None,
                        help="Estimate the dip angle from the stationary window")
    parser.add_argument("--bias-window", type=int,
                        help="Stationary samples for gyroscope bias removal")
    parser.add_argument("--count-ops", action="store_true", default=None,
                        help="Count arithmetic operations per filter step")
    parser.add_argument("--bench", action="store_true", default=None, help="Time one filter step")
    parser.add_argument("--bench-iters", type=int, help="Timed iterations per filter")
    parser.add_argument("--save-log", action="store_true", default=None,
                        help="Export the first run's measurements and ground truth")
    parser.add_argument("--catalog", help="SQLite run catalog to record this run in")
    parser.add_argument("--verbose", action="store_true", help="Log progress")
    return parser


def load_settings(args: argparse.Namespace) -> dict:
    """Config file values overlaid with explicitly given flags"""
    settings = {}
    config_path = args.config or os.getenv(CONFIG_ENV_VAR)
    if config_path:
        with open(config_path, "r") as f:
            settings.update(json.load(f))
    flags = {
        k: v for k, v in vars(args).items() if k not in ("config", "verbose") and v is not None
    }
    settings.update(flags)
    return settings


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        spec = ExperimentSpec(**load_settings(args))
    except (ValidationError, ValueError, OSError) as e:
        print(f"✗ Error: {e}")
        return 1
    return run_experiment(spec)


if __name__ == "__main__":
    raise SystemExit(main())
