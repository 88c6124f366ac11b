import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

GRAD_EPS = 1e-12
SIGMA_OMEGA_DEFAULT = 5.0 * math.pi / 180.0
FILTER_IDS = ("fast", "madgwick", "mekf")

# Experimental-data tuning (gyro, accelerometer, magnetometer noise variances)
FILE_MEKF_GYRO_VAR = 1.3e-3
FILE_MEKF_ACC_VAR = 2.63e-2
FILE_MEKF_MAG_VAR = 2.5e-2
FILE_BETA = 2.4e-3
FILE_MADGWICK_GAIN = 1.4e-3
FILE_MEKF_P0 = 1e-2


def gravity_ref() -> np.ndarray:
    return np.array([0.0, 0.0, 1.0])


def magnetic_ref(dip: float) -> np.ndarray:
    return np.array([math.cos(dip), 0.0, -math.sin(dip)])


class FilterConfig(BaseModel):
    """Tuning of the gradient-correction filter"""

    model_config = ConfigDict(frozen=True)

    T: float = Field(..., gt=0, description="sampling time in seconds")
    beta: float = Field(..., ge=0, description="gain in rad/s")
    dip: float = 0.0
    grad_eps: float = Field(GRAD_EPS, gt=0)

    @property
    def g_n(self) -> np.ndarray:
        return gravity_ref()

    @property
    def m_n(self) -> np.ndarray:
        return magnetic_ref(self.dip)


class MekfConfig(BaseModel):
    """MEKF noise model: per-step process covariance and measurement covariances"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    T: float = Field(..., gt=0)
    q_gyro: np.ndarray
    r_acc: np.ndarray
    r_mag: np.ndarray
    dip: float = 0.0

    @field_validator("q_gyro", "r_acc", "r_mag", mode="before")
    @classmethod
    def validate_covariance(cls, v):
        mat = np.asarray(v, dtype=np.float64)
        if mat.ndim == 0:
            mat = float(mat) * np.eye(3)
        if mat.shape != (3, 3):
            raise ValueError(f"covariance must be 3x3, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("covariance contains NaN or Inf")
        if not np.allclose(mat, mat.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(mat).min() < -1e-12:
            raise ValueError("covariance must be positive semi-definite")
        return mat

    @classmethod
    def from_noise(cls, T: float, gyro_var: float, acc_var: float, mag_var: float,
                   dip: float = 0.0) -> "MekfConfig":
        """Build from per-axis noise variances; process noise is T²·σ_ω²·I"""
        return cls(
            T=T,
            q_gyro=T * T * gyro_var * np.eye(3),
            r_acc=acc_var * np.eye(3),
            r_mag=mag_var * np.eye(3),
            dip=dip,
        )

    @property
    def g_n(self) -> np.ndarray:
        return gravity_ref()

    @property
    def m_n(self) -> np.ndarray:
        return magnetic_ref(self.dip)


class SimConfig(BaseModel):
    """Monte Carlo trajectory and sensor-noise settings"""

    model_config = ConfigDict(frozen=True)

    fs: float = Field(10.0, gt=0, description="sampling rate in Hz")
    n_stationary: int = Field(200, gt=0)
    n_per_rotation: int = Field(200, gt=0)
    n_cycles: int = Field(10, gt=0)
    dip: float = 0.0
    sigma_omega: float = Field(SIGMA_OMEGA_DEFAULT, ge=0)
    sigma_acc: float = Field(0.01, ge=0)
    sigma_mag: float = Field(0.01, ge=0)
    outlier_prob: float = Field(0.0, ge=0, le=1)
    seed: int = 0
    init_error: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    # Accelerometer and magnetometer of sample k observe the orientation at sample k - vector_delay
    vector_delay: int = Field(1, ge=0)
    initial_orientation: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    @field_validator("initial_orientation")
    @classmethod
    def validate_initial_orientation(cls, v):
        norm = math.sqrt(sum(c * c for c in v))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError("initial_orientation must be a unit quaternion")
        return v

    @property
    def T(self) -> float:
        return 1.0 / self.fs

    @property
    def n_samples(self) -> int:
        return self.n_cycles * (self.n_stationary + 3 * self.n_per_rotation)

    @property
    def has_init_error(self) -> bool:
        return any(c != 0.0 for c in self.init_error)


class TuningConfig(BaseModel):
    """Optional overrides; unset values follow the simulated noise levels"""

    model_config = ConfigDict(frozen=True)

    beta: Optional[float] = Field(None, ge=0)
    madgwick_gain: Optional[float] = Field(None, ge=0)
    mekf_gyro_var: Optional[float] = Field(None, ge=0)
    mekf_acc_var: Optional[float] = Field(None, gt=0)
    mekf_mag_var: Optional[float] = Field(None, gt=0)
    mekf_p0: Optional[float] = Field(None, ge=0)


class ExperimentSpec(BaseModel):
    """One CLI invocation: scenario, filters, overrides and output locations"""

    scenario: Literal["gaussian", "outliers", "convergence", "file"] = "gaussian"
    filter: Literal["fast", "madgwick", "mekf", "all"] = "all"
    runs: int = Field(100, ge=1)
    seed: int = 42
    fs: float = Field(10.0, gt=0)
    beta: Optional[float] = Field(None, ge=0)
    madgwick_gain: Optional[float] = Field(None, ge=0)
    sigma_gyro: float = Field(SIGMA_OMEGA_DEFAULT, ge=0)
    sigma_acc: float = Field(0.01, ge=0)
    sigma_mag: float = Field(0.01, ge=0)
    outlier_prob: Optional[float] = Field(None, ge=0, le=1)
    init_error_deg: Optional[float] = None
    vector_delay: int = Field(1, ge=0)
    horizon: int = Field(150, gt=0)
    input: Optional[str] = None
    output_dir: str = "results"
    dip: Optional[float] = None
    estimate_dip: bool = False
    bias_window: int = Field(0, ge=0)
    count_ops: bool = False
    bench: bool = False
    bench_iters: int = Field(100_000, ge=1)
    save_log: bool = False
    catalog: Optional[str] = None

    @model_validator(mode="after")
    def validate_inputs(self):
        if self.scenario == "file":
            if not self.input:
                raise ValueError("scenario 'file' requires an input path")
            if self.dip is None and not self.estimate_dip:
                raise ValueError("scenario 'file' requires --dip or --estimate-dip")
        elif self.input is not None:
            raise ValueError(f"scenario '{self.scenario}' takes no input file")
        return self

    @property
    def filter_ids(self) -> List[str]:
        return list(FILTER_IDS) if self.filter == "all" else [self.filter]

    def to_sim_config(self) -> SimConfig:
        if self.outlier_prob is not None:
            outlier_prob = self.outlier_prob
        else:
            outlier_prob = 0.05 if self.scenario == "outliers" else 0.0
        if self.init_error_deg is not None:
            init_deg = self.init_error_deg
        else:
            init_deg = 90.0 if self.scenario == "convergence" else 0.0
        axis = np.ones(3) / math.sqrt(3.0)
        init_error = tuple(float(c) for c in math.radians(init_deg) * axis)
        return SimConfig(
            fs=self.fs,
            dip=self.dip or 0.0,
            sigma_omega=self.sigma_gyro,
            sigma_acc=self.sigma_acc,
            sigma_mag=self.sigma_mag,
            outlier_prob=outlier_prob,
            seed=self.seed,
            init_error=init_error,
            vector_delay=self.vector_delay,
        )

    def to_tuning(self) -> TuningConfig:
        return TuningConfig(beta=self.beta, madgwick_gain=self.madgwick_gain)
