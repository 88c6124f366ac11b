"""
Fast orientation filter: gyroscope integration corrected by a single normalised
gradient-descent step on the accelerometer/magnetometer residuals.

All functions broadcast over a leading batch shape so a set of independent
filters can be advanced together.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateGeometry
from .rotmath import (
    Quaternion,
    Vec3,
    as_finite,
    exp_R,
    quat_normalize,
    quat_to_rotmat,
    rotmat_to_quat,
    s_matrix,
)
from .spec_schema import FilterConfig

logger = logging.getLogger(__name__)

MIN_INIT_NORM = 0.5
MIN_INIT_ANGLE = math.radians(1.0)


@dataclass(frozen=True)
class FilterState:
    q_hat: Quaternion


def body_references(q_hat: ArrayLike, g_n: ArrayLike, m_n: ArrayLike):
    """R(q^bn) g^n and R(q^bn) m^n: the navigation references seen from the body"""
    rot = quat_to_rotmat(q_hat)
    g_b = np.einsum("...ji,j->...i", rot, g_n)
    m_b = np.einsum("...ji,j->...i", rot, m_n)
    return g_b, m_b


def gradient_v(q_hat: ArrayLike, y_a: ArrayLike, y_m: ArrayLike, cfg: FilterConfig) -> Vec3:
    """∇V at η = 0, linearised around the previous estimate"""
    y_a = as_finite(y_a, "accelerometer measurement")
    y_m = as_finite(y_m, "magnetometer measurement")
    g_b, m_b = body_references(q_hat, cfg.g_n, cfg.m_n)
    return -np.cross(g_b, y_a + g_b) + np.cross(m_b, y_m - m_b)


def cost_v(eta: ArrayLike, q_hat: ArrayLike, y_a: ArrayLike, y_m: ArrayLike,
           cfg: FilterConfig) -> NDArray[np.float64]:
    """V(η) with the exact exp_R, for a deviation η on the body side of q_hat"""
    g_b, m_b = body_references(q_hat, cfg.g_n, cfg.m_n)
    dev = exp_R(eta)
    g_eta = np.einsum("...ji,...j->...i", dev, g_b)
    m_eta = np.einsum("...ji,...j->...i", dev, m_b)
    acc_res = np.asarray(y_a) + g_eta
    mag_res = np.asarray(y_m) - m_eta
    return 0.5 * np.sum(acc_res**2, axis=-1) + 0.5 * np.sum(mag_res**2, axis=-1)


def step(state: FilterState, y_omega: ArrayLike, y_a: ArrayLike, y_m: ArrayLike,
         cfg: FilterConfig) -> FilterState:
    """One filter iteration: ω̂ = y_ω − β ∇V/‖∇V‖, q̂ ← normalise(q̂ + T/2 S(q̂) ω̂)"""
    y_omega = as_finite(y_omega, "gyroscope measurement")
    grad = gradient_v(state.q_hat, y_a, y_m, cfg)
    norm = np.linalg.norm(grad, axis=-1, keepdims=True)
    active = norm >= cfg.grad_eps
    direction = np.where(active, grad / np.where(active, norm, 1.0), 0.0)
    omega_hat = y_omega - cfg.beta * direction

    increment = np.einsum("...ij,...j->...i", s_matrix(state.q_hat), omega_hat)
    q_hat = state.q_hat + 0.5 * cfg.T * increment
    return FilterState(q_hat=quat_normalize(q_hat))


def beta_from_gyro_sigma(sigma_omega: float) -> float:
    """Gain matching the integration drift: β = √3 σ_ω"""
    if sigma_omega < 0:
        raise ValueError(f"sigma_omega must be non-negative, got {sigma_omega}")
    return math.sqrt(3.0) * sigma_omega


def init_from_accmag(y_a: ArrayLike, y_m: ArrayLike, cfg: FilterConfig) -> Quaternion:
    """
    TRIAD initialisation: the body-frame vertical comes from −y_a, the heading
    from the horizontal part of y_m. Returns q^nb.
    """
    y_a = as_finite(y_a, "accelerometer measurement")
    y_m = as_finite(y_m, "magnetometer measurement")
    norm_a = np.linalg.norm(y_a)
    norm_m = np.linalg.norm(y_m)
    if norm_a <= MIN_INIT_NORM or norm_m <= MIN_INIT_NORM:
        raise DegenerateGeometry(
            f"initialisation needs ‖y_a‖, ‖y_m‖ > {MIN_INIT_NORM}, got {norm_a:.3g}, {norm_m:.3g}"
        )
    cos_angle = float(np.dot(y_a, y_m) / (norm_a * norm_m))
    if abs(cos_angle) > math.cos(MIN_INIT_ANGLE):
        raise DegenerateGeometry("accelerometer and magnetometer directions are parallel")

    up_b = -y_a / norm_a
    horizontal = y_m - np.dot(y_m, up_b) * up_b
    north_b = horizontal / np.linalg.norm(horizontal)
    west_b = np.cross(up_b, north_b)
    # Rows of R(q^nb) are the navigation axes expressed in the body frame
    rot = np.stack([north_b, west_b, up_b])
    q = rotmat_to_quat(rot)
    logger.debug("Initial orientation from accelerometer/magnetometer: %s", q)
    return q


def run_filter(q_init: ArrayLike, gyro: ArrayLike, acc: ArrayLike, mag: ArrayLike,
               cfg: FilterConfig) -> NDArray[np.float64]:
    """
    Run the filter over sequences shaped (..., N, 3) and return the estimate
    after each sample, shaped (..., N, 4).
    """
    gyro = as_finite(gyro, "gyroscope measurement")
    acc = np.asarray(acc, dtype=np.float64)
    mag = np.asarray(mag, dtype=np.float64)
    n_samples = gyro.shape[-2]
    state = FilterState(q_hat=quat_normalize(q_init))
    estimates = np.empty(gyro.shape[:-1] + (4,))
    for k in range(n_samples):
        state = step(state, gyro[..., k, :], acc[..., k, :], mag[..., k, :], cfg)
        estimates[..., k, :] = state.q_hat
    return estimates
