"""
Comparison filters: the quaternion gradient-descent (Madgwick-style) filter and a
multiplicative EKF over a rotation-vector orientation deviation.

Both follow the measurement models used by the fast filter, with the magnetic
reference m^n = (cos δ, 0, −sin δ) fixed rather than estimated online.
"""
import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import block_diag

from .errors import SingularInnovation
from .estimator import body_references
from .rotmath import (
    Quaternion,
    as_finite,
    exp_R,
    quat_exp,
    quat_mul,
    quat_normalize,
    s_matrix,
    skew,
)
from .spec_schema import GRAD_EPS, MekfConfig, magnetic_ref

logger = logging.getLogger(__name__)

INNOVATION_COND_LIMIT = 1e12


@dataclass(frozen=True)
class MadgwickState:
    q_hat: Quaternion


@dataclass(frozen=True)
class MekfState:
    q_hat: Quaternion
    P: NDArray[np.float64]


# -- Madgwick ---------------------------------------------------------------


def madgwick_objective(q: ArrayLike, y_a: ArrayLike, y_m: ArrayLike, dip: float = 0.0):
    """Stacked residual f(q) = [y_a + R(q^bn) g^n ; y_m − R(q^bn) m^n], shape (..., 6)"""
    q = as_finite(q, "quaternion")
    bx, _, bz = magnetic_ref(dip)
    q0, q1, q2, q3 = np.moveaxis(q, -1, 0)
    gx = 2.0 * (q1 * q3 - q0 * q2)
    gy = 2.0 * (q0 * q1 + q2 * q3)
    gz = 1.0 - 2.0 * (q1 * q1 + q2 * q2)
    r11 = 1.0 - 2.0 * (q2 * q2 + q3 * q3)
    r12 = 2.0 * (q1 * q2 - q0 * q3)
    r13 = 2.0 * (q1 * q3 + q0 * q2)
    g_b = np.stack([gx, gy, gz], axis=-1)
    m_b = bx * np.stack([r11, r12, r13], axis=-1) + bz * g_b
    return np.concatenate([np.asarray(y_a) + g_b, np.asarray(y_m) - m_b], axis=-1)


def madgwick_jacobian(q: ArrayLike, dip: float = 0.0) -> NDArray[np.float64]:
    """6×4 Jacobian of madgwick_objective with respect to (q0, q1, q2, q3)"""
    q = as_finite(q, "quaternion")
    bx, _, bz = magnetic_ref(dip)
    q0, q1, q2, q3 = np.moveaxis(q, -1, 0)
    zero = np.zeros_like(q0)
    jac_g = np.stack(
        [
            np.stack([-2 * q2, 2 * q3, -2 * q0, 2 * q1], axis=-1),
            np.stack([2 * q1, 2 * q0, 2 * q3, 2 * q2], axis=-1),
            np.stack([zero, -4 * q1, -4 * q2, zero], axis=-1),
        ],
        axis=-2,
    )
    jac_r1 = np.stack(
        [
            np.stack([zero, zero, -4 * q2, -4 * q3], axis=-1),
            np.stack([-2 * q3, 2 * q2, 2 * q1, -2 * q0], axis=-1),
            np.stack([2 * q2, 2 * q3, 2 * q0, 2 * q1], axis=-1),
        ],
        axis=-2,
    )
    return np.concatenate([jac_g, -(bx * jac_r1 + bz * jac_g)], axis=-2)


def madgwick_gradient(q: ArrayLike, y_a: ArrayLike, y_m: ArrayLike, dip: float = 0.0):
    """∇f = Jᵀ f, the gradient of ½‖f(q)‖²"""
    f = madgwick_objective(q, y_a, y_m, dip)
    return np.einsum("...ji,...j->...i", madgwick_jacobian(q, dip), f)


def madgwick_step(state: MadgwickState, y_omega: ArrayLike, y_a: ArrayLike, y_m: ArrayLike,
                  T: float, beta_m: float, dip: float = 0.0,
                  grad_eps: float = GRAD_EPS) -> MadgwickState:
    """q̂ ← normalise(q̂ + T (½ S(q̂) y_ω − β_m ∇f/‖∇f‖))"""
    y_omega = as_finite(y_omega, "gyroscope measurement")
    y_a = as_finite(y_a, "accelerometer measurement")
    y_m = as_finite(y_m, "magnetometer measurement")
    grad = madgwick_gradient(state.q_hat, y_a, y_m, dip)
    norm = np.linalg.norm(grad, axis=-1, keepdims=True)
    active = norm >= grad_eps
    direction = np.where(active, grad / np.where(active, norm, 1.0), 0.0)

    q_dot = 0.5 * np.einsum("...ij,...j->...i", s_matrix(state.q_hat), y_omega) - beta_m * direction
    return MadgwickState(q_hat=quat_normalize(state.q_hat + T * q_dot))


def run_madgwick(q_init: ArrayLike, gyro: ArrayLike, acc: ArrayLike, mag: ArrayLike,
                 T: float, beta_m: float, dip: float = 0.0) -> NDArray[np.float64]:
    """Estimates after each sample for sequences shaped (..., N, 3)"""
    gyro = np.asarray(gyro, dtype=np.float64)
    acc = np.asarray(acc, dtype=np.float64)
    mag = np.asarray(mag, dtype=np.float64)
    state = MadgwickState(q_hat=quat_normalize(q_init))
    estimates = np.empty(gyro.shape[:-1] + (4,))
    for k in range(gyro.shape[-2]):
        state = madgwick_step(state, gyro[..., k, :], acc[..., k, :], mag[..., k, :], T, beta_m, dip)
        estimates[..., k, :] = state.q_hat
    return estimates


# -- MEKF -------------------------------------------------------------------


def mekf_init(q_init: ArrayLike, p0: float) -> MekfState:
    q = quat_normalize(q_init)
    P = np.broadcast_to(p0 * np.eye(3), q.shape[:-1] + (3, 3)).copy()
    return MekfState(q_hat=q, P=P)


def _symmetrize(P: NDArray[np.float64]) -> NDArray[np.float64]:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def mekf_predict(state: MekfState, y_omega: ArrayLike, cfg: MekfConfig) -> MekfState:
    """Time update: q̂ ← q̂ ⊙ exp_q(T/2 y_ω), P ← F P Fᵀ + Q with F = exp_R(−T y_ω)"""
    y_omega = as_finite(y_omega, "gyroscope measurement")
    q_hat = quat_normalize(quat_mul(state.q_hat, quat_exp(0.5 * cfg.T * y_omega)))
    F = exp_R(-cfg.T * y_omega)
    P = F @ state.P @ np.swapaxes(F, -1, -2) + cfg.q_gyro
    return MekfState(q_hat=q_hat, P=_symmetrize(P))


def mekf_jacobian(q_hat: ArrayLike, cfg: MekfConfig) -> NDArray[np.float64]:
    """6×3 derivative of the predicted [y_a ; y_m] at q̂ ⊙ exp_q(η/2) with respect to η at η = 0"""
    g_b, m_b = body_references(q_hat, cfg.g_n, cfg.m_n)
    return np.concatenate([-skew(g_b), skew(m_b)], axis=-2)


def mekf_update(state: MekfState, y_a: ArrayLike, y_m: ArrayLike, cfg: MekfConfig) -> MekfState:
    """Stacked accelerometer + magnetometer measurement update"""
    y_a = as_finite(y_a, "accelerometer measurement")
    y_m = as_finite(y_m, "magnetometer measurement")
    g_b, m_b = body_references(state.q_hat, cfg.g_n, cfg.m_n)
    residual = np.concatenate([y_a + g_b, y_m - m_b], axis=-1)
    H = mekf_jacobian(state.q_hat, cfg)
    H_t = np.swapaxes(H, -1, -2)

    innovation = H @ state.P @ H_t + block_diag(cfg.r_acc, cfg.r_mag)
    cond = np.linalg.cond(innovation)
    ill = ~(cond < INNOVATION_COND_LIMIT)
    if np.any(ill):
        index = int(np.flatnonzero(np.atleast_1d(ill))[0]) if np.ndim(ill) else None
        raise SingularInnovation(
            f"innovation covariance condition number exceeds {INNOVATION_COND_LIMIT:g}",
            batch_index=index,
        )

    # K = P Hᵀ S⁻¹, with S symmetric
    gain = np.swapaxes(np.linalg.solve(innovation, H @ state.P), -1, -2)
    eta = np.einsum("...ij,...j->...i", gain, residual)
    q_hat = quat_normalize(quat_mul(state.q_hat, quat_exp(0.5 * eta)))
    P = (np.eye(3) - gain @ H) @ state.P
    return MekfState(q_hat=q_hat, P=_symmetrize(P))


def mekf_step(state: MekfState, y_omega: ArrayLike, y_a: ArrayLike, y_m: ArrayLike,
              cfg: MekfConfig) -> MekfState:
    """
    Correct with the vector measurements, then propagate with the gyroscope.

    The accelerometer and magnetometer of sample k observe the orientation at the
    start of gyro interval k, so the update sees the previous estimate and the
    returned q̂ is the prediction for the end of the interval.
    """
    return mekf_predict(mekf_update(state, y_a, y_m, cfg), y_omega, cfg)


def run_mekf(q_init: ArrayLike, p0: float, gyro: ArrayLike, acc: ArrayLike, mag: ArrayLike,
             cfg: MekfConfig) -> NDArray[np.float64]:
    """Estimates after each update/predict pair for sequences shaped (..., N, 3)"""
    gyro = np.asarray(gyro, dtype=np.float64)
    acc = np.asarray(acc, dtype=np.float64)
    mag = np.asarray(mag, dtype=np.float64)
    state = mekf_init(q_init, p0)
    estimates = np.empty(gyro.shape[:-1] + (4,))
    for k in range(gyro.shape[-2]):
        state = mekf_step(state, gyro[..., k, :], acc[..., k, :], mag[..., k, :], cfg)
        estimates[..., k, :] = state.q_hat
    logger.debug("MEKF finished %d samples, final trace(P) = %s",
                 gyro.shape[-2], np.trace(state.P, axis1=-2, axis2=-1))
    return estimates
