"""
Quaternion and rotation-vector primitives shared by the filters and the simulator.

Conventions: Hamilton product, scalar-first storage (q0, q1, q2, q3), and q^nb
rotates body-frame vectors into the navigation frame (q^bn is its conjugate).
Every function accepts a leading batch shape, so ``(..., 4)`` quaternions and
``(..., 3)`` vectors are processed element-wise.
"""
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateGeometry, NonFiniteInput, NonUnitQuaternion

Quaternion = NDArray[np.float64]
Vec3 = NDArray[np.float64]
RotMat = NDArray[np.float64]

SMALL_ANGLE = 1e-10
UNIT_TOL = 1e-6
GIMBAL_TOL = 1e-12


def _first_bad_row(bad: NDArray[np.bool_]) -> Optional[int]:
    if bad.ndim < 2:
        return None
    rows = np.flatnonzero(bad.reshape(bad.shape[0], -1).any(axis=1))
    return int(rows[0]) if rows.size else None


def as_finite(x: ArrayLike, name: str = "input") -> NDArray[np.float64]:
    """Convert to a float array, raising NonFiniteInput on NaN/Inf"""
    arr = np.asarray(x, dtype=np.float64)
    finite = np.isfinite(arr)
    if not finite.all():
        raise NonFiniteInput(f"{name} contains NaN or Inf", batch_index=_first_bad_row(~finite))
    return arr


def quat_conj(q: ArrayLike) -> Quaternion:
    q = as_finite(q, "quaternion")
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_normalize(q: ArrayLike) -> Quaternion:
    q = as_finite(q, "quaternion")
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < SMALL_ANGLE):
        raise DegenerateGeometry("cannot normalise a zero quaternion")
    return q / norm


def quat_mul(a: ArrayLike, b: ArrayLike) -> Quaternion:
    """Hamilton product a ⊙ b"""
    a = as_finite(a, "quaternion")
    b = as_finite(b, "quaternion")
    a0, a1, a2, a3 = np.moveaxis(a, -1, 0)
    b0, b1, b2, b3 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=-1,
    )


def quat_exp(y: ArrayLike) -> Quaternion:
    """exp_q(y) = (cos α, vᵀ sin α) with α = ‖y‖ and v = y / α"""
    y = as_finite(y, "rotation vector")
    alpha = np.linalg.norm(y, axis=-1, keepdims=True)
    small = alpha < SMALL_ANGLE
    safe = np.where(small, 1.0, alpha)
    q = np.concatenate([np.cos(alpha), np.sin(alpha) / safe * y], axis=-1)
    if np.any(small):
        limit = np.concatenate([np.ones_like(alpha), y], axis=-1)
        limit = limit / np.linalg.norm(limit, axis=-1, keepdims=True)
        q = np.where(small, limit, q)
    return q


def skew(v: ArrayLike) -> NDArray[np.float64]:
    """Cross-product matrix [v ×]"""
    v = as_finite(v, "vector")
    x, y, z = np.moveaxis(v, -1, 0)
    zero = np.zeros_like(x)
    return np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )


def s_matrix(q: ArrayLike) -> NDArray[np.float64]:
    """
    4×3 matrix with q ⊙ (0, y) = S(q) y.

    Top row is -qvᵀ, the lower block q0 I₃ + [qv ×], so that ½ S(q) y is the
    derivative of q ⊙ exp_q(y/2) at y = 0 for the Hamilton product.
    """
    q = as_finite(q, "quaternion")
    q0 = q[..., 0, None, None]
    qv = q[..., 1:]
    lower = q0 * np.eye(3) + skew(qv)
    return np.concatenate([-qv[..., None, :], lower], axis=-2)


def quat_to_rotmat(q: ArrayLike) -> RotMat:
    """R(q) such that R(q^nb) v^b = v^n"""
    q = as_finite(q, "quaternion")
    norm = np.linalg.norm(q, axis=-1)
    if np.any(np.abs(norm - 1.0) > UNIT_TOL):
        bad = np.abs(norm - 1.0) > UNIT_TOL
        raise NonUnitQuaternion(
            f"quaternion norm deviates from 1 by more than {UNIT_TOL}",
            batch_index=_first_bad_row(bad[..., None]) if bad.ndim else None,
        )
    q0, q1, q2, q3 = np.moveaxis(q, -1, 0)
    q0q0, q1q1, q2q2, q3q3 = q0 * q0, q1 * q1, q2 * q2, q3 * q3
    q0q1, q0q2, q0q3 = q0 * q1, q0 * q2, q0 * q3
    q1q2, q1q3, q2q3 = q1 * q2, q1 * q3, q2 * q3
    return np.stack(
        [
            np.stack([q0q0 + q1q1 - q2q2 - q3q3, 2 * (q1q2 - q0q3), 2 * (q1q3 + q0q2)], axis=-1),
            np.stack([2 * (q1q2 + q0q3), q0q0 - q1q1 + q2q2 - q3q3, 2 * (q2q3 - q0q1)], axis=-1),
            np.stack([2 * (q1q3 - q0q2), 2 * (q2q3 + q0q1), q0q0 - q1q1 - q2q2 + q3q3], axis=-1),
        ],
        axis=-2,
    )


def rotmat_to_quat(rot: ArrayLike) -> Quaternion:
    """Inverse of quat_to_rotmat (Shepperd's method), returned with q0 >= 0"""
    m = as_finite(rot, "rotation matrix")
    m00, m01, m02 = m[..., 0, 0], m[..., 0, 1], m[..., 0, 2]
    m10, m11, m12 = m[..., 1, 0], m[..., 1, 1], m[..., 1, 2]
    m20, m21, m22 = m[..., 2, 0], m[..., 2, 1], m[..., 2, 2]
    candidates = np.stack(
        [
            np.stack([1 + m00 + m11 + m22, m21 - m12, m02 - m20, m10 - m01], axis=-1),
            np.stack([m21 - m12, 1 + m00 - m11 - m22, m01 + m10, m02 + m20], axis=-1),
            np.stack([m02 - m20, m01 + m10, 1 - m00 + m11 - m22, m12 + m21], axis=-1),
            np.stack([m10 - m01, m02 + m20, m12 + m21, 1 - m00 - m11 + m22], axis=-1),
        ],
        axis=-2,
    )
    pivots = np.diagonal(candidates, axis1=-2, axis2=-1)
    best = np.argmax(pivots, axis=-1)
    chosen = np.take_along_axis(candidates, best[..., None, None], axis=-2)[..., 0, :]
    pivot = np.take_along_axis(pivots, best[..., None], axis=-1)
    q = chosen / (2.0 * np.sqrt(pivot))
    q = np.where(q[..., :1] < 0.0, -q, q)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def exp_R(eta: ArrayLike) -> RotMat:
    """Rodrigues formula I₃ + sin α [v ×] + (1 − cos α) [v ×]²"""
    eta = as_finite(eta, "rotation vector")
    alpha = np.linalg.norm(eta, axis=-1)[..., None, None]
    small = alpha < SMALL_ANGLE
    safe = np.where(small, 1.0, alpha)
    k = skew(eta) / safe
    rot = np.eye(3) + np.sin(alpha) * k + (1.0 - np.cos(alpha)) * (k @ k)
    if np.any(small):
        k_small = skew(eta)
        series = np.eye(3) + k_small + 0.5 * (k_small @ k_small)
        rot = np.where(small, series, rot)
    return rot


def quat_to_euler(q: ArrayLike) -> NDArray[np.float64]:
    """
    ZYX (yaw-pitch-roll) angles in radians, stacked as (..., 3) = (roll, pitch, yaw).

    At gimbal lock (|sin pitch| within 1e-12 of one) the pitch is set to ±π/2, the
    roll is fixed to zero and the remaining rotation about the vertical is
    reported as yaw.
    """
    q = as_finite(q, "quaternion")
    q0, q1, q2, q3 = np.moveaxis(q, -1, 0)
    roll = np.arctan2(2.0 * (q0 * q1 + q2 * q3), 1.0 - 2.0 * (q1 * q1 + q2 * q2))
    sinp = 2.0 * (q0 * q2 - q1 * q3)
    up = np.sqrt(np.clip(1.0 + sinp, 0.0, None))
    down = np.sqrt(np.clip(1.0 - sinp, 0.0, None))
    pitch = 2.0 * np.arctan2(up, down) - np.pi / 2
    yaw = np.arctan2(2.0 * (q0 * q3 + q1 * q2), 1.0 - 2.0 * (q2 * q2 + q3 * q3))
    locked = np.abs(sinp) > 1.0 - GIMBAL_TOL
    if np.any(locked):
        pitch = np.where(locked, np.copysign(np.pi / 2, sinp), pitch)
        locked_yaw = wrap_angle(2.0 * np.arctan2(q3, q0))
        roll = np.where(locked, 0.0, roll)
        yaw = np.where(locked, locked_yaw, yaw)
    return np.stack([roll, pitch, yaw], axis=-1)


def euler_to_quat(rpy: ArrayLike) -> Quaternion:
    """Inverse of quat_to_euler: q = q_z(yaw) ⊙ q_y(pitch) ⊙ q_x(roll)"""
    rpy = as_finite(rpy, "euler angles")
    half = 0.5 * rpy
    cr, cp, cy = np.moveaxis(np.cos(half), -1, 0)
    sr, sp, sy = np.moveaxis(np.sin(half), -1, 0)
    return np.stack(
        [
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ],
        axis=-1,
    )


def wrap_angle(angle: ArrayLike) -> NDArray[np.float64]:
    """Wrap radians to (−π, π]"""
    angle = np.asarray(angle, dtype=np.float64)
    wrapped = np.mod(angle + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def rotation_angle(q_a: ArrayLike, q_b: ArrayLike) -> NDArray[np.float64]:
    """Angle of the rotation conj(q_a) ⊙ q_b, in [0, π] radians"""
    delta = quat_mul(quat_conj(q_a), q_b)
    return 2.0 * np.arctan2(np.linalg.norm(delta[..., 1:], axis=-1), np.abs(delta[..., 0]))
