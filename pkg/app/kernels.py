"""
Unrolled single-sample filter steps over plain scalars.

These compute exactly what estimator.step, baselines.madgwick_step and
baselines.mekf_step compute for one filter, written out component by component
so that every filter is timed without array overhead and can run over an
instrumented scalar. ``sqrt`` (and for the MEKF ``sin`` and ``cos``) is
injectable for the same reason.

Arguments: q = (q0, q1, q2, q3), gyro/acc/mag = 3-tuples, mag_ref = (cos δ, −sin δ).
"""
import math

from .errors import SingularInnovation
from .rotmath import SMALL_ANGLE
from .spec_schema import GRAD_EPS


def fast_step(q, gyro, acc, mag, half_t, beta, mag_ref, grad_eps=GRAD_EPS, sqrt=math.sqrt):
    q0, q1, q2, q3 = q
    wx, wy, wz = gyro
    ax, ay, az = acc
    mx, my, mz = mag
    bx, bz = mag_ref

    q0q0 = q0 * q0
    q1q1 = q1 * q1
    q2q2 = q2 * q2
    q3q3 = q3 * q3
    q0q1 = q0 * q1
    q0q2 = q0 * q2
    q0q3 = q0 * q3
    q1q2 = q1 * q2
    q1q3 = q1 * q3
    q2q3 = q2 * q3

    # Gravity and field references rotated into the body frame
    gx = 2.0 * (q1q3 - q0q2)
    gy = 2.0 * (q0q1 + q2q3)
    gz = q0q0 - q1q1 - q2q2 + q3q3
    r11 = q0q0 + q1q1 - q2q2 - q3q3
    r12 = 2.0 * (q1q2 - q0q3)
    r13 = 2.0 * (q1q3 + q0q2)
    hx = bx * r11 + bz * gx
    hy = bx * r12 + bz * gy
    hz = bx * r13 + bz * gz

    ex = ax + gx
    ey = ay + gy
    ez = az + gz
    fx = mx - hx
    fy = my - hy
    fz = mz - hz

    # ∇V = −[g ×] e + [h ×] f
    vx = ey * gz - ez * gy + hy * fz - hz * fy
    vy = ez * gx - ex * gz + hz * fx - hx * fz
    vz = ex * gy - ey * gx + hx * fy - hy * fx
    norm = sqrt(vx * vx + vy * vy + vz * vz)

    if norm < grad_eps:
        ox = wx * half_t
        oy = wy * half_t
        oz = wz * half_t
    else:
        k = beta / norm
        ox = (wx - k * vx) * half_t
        oy = (wy - k * vy) * half_t
        oz = (wz - k * vz) * half_t

    p0 = q0 - q1 * ox - q2 * oy - q3 * oz
    p1 = q1 + q0 * ox + q2 * oz - q3 * oy
    p2 = q2 + q0 * oy + q3 * ox - q1 * oz
    p3 = q3 + q0 * oz + q1 * oy - q2 * ox

    inv = 1.0 / sqrt(p0 * p0 + p1 * p1 + p2 * p2 + p3 * p3)
    return p0 * inv, p1 * inv, p2 * inv, p3 * inv


def madgwick_step(q, gyro, acc, mag, period, gain, mag_ref, grad_eps=GRAD_EPS, sqrt=math.sqrt):
    q0, q1, q2, q3 = q
    wx, wy, wz = gyro
    ax, ay, az = acc
    mx, my, mz = mag
    bx, bz = mag_ref

    _2q0 = 2.0 * q0
    _2q1 = 2.0 * q1
    _2q2 = 2.0 * q2
    _2q3 = 2.0 * q3
    _4q1 = 2.0 * _2q1
    _4q2 = 2.0 * _2q2
    _4q3 = 2.0 * _2q3
    q1q1 = q1 * q1
    q2q2 = q2 * q2
    q3q3 = q3 * q3
    q0q1 = q0 * q1
    q0q2 = q0 * q2
    q0q3 = q0 * q3
    q1q2 = q1 * q2
    q1q3 = q1 * q3
    q2q3 = q2 * q3

    # Stacked objective f(q)
    gx = 2.0 * (q1q3 - q0q2)
    gy = 2.0 * (q0q1 + q2q3)
    gz = 1.0 - 2.0 * (q1q1 + q2q2)
    r11 = 1.0 - 2.0 * (q2q2 + q3q3)
    r12 = 2.0 * (q1q2 - q0q3)
    r13 = 2.0 * (q1q3 + q0q2)
    f1 = ax + gx
    f2 = ay + gy
    f3 = az + gz
    f4 = mx - (bx * r11 + bz * gx)
    f5 = my - (bx * r12 + bz * gy)
    f6 = mz - (bx * r13 + bz * gz)

    # Jacobian entries j<row><col>; j30 and j33 vanish
    bx2q0 = bx * _2q0
    bx2q1 = bx * _2q1
    bx2q2 = bx * _2q2
    bx2q3 = bx * _2q3
    bz2q0 = bz * _2q0
    bz2q1 = bz * _2q1
    bz2q2 = bz * _2q2
    bz2q3 = bz * _2q3
    bx4q2 = bx * _4q2
    bx4q3 = bx * _4q3
    bz4q1 = bz * _4q1
    bz4q2 = bz * _4q2

    j10, j11, j12, j13 = -_2q2, _2q3, -_2q0, _2q1
    j20, j21, j22, j23 = _2q1, _2q0, _2q3, _2q2
    j31, j32 = -_4q1, -_4q2
    j40 = bz2q2
    j41 = -bz2q3
    j42 = bx4q2 + bz2q0
    j43 = bx4q3 - bz2q1
    j50 = bx2q3 - bz2q1
    j51 = -(bx2q2 + bz2q0)
    j52 = -(bx2q1 + bz2q3)
    j53 = bx2q0 - bz2q2
    j60 = -bx2q2
    j61 = bz4q1 - bx2q3
    j62 = bz4q2 - bx2q0
    j63 = -bx2q1

    # ∇f = Jᵀ f
    s0 = j10 * f1 + j20 * f2 + j40 * f4 + j50 * f5 + j60 * f6
    s1 = j11 * f1 + j21 * f2 + j31 * f3 + j41 * f4 + j51 * f5 + j61 * f6
    s2 = j12 * f1 + j22 * f2 + j32 * f3 + j42 * f4 + j52 * f5 + j62 * f6
    s3 = j13 * f1 + j23 * f2 + j43 * f4 + j53 * f5 + j63 * f6
    norm = sqrt(s0 * s0 + s1 * s1 + s2 * s2 + s3 * s3)

    # Quaternion rate from the gyroscope, ½ S(q) ω
    d0 = -0.5 * (q1 * wx + q2 * wy + q3 * wz)
    d1 = 0.5 * (q0 * wx + q2 * wz - q3 * wy)
    d2 = 0.5 * (q0 * wy - q1 * wz + q3 * wx)
    d3 = 0.5 * (q0 * wz + q1 * wy - q2 * wx)

    if norm >= grad_eps:
        k = gain / norm
        d0 = d0 - k * s0
        d1 = d1 - k * s1
        d2 = d2 - k * s2
        d3 = d3 - k * s3

    p0 = q0 + period * d0
    p1 = q1 + period * d1
    p2 = q2 + period * d2
    p3 = q3 + period * d3

    inv = 1.0 / sqrt(p0 * p0 + p1 * p1 + p2 * p2 + p3 * p3)
    return p0 * inv, p1 * inv, p2 * inv, p3 * inv


def _quat_mul(a, b):
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    return (
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    )


def _unit(q, sqrt):
    inv = 1.0 / sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q[0] * inv, q[1] * inv, q[2] * inv, q[3] * inv


def _quat_exp(x, y, z, sqrt, sin, cos):
    alpha = sqrt(x * x + y * y + z * z)
    if alpha < SMALL_ANGLE:
        return _unit((1.0, x, y, z), sqrt)
    k = sin(alpha) / alpha
    return cos(alpha), k * x, k * y, k * z


def _rodrigues(x, y, z, sqrt, sin, cos):
    """exp_R of the rotation vector (x, y, z) as a 3×3 tuple"""
    alpha = sqrt(x * x + y * y + z * z)
    if alpha < SMALL_ANGLE:
        a, b = 1.0, 0.5
    else:
        a = sin(alpha) / alpha
        b = (1.0 - cos(alpha)) / (alpha * alpha)
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    # [v ×]² = v vᵀ − ‖v‖² I
    return (
        (1.0 - b * (yy + zz), b * xy - a * z, b * xz + a * y),
        (b * xy + a * z, 1.0 - b * (xx + zz), b * yz - a * x),
        (b * xz - a * y, b * yz + a * x, 1.0 - b * (xx + yy)),
    )


def _symmetric(P):
    return tuple(tuple(0.5 * (P[i][j] + P[j][i]) for j in range(3)) for i in range(3))


def mekf_step(q, P, gyro, acc, mag, period, mag_ref, q_gyro, r_acc, r_mag,
              sqrt=math.sqrt, sin=math.sin, cos=math.cos):
    """
    One MEKF update/predict pair, returning (q, P) with P as a 3×3 tuple.

    The 6×6 innovation covariance is factored by Cholesky; ``sin`` and ``cos``
    are injectable alongside ``sqrt``.
    """
    q0, q1, q2, q3 = q
    wx, wy, wz = gyro
    bx, bz = mag_ref

    q0q0 = q0 * q0
    q1q1 = q1 * q1
    q2q2 = q2 * q2
    q3q3 = q3 * q3
    gx = 2.0 * (q1 * q3 - q0 * q2)
    gy = 2.0 * (q0 * q1 + q2 * q3)
    gz = q0q0 - q1q1 - q2q2 + q3q3
    hx = bx * (q0q0 + q1q1 - q2q2 - q3q3) + bz * gx
    hy = bx * 2.0 * (q1 * q2 - q0 * q3) + bz * gy
    hz = bx * 2.0 * (q1 * q3 + q0 * q2) + bz * gz

    residual = (acc[0] + gx, acc[1] + gy, acc[2] + gz, mag[0] - hx, mag[1] - hy, mag[2] - hz)
    # H = [−[g ×] ; [h ×]]
    H = (
        (0.0, gz, -gy),
        (-gz, 0.0, gx),
        (gy, -gx, 0.0),
        (0.0, -hz, hy),
        (hz, 0.0, -hx),
        (-hy, hx, 0.0),
    )
    HP = [[H[i][0] * P[0][c] + H[i][1] * P[1][c] + H[i][2] * P[2][c] for c in range(3)]
          for i in range(6)]

    S = [[0.0] * 6 for _ in range(6)]
    for i in range(6):
        for j in range(i + 1):
            s = HP[i][0] * H[j][0] + HP[i][1] * H[j][1] + HP[i][2] * H[j][2]
            if i < 3:
                s = s + r_acc[i][j]
            elif j >= 3:
                s = s + r_mag[i - 3][j - 3]
            S[i][j] = s

    # Lower-triangular L with L Lᵀ = S
    L = [[0.0] * 6 for _ in range(6)]
    for i in range(6):
        for j in range(i + 1):
            s = S[i][j]
            for k in range(j):
                s = s - L[i][k] * L[j][k]
            if i == j:
                if not s > 0.0:
                    raise SingularInnovation("innovation covariance is not positive definite")
                L[i][i] = sqrt(s)
            else:
                L[i][j] = s / L[j][j]

    # X = S⁻¹ H P, so that the gain is K = Xᵀ
    X = [[0.0] * 3 for _ in range(6)]
    for c in range(3):
        z = [0.0] * 6
        for i in range(6):
            s = HP[i][c]
            for k in range(i):
                s = s - L[i][k] * z[k]
            z[i] = s / L[i][i]
        for i in reversed(range(6)):
            s = z[i]
            for k in range(i + 1, 6):
                s = s - L[k][i] * X[k][c]
            X[i][c] = s / L[i][i]

    eta = [X[0][c] * residual[0] for c in range(3)]
    for i in range(1, 6):
        eta = [eta[c] + X[i][c] * residual[i] for c in range(3)]
    q = _unit(_quat_mul(q, _quat_exp(0.5 * eta[0], 0.5 * eta[1], 0.5 * eta[2], sqrt, sin, cos)), sqrt)

    # (I − K H) P = P − Xᵀ (H P)
    P_upd = []
    for a in range(3):
        row = []
        for b in range(3):
            s = P[a][b]
            for i in range(6):
                s = s - X[i][a] * HP[i][b]
            row.append(s)
        P_upd.append(row)
    P = _symmetric(P_upd)

    # Time update
    ht = 0.5 * period
    q = _unit(_quat_mul(q, _quat_exp(ht * wx, ht * wy, ht * wz, sqrt, sin, cos)), sqrt)
    F = _rodrigues(-period * wx, -period * wy, -period * wz, sqrt, sin, cos)
    FP = [[F[i][0] * P[0][j] + F[i][1] * P[1][j] + F[i][2] * P[2][j] for j in range(3)]
          for i in range(3)]
    P = _symmetric([
        [FP[i][0] * F[j][0] + FP[i][1] * F[j][1] + FP[i][2] * F[j][2] + q_gyro[i][j]
         for j in range(3)]
        for i in range(3)
    ])
    return q, P
