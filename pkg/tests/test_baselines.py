"""
Test the Madgwick-style filter and the MEKF
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from app import kernels
from app.baselines import (
    MadgwickState,
    MekfState,
    madgwick_gradient,
    madgwick_jacobian,
    madgwick_objective,
    madgwick_step,
    mekf_init,
    mekf_jacobian,
    mekf_predict,
    mekf_step,
    mekf_update,
    run_madgwick,
    run_mekf,
)
from app.errors import SingularInnovation
from app.estimator import body_references
from app.evaluation import resolve_tuning
from app.rotmath import exp_R, quat_exp, quat_mul, quat_normalize, rotation_angle
from app.simulator import generate_trajectory, initial_estimate, simulate_run
from app.spec_schema import FilterConfig, MekfConfig, SimConfig


def exact_measurements(q, dip):
    cfg = FilterConfig(T=0.1, beta=0.0, dip=dip)
    g_b, m_b = body_references(q, cfg.g_n, cfg.m_n)
    return -g_b, m_b


@pytest.fixture
def mekf_cfg(dip):
    return MekfConfig.from_noise(0.1, 0.01**2, 1e-4, 1e-4, dip=dip)


class TestMadgwick:
    """Gradient-descent filter over the stacked objective"""

    def test_objective_zero_at_truth(self, random_quaternions, dip):
        """Test that noiseless measurements give a zero residual"""
        y_a, y_m = exact_measurements(random_quaternions, dip)
        np.testing.assert_allclose(madgwick_objective(random_quaternions, y_a, y_m, dip), 0.0, atol=1e-12)

    def test_jacobian_matches_finite_differences(self, random_quaternions, rng, dip):
        """Test the 6×4 Jacobian column by column"""
        h = 1e-7
        y_a, y_m = rng.standard_normal((2, 3))
        for q in random_quaternions:
            numeric = np.column_stack([
                (madgwick_objective(q + h * e, y_a, y_m, dip) - madgwick_objective(q - h * e, y_a, y_m, dip))
                / (2 * h)
                for e in np.eye(4)
            ])
            np.testing.assert_allclose(madgwick_jacobian(q, dip), numeric, atol=1e-6)

    def test_gradient_is_jacobian_transpose_residual(self, random_quaternions, rng, dip):
        """Test ∇f = Jᵀ f"""
        y_a, y_m = rng.standard_normal((2, 3))
        q = random_quaternions[0]
        expected = madgwick_jacobian(q, dip).T @ madgwick_objective(q, y_a, y_m, dip)
        np.testing.assert_allclose(madgwick_gradient(q, y_a, y_m, dip), expected, atol=1e-14)

    def test_step_is_unit_and_stationary_at_truth(self, random_quaternions, dip):
        """Test renormalisation and the fixed point at noiseless measurements"""
        y_a, y_m = exact_measurements(random_quaternions, dip)
        state = madgwick_step(MadgwickState(random_quaternions), np.zeros((20, 3)), y_a, y_m, 0.1, 0.07, dip)
        np.testing.assert_allclose(np.linalg.norm(state.q_hat, axis=-1), 1.0, atol=1e-12)
        np.testing.assert_allclose(state.q_hat, random_quaternions, atol=1e-12)

    def test_matches_scalar_kernel(self, random_quaternions, rng, dip):
        """Test that the unrolled scalar step computes the same update"""
        mag_ref = (math.cos(dip), -math.sin(dip))
        for q in random_quaternions:
            gyro, acc, mag = rng.standard_normal((3, 3))
            vector = madgwick_step(MadgwickState(q), gyro, acc, mag, 0.1, 0.07, dip).q_hat
            scalar = kernels.madgwick_step(tuple(q), tuple(gyro), tuple(acc), tuple(mag), 0.1, 0.07, mag_ref)
            np.testing.assert_allclose(scalar, vector, atol=1e-12)

    def test_correction_bounded_by_two_beta_t(self, random_quaternions, rng, dip):
        """Test that the gradient term turns the estimate by at most 2·β_m·T against gyro-only integration"""
        gyro = rng.standard_normal((20, 3))
        y_a, y_m = 100.0 * rng.standard_normal((2, 20, 3))
        corrected = madgwick_step(MadgwickState(random_quaternions), gyro, y_a, y_m, 0.1, 0.07, dip).q_hat
        gyro_only = madgwick_step(MadgwickState(random_quaternions), gyro, y_a, y_m, 0.1, 0.0, dip).q_hat
        # A 4D step of norm β_m·T on a quaternion of norm ≥ 1 turns it by at most asin(β_m·T)
        assert np.all(rotation_angle(gyro_only, corrected) <= 2.0 * math.asin(0.07 * 0.1) + 1e-12)

    def test_run_converges_from_initial_error(self):
        """Test recovery of a 30° initial error with exact stationary measurements"""
        q_true = quat_exp([0.1, -0.2, 0.3])
        q0 = quat_mul(q_true, quat_exp(0.5 * math.radians(30.0) * np.array([0.0, 0.6, 0.8])))
        y_a, y_m = exact_measurements(q_true, 0.0)
        n = 300
        estimates = run_madgwick(q0, np.zeros((n, 3)), np.tile(y_a, (n, 1)), np.tile(y_m, (n, 1)), 0.1, 0.075)
        assert estimates.shape == (n, 4)
        assert math.degrees(rotation_angle(q_true, estimates[-1])) < 2.0


class TestMekf:
    """Multiplicative EKF over the rotation-vector deviation"""

    def test_init_covariance(self, random_quaternions):
        """Test that the initial covariance is p0 I₃ for each batch member"""
        state = mekf_init(random_quaternions, 0.5)
        assert state.P.shape == (20, 3, 3)
        np.testing.assert_array_equal(state.P[3], 0.5 * np.eye(3))

    def test_predict_propagates_attitude_and_covariance(self, mekf_cfg):
        """Test q̂ ⊙ exp_q(T/2 ω) and F P Fᵀ + Q"""
        q = quat_exp([0.2, 0.1, -0.3])
        P = np.diag([0.1, 0.2, 0.3])
        omega = np.array([0.4, -0.5, 0.6])
        state = mekf_predict(MekfState(q, P), omega, mekf_cfg)
        np.testing.assert_allclose(state.q_hat, quat_mul(q, quat_exp(0.05 * omega)), atol=1e-15)
        F = exp_R(-0.1 * omega)
        np.testing.assert_allclose(state.P, F @ P @ F.T + mekf_cfg.q_gyro, atol=1e-15)

    def test_update_keeps_covariance_symmetric_psd(self, random_quaternions, rng, mekf_cfg):
        """Test P symmetry and positive semi-definiteness after updates"""
        state = mekf_init(random_quaternions, 0.8)
        for _ in range(10):
            y_a, y_m = rng.standard_normal((2, 20, 3))
            state = mekf_step(state, rng.standard_normal((20, 3)), y_a, y_m, mekf_cfg)
        np.testing.assert_allclose(state.P, np.swapaxes(state.P, -1, -2), atol=1e-9)
        assert np.linalg.eigvalsh(state.P).min() >= -1e-12
        np.testing.assert_allclose(np.linalg.norm(state.q_hat, axis=-1), 1.0, atol=1e-9)

    def test_update_reduces_uncertainty(self, random_quaternions, dip, mekf_cfg):
        """Test that a measurement update shrinks trace(P) and keeps exact estimates"""
        y_a, y_m = exact_measurements(random_quaternions, dip)
        prior = mekf_init(random_quaternions, 0.1)
        posterior = mekf_update(prior, y_a, y_m, mekf_cfg)
        assert np.all(np.trace(posterior.P, axis1=-2, axis2=-1) < np.trace(prior.P, axis1=-2, axis2=-1))
        np.testing.assert_allclose(posterior.q_hat, random_quaternions, atol=1e-12)

    def test_singular_innovation_fails(self):
        """Test that a zero innovation covariance is rejected"""
        cfg = MekfConfig(T=0.1, q_gyro=0.0, r_acc=0.0, r_mag=0.0)
        state = mekf_init([1.0, 0.0, 0.0, 0.0], 0.0)
        with pytest.raises(SingularInnovation):
            mekf_update(state, [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], cfg)

    def test_singular_innovation_reports_batch_row(self):
        """Test that a batched update names the first failing run"""
        cfg = MekfConfig(T=0.1, q_gyro=0.0, r_acc=0.01, r_mag=0.01)
        P = np.stack([np.eye(3), 1e14 * np.eye(3), np.eye(3)])
        state = MekfState(np.tile([1.0, 0.0, 0.0, 0.0], (3, 1)), P)
        with pytest.raises(SingularInnovation) as exc_info:
            mekf_update(state, np.tile([0.0, 0.0, -1.0], (3, 1)), np.tile([1.0, 0.0, 0.0], (3, 1)), cfg)
        assert exc_info.value.batch_index == 1

    def test_run_converges_from_initial_error(self, mekf_cfg):
        """Test recovery of a 30° initial error with exact stationary measurements"""
        q_true = quat_exp([0.1, -0.2, 0.3])
        q0 = quat_normalize(quat_mul(q_true, quat_exp(0.5 * math.radians(30.0) * np.array([0.0, 0.6, 0.8]))))
        y_a, y_m = exact_measurements(q_true, mekf_cfg.dip)
        n = 50
        estimates = run_mekf(
            q0, (math.pi / 2) ** 2 / 3, np.zeros((n, 3)), np.tile(y_a, (n, 1)), np.tile(y_m, (n, 1)), mekf_cfg
        )
        assert math.degrees(rotation_angle(q_true, estimates[-1])) < 1.0

    def test_jacobian_matches_finite_differences(self, random_quaternions, mekf_cfg):
        """Test H = [−[g_b ×] ; [m_b ×]] against central differences of the predicted measurements"""
        h = 1e-6

        def predicted(q, eta):
            g_b, m_b = body_references(quat_mul(q, quat_exp(0.5 * eta)), mekf_cfg.g_n, mekf_cfg.m_n)
            return np.concatenate([-g_b, m_b])

        for q in random_quaternions[:5]:
            numeric = np.column_stack([
                (predicted(q, h * e) - predicted(q, -h * e)) / (2 * h) for e in np.eye(3)
            ])
            np.testing.assert_allclose(mekf_jacobian(q, mekf_cfg), numeric, atol=1e-8)

    def test_covariance_grows_linearly_without_rotation(self, mekf_cfg):
        """Test P = k·T²σ_ω²·I after k zero-rotation predictions from P = 0"""
        state = MekfState(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros((3, 3)))
        for _ in range(25):
            state = mekf_predict(state, np.zeros(3), mekf_cfg)
        np.testing.assert_allclose(state.P, 25 * 0.1**2 * 0.01**2 * np.eye(3), atol=1e-18)

    def test_covariance_psd_over_full_run(self):
        """Test symmetric positive semi-definite P over an 8000-sample simulated run"""
        cfg = SimConfig(seed=13)
        truth = generate_trajectory(cfg)
        log = simulate_run(truth, cfg)
        tuning = resolve_tuning(cfg)
        state = mekf_init(initial_estimate(truth, cfg), tuning.mekf_p0)
        min_eig, max_asym = np.inf, 0.0
        for k in range(len(log)):
            state = mekf_step(state, log.gyro[k], log.acc[k], log.mag[k], tuning.mekf_cfg)
            min_eig = min(min_eig, np.linalg.eigvalsh(state.P).min())
            max_asym = max(max_asym, np.abs(state.P - state.P.T).max())
        assert len(log) == 8000
        assert min_eig >= -1e-9
        assert max_asym == 0.0

    def test_matches_scalar_kernel(self, random_quaternions, rng, mekf_cfg):
        """Test that the unrolled scalar step computes the same update/predict pair"""
        mag_ref = (math.cos(mekf_cfg.dip), -math.sin(mekf_cfg.dip))
        as_rows = lambda m: tuple(map(tuple, m.tolist()))  # noqa: E731
        for q in random_quaternions:
            A = 0.1 * rng.standard_normal((3, 3))
            P = A @ A.T + 1e-3 * np.eye(3)
            gyro, acc, mag = rng.standard_normal((3, 3))
            vector = mekf_step(MekfState(q, P), gyro, acc, mag, mekf_cfg)
            q_s, P_s = kernels.mekf_step(
                tuple(q), as_rows(P), tuple(gyro), tuple(acc), tuple(mag), mekf_cfg.T, mag_ref,
                as_rows(mekf_cfg.q_gyro), as_rows(mekf_cfg.r_acc), as_rows(mekf_cfg.r_mag),
            )
            np.testing.assert_allclose(q_s, vector.q_hat, atol=1e-10)
            np.testing.assert_allclose(P_s, vector.P, atol=1e-12)

    def test_scalar_kernel_rejects_singular_innovation(self):
        """Test that a zero innovation covariance fails in the scalar step too"""
        zero = ((0.0, 0.0, 0.0),) * 3
        with pytest.raises(SingularInnovation):
            kernels.mekf_step(
                (1.0, 0.0, 0.0, 0.0), zero, (0.0, 0.0, 0.0), (0.0, 0.0, -1.0), (1.0, 0.0, 0.0),
                0.1, (1.0, 0.0), zero, zero, zero,
            )

    def test_estimate_predicts_end_of_interval(self, mekf_cfg):
        """Test that exact lagged measurements keep the estimate on the truth through a rotation"""
        sim = SimConfig(dip=mekf_cfg.dip, sigma_omega=0.0, sigma_acc=0.0, sigma_mag=0.0, n_cycles=1)
        truth = generate_trajectory(sim)
        log = simulate_run(truth, sim)
        estimates = run_mekf(truth.q_true[0], 1e-6, log.gyro, log.acc, log.mag, mekf_cfg)
        assert np.max(rotation_angle(truth.q_true, estimates)) < 1e-9
