"""Controller torque-law tests: equilibria, walls, saturation, velocity
integration and command validation."""

import numpy as np
import pytest

from pandasim.config import PANDA, PANDA_DYNAMICS
from pandasim.controllers import (DEFAULT_WALL, CartesianImpedance,
                                  ImpedanceGains, IntegratedVelocity,
                                  WallParams, cartesian_impedance_torque,
                                  integrated_velocity_step,
                                  joint_impedance_torque, joint_wall_torque,
                                  saturate_torque_rate)
from pandasim.errors import InvalidCommand
from pandasim.kinematics import fk, jacobian
from pandasim.transforms import quat_from_matrix

ZERO = np.zeros(7)
NEUTRAL = PANDA.neutral_q


class TestJointImpedance:
    def test_equilibrium_zero_torque(self):
        tau = joint_impedance_torque(NEUTRAL, ZERO, NEUTRAL, ZERO)
        assert np.max(np.abs(tau)) < 1e-12

    def test_single_joint_error_spring_law(self):
        gains = ImpedanceGains(joint_stiffness=np.full(7, 600.0),
                               joint_damping=np.zeros(7))
        q = NEUTRAL.copy()
        q_d = NEUTRAL.copy()
        q_d[2] += 0.01
        tau = joint_impedance_torque(q, ZERO, q_d, ZERO, gains)
        assert abs(tau[2] - 6.0) < 1e-12
        mask = np.ones(7, bool)
        mask[2] = False
        assert np.max(np.abs(tau[mask])) < 1e-12


class TestJointWall:
    def test_zero_in_interior(self, rng):
        lim = PANDA.limits
        lo = lim.q_min + DEFAULT_WALL.margin
        hi = lim.q_max - DEFAULT_WALL.margin
        for _ in range(200):
            q = rng.uniform(lo, hi)
            dq = rng.uniform(-2, 2, 7)
            assert np.max(np.abs(joint_wall_torque(q, dq, lim))) == 0.0

    def test_one_sided_spring_inside_wall(self):
        lim = PANDA.limits
        q = NEUTRAL.copy()
        q[2] = lim.q_max[2] - DEFAULT_WALL.margin / 2.0
        tau = joint_wall_torque(q, ZERO, lim)
        assert abs(tau[2] - (-DEFAULT_WALL.stiffness * DEFAULT_WALL.margin / 2.0)) < 1e-12
        assert tau[2] < 0.0  # pushes inward

    def test_continuous_at_wall_boundary(self):
        lim = PANDA.limits
        q = NEUTRAL.copy()
        for eps in (1e-4, 1e-6, 1e-8):
            q[4] = lim.q_max[4] - DEFAULT_WALL.margin - eps
            inside = joint_wall_torque(q, ZERO, lim)
            q[4] = lim.q_max[4] - DEFAULT_WALL.margin + eps
            outside = joint_wall_torque(q, ZERO, lim)
            assert np.max(np.abs(inside)) == 0.0
            assert abs(outside[4]) <= DEFAULT_WALL.stiffness * eps + 1e-12

    def test_damping_only_when_moving_toward_limit(self):
        lim = PANDA.limits
        q = NEUTRAL.copy()
        q[1] = lim.q_max[1] - DEFAULT_WALL.margin / 2.0
        dq_out = np.zeros(7)
        dq_out[1] = 1.0
        dq_in = -dq_out
        tau_out = joint_wall_torque(q, dq_out, lim)
        tau_in = joint_wall_torque(q, dq_in, lim)
        spring = -DEFAULT_WALL.stiffness * DEFAULT_WALL.margin / 2.0
        assert abs(tau_out[1] - (spring - DEFAULT_WALL.damping)) < 1e-12
        assert abs(tau_in[1] - spring) < 1e-12


class TestTorqueRateSaturation:
    def test_unchanged_when_equal(self):
        tau = np.array([1.0, -2, 3, -4, 0.5, 0, 1])
        out = saturate_torque_rate(tau, tau, PANDA.limits.tau_max)
        assert np.array_equal(out, tau)

    def test_step_clamped_to_delta(self):
        prev = np.zeros(7)
        out = saturate_torque_rate(np.full(7, 10.0), prev, PANDA.limits.tau_max,
                                   delta_max=1.0)
        assert np.max(np.abs(out - 1.0)) < 1e-15

    def test_never_exceeds_bounds_random(self, rng):
        tau_max = PANDA.limits.tau_max
        prev = np.zeros(7)
        for _ in range(100000 // 100):
            for _ in range(100):
                cmd = rng.uniform(-500, 500, 7)
                out = saturate_torque_rate(cmd, prev, tau_max)
                assert np.all(np.abs(out) <= tau_max + 1e-12)
                assert np.all(np.abs(out - prev) <= 1.0 + 1e-12)
                prev = out


class TestIntegratedVelocityStep:
    def test_zero_command_keeps_setpoint(self):
        q_d, dq = integrated_velocity_step(NEUTRAL, ZERO, 1e-3, PANDA.limits)
        assert np.array_equal(q_d, NEUTRAL)
        assert np.array_equal(dq, ZERO)

    def test_euler_integration(self):
        cmd = np.zeros(7)
        cmd[0] = 0.1
        q_d, _ = integrated_velocity_step(NEUTRAL, cmd, 1e-3, PANDA.limits)
        assert abs(q_d[0] - (NEUTRAL[0] + 1e-4)) < 1e-15

    def test_saturates_at_margin(self):
        lim = PANDA.limits
        cmd = np.zeros(7)
        cmd[6] = 2.0
        q_d = NEUTRAL.copy()
        for _ in range(5000):
            q_d, _ = integrated_velocity_step(q_d, cmd, 1e-3, lim)
        assert abs(q_d[6] - (lim.q_max[6] - DEFAULT_WALL.margin)) < 1e-12

    def test_velocity_clamped(self):
        cmd = np.full(7, 100.0)
        q_d, dq = integrated_velocity_step(NEUTRAL, cmd, 1e-3, PANDA.limits)
        assert np.array_equal(dq, PANDA.limits.dq_max)


class TestCartesianImpedance:
    def test_zero_torque_at_setpoint(self):
        T = fk(NEUTRAL)
        tau = cartesian_impedance_torque(NEUTRAL, ZERO, T[:3, 3],
                                         quat_from_matrix(T[:3, :3]))
        assert np.max(np.abs(tau)) < 1e-9

    def test_position_error_maps_through_jacobian_transpose(self):
        gains = ImpedanceGains(cart_stiffness=np.array([200.0, 200, 200, 0, 0, 0]),
                               cart_damping=np.zeros(6), nullspace_stiffness=0.0)
        T = fk(NEUTRAL)
        target = T[:3, 3] + np.array([0.0, 0.01, 0.0])
        tau = cartesian_impedance_torque(NEUTRAL, ZERO, target,
                                         quat_from_matrix(T[:3, :3]), gains)
        J = jacobian(NEUTRAL)
        wrench = np.zeros(6)
        wrench[:3] = T[:3, :3].T @ np.array([0.0, 2.0, 0.0])  # 200 N/m * 1 cm
        expected = J.T @ wrench
        assert np.max(np.abs(tau - expected)) < 1e-9

    def test_non_unit_quaternion_rejected(self):
        ctrl = CartesianImpedance()
        with pytest.raises(InvalidCommand):
            ctrl.set_control(np.zeros(3), np.array([0.1, 0.2, 0.3, 1.0]))

    def test_setpoint_filtering_converges(self):
        ctrl = CartesianImpedance(filter_coeff=0.1)

        class FakeState:
            q = NEUTRAL
            dq = ZERO
            O_T_EE = fk(NEUTRAL)
            time = 0.0

        ctrl.on_start(FakeState(), PANDA, PANDA_DYNAMICS)
        T = fk(NEUTRAL)
        target = T[:3, 3] + np.array([0.05, 0.0, 0.0])
        ctrl.set_control(target, quat_from_matrix(T[:3, :3]))
        for _ in range(200):
            ctrl.step(FakeState(), 1e-3)
        assert np.linalg.norm(ctrl._filtered[0] - target) < 1e-8


class TestControllerCommandValidation:
    def test_integrated_velocity_rejects_bad_shape(self):
        ctrl = IntegratedVelocity()
        with pytest.raises(InvalidCommand):
            ctrl.set_control(np.zeros(6))

    def test_integrated_velocity_rejects_nonfinite(self):
        ctrl = IntegratedVelocity()
        with pytest.raises(InvalidCommand):
            ctrl.set_control(np.array([0, 0, np.inf, 0, 0, 0, 0]))

    def test_gain_validation(self):
        with pytest.raises(ValueError):
            ImpedanceGains(joint_stiffness=-np.ones(7))
        with pytest.raises(ValueError):
            ImpedanceGains(filter_coeff=0.0)
