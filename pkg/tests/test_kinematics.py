"""Kinematics tests: FK against an independent oracle, Jacobian consistency,
inverse kinematics round trips and manipulability properties."""

import math

import numpy as np
import pytest

from pandasim.config import (JOINT_POSITION_START, PANDA, MotionLimits,
                             RobotDescription)
from pandasim.errors import NearSingular, Unreachable
from pandasim.kinematics import (fk, fk_frames, ik, jacobian, manipulability,
                                 manipulability_gradient)
from pandasim.transforms import rotvec_from_matrix


def fk_oracle(q, desc=PANDA):
    """Straight-line product of the eight elementary row transforms."""
    T = np.eye(4)
    theta = desc.dh_theta_offset.copy()
    theta[:7] += q
    for i in range(8):
        a, d, al, th = desc.dh_a[i], desc.dh_d[i], desc.dh_alpha[i], theta[i]
        ca, sa, ct, st = math.cos(al), math.sin(al), math.cos(th), math.sin(th)
        T = T @ np.array([[ct, -st, 0.0, a],
                          [st * ca, ct * ca, -sa, -sa * d],
                          [st * sa, ct * sa, ca, ca * d],
                          [0.0, 0.0, 0.0, 1.0]])
    return T @ desc.flange_to_ee


# Oracle output at the neutral configuration, frozen.
FK_NEUTRAL = np.array([
    [7.0710678118654746e-01, -7.0710678118654757e-01, -7.1378876314937187e-17, 3.0689056659294117e-01],
    [-7.0710678118654757e-01, -7.0710678118654746e-01, -8.6595605623549329e-17, -6.9464359776168276e-17],
    [2.5109221809586253e-17, 9.7355458105149065e-17, -1.0000000000000000e+00, 5.9028205230283926e-01],
    [0.0, 0.0, 0.0, 1.0],
])


def random_q(rng, n=1):
    lim = PANDA.limits
    qs = rng.uniform(lim.q_min, lim.q_max, size=(n, 7))
    return qs[0] if n == 1 else qs


class TestForwardKinematics:
    def test_neutral_matches_frozen_oracle(self):
        T = fk(JOINT_POSITION_START)
        assert np.max(np.abs(T - FK_NEUTRAL)) < 1e-12
        assert np.max(np.abs(fk_oracle(JOINT_POSITION_START) - FK_NEUTRAL)) < 1e-15

    def test_matches_oracle_on_random_configurations(self, rng):
        for q in random_q(rng, 200):
            assert np.max(np.abs(fk(q) - fk_oracle(q))) < 1e-12

    def test_degenerate_chain_is_identity(self):
        lim = PANDA.limits
        desc = RobotDescription(
            dh_a=np.zeros(8), dh_d=np.zeros(8), dh_alpha=np.zeros(8),
            dh_theta_offset=np.zeros(8), flange_to_ee=np.eye(4),
            limits=lim, neutral_q=PANDA.neutral_q)
        assert np.allclose(fk(np.zeros(7), desc), np.eye(4), atol=1e-15)

    def test_rotation_block_orthonormal(self, rng):
        for q in random_q(rng, 1000):
            R = fk(q)[:3, :3]
            assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9
            assert abs(np.linalg.det(R) - 1.0) < 1e-9

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            fk(np.array([0.0, np.nan, 0, 0, 0, 0, 0]))


class TestJacobian:
    def test_matches_finite_difference_twist(self, rng):
        eps = 1e-6
        for q in random_q(rng, 100):
            dq = rng.normal(size=7)
            dq /= np.linalg.norm(dq)
            J = jacobian(q)
            Tp = fk(q + eps * dq)
            Tm = fk(q - eps * dq)
            R = fk(q)[:3, :3]
            v_world = (Tp[:3, 3] - Tm[:3, 3]) / (2 * eps)
            w_world = rotvec_from_matrix(Tp[:3, :3] @ Tm[:3, :3].T) / (2 * eps)
            twist = np.concatenate([R.T @ v_world, R.T @ w_world])
            assert np.max(np.abs(J @ dq - twist)) < 1e-6

    def test_distal_columns_vanish_for_truncated_chain(self, rng):
        # Chain cut after joint 4: remaining rows have zero geometry, so
        # moving the distal joints cannot move the (coincident) end effector.
        cut = 4
        dh_a = PANDA.dh_a.copy()
        dh_d = PANDA.dh_d.copy()
        dh_alpha = PANDA.dh_alpha.copy()
        dh_a[cut:] = 0.0
        dh_d[cut:] = 0.0
        dh_alpha[cut:] = 0.0
        desc = RobotDescription(dh_a=dh_a, dh_d=dh_d, dh_alpha=dh_alpha,
                                dh_theta_offset=PANDA.dh_theta_offset,
                                flange_to_ee=np.eye(4), limits=PANDA.limits,
                                neutral_q=PANDA.neutral_q)
        for q in random_q(rng, 20):
            J = jacobian(q, desc)
            assert np.max(np.abs(J[:3, cut:])) < 1e-12

    def test_full_rank_at_neutral(self):
        s = np.linalg.svd(jacobian(JOINT_POSITION_START), compute_uv=False)
        assert s[5] > 1e-2


class TestInverseKinematics:
    def test_round_trip_at_neutral(self):
        q = ik(fk(JOINT_POSITION_START), q7=JOINT_POSITION_START[6],
               q_init=JOINT_POSITION_START)
        assert np.max(np.abs(q - JOINT_POSITION_START)) < 1e-9

    def test_lowered_pose_round_trip(self):
        pose = fk(JOINT_POSITION_START)
        pose[2, 3] -= 0.1
        q = ik(pose, q7=JOINT_POSITION_START[6], q_init=JOINT_POSITION_START)
        T = fk(q)
        assert np.linalg.norm(T[:3, 3] - pose[:3, 3]) < 1e-8
        assert np.linalg.norm(rotvec_from_matrix(pose[:3, :3] @ T[:3, :3].T)) < 1e-8

    def test_out_of_reach_raises(self):
        pose = fk(JOINT_POSITION_START)
        pose[:3, 3] = np.array([2.0, 0.0, 0.0])
        with pytest.raises(Unreachable):
            ik(pose, q7=0.0, q_init=JOINT_POSITION_START)

    def test_random_round_trips(self, rng):
        lim = PANDA.limits
        for q in random_q(rng, 1500):
            T = fk(q)
            qs = ik(T, q7=q[6], q_init=q)
            T2 = fk(qs)
            assert np.linalg.norm(T2[:3, 3] - T[:3, 3]) <= 1e-8
            rot_err = np.linalg.norm(rotvec_from_matrix(T[:3, :3] @ T2[:3, :3].T))
            assert rot_err <= 1e-8
            assert qs[6] == q[6]
            assert np.all(qs >= lim.q_min - 1e-12)
            assert np.all(qs <= lim.q_max + 1e-12)

    def test_branch_selection_prefers_seed(self, rng):
        # Returning exactly the seeding configuration means the closest
        # branch was picked among all valid ones.
        for q in random_q(rng, 100):
            qs = ik(fk(q), q7=q[6], q_init=q)
            assert np.max(np.abs(qs - q)) < 1e-6

    def test_q7_out_of_limits_rejected(self):
        with pytest.raises(ValueError):
            ik(fk(JOINT_POSITION_START), q7=3.0, q_init=JOINT_POSITION_START)


class TestManipulability:
    def test_positive_at_neutral(self):
        assert manipulability(JOINT_POSITION_START) > 0.05

    def test_small_at_stretched_arm(self):
        q = np.array([0.0, 0.0, 0.0, -0.0698, 0.0, -0.0175, 0.0])
        assert manipulability(q) < 1e-3

    def test_equals_product_of_singular_values(self, rng):
        for q in random_q(rng, 50):
            s = np.linalg.svd(jacobian(q), compute_uv=False)
            assert abs(manipulability(q) - np.prod(s)) < 1e-10

    def test_gradient_is_ascent_direction(self, rng):
        count = 0
        for q in random_q(rng, 200):
            m = manipulability(q)
            if m < 1e-3:
                continue
            g = manipulability_gradient(q)
            step = 1e-4 * g / max(np.linalg.norm(g), 1e-12)
            assert manipulability(q + step) > m
            count += 1
        assert count > 100

    def test_gradient_matches_finer_finite_difference(self, rng):
        for q in random_q(rng, 20):
            if manipulability(q) < 1e-3:
                continue
            g = manipulability_gradient(q)
            g_fine = np.empty(7)
            h = 1e-7
            for i in range(7):
                d = np.zeros(7)
                d[i] = h
                g_fine[i] = (manipulability(q + d) - manipulability(q - d)) / (2 * h)
            scale = max(np.max(np.abs(g_fine)), 1e-9)
            assert np.max(np.abs(g - g_fine)) / scale < 1e-4

    def test_gradient_vanishes_at_single_joint_maximum(self):
        # Scan manipulability along the elbow joint from the neutral pose,
        # locate the interior maximum numerically, and expect a near-zero
        # gradient component for that joint (the others stay free).
        joint = 3
        base = JOINT_POSITION_START.copy()
        grid = np.linspace(PANDA.limits.q_min[joint] + 0.05,
                           PANDA.limits.q_max[joint] - 0.05, 2001)
        vals = []
        for v in grid:
            q = base.copy()
            q[joint] = v
            vals.append(manipulability(q))
        k = int(np.argmax(vals))
        assert 0 < k < len(grid) - 1
        q_star = base.copy()
        q_star[joint] = grid[k]
        g = manipulability_gradient(q_star)
        assert abs(g[joint]) < 1e-3
        assert np.max(np.abs(g)) > 1e-2

    def test_gradient_near_singularity_raises(self):
        # A zero-geometry chain is exactly singular everywhere.
        desc = RobotDescription(
            dh_a=np.zeros(8), dh_d=np.zeros(8), dh_alpha=np.zeros(8),
            dh_theta_offset=np.zeros(8), flange_to_ee=np.eye(4),
            limits=PANDA.limits, neutral_q=PANDA.neutral_q)
        assert manipulability(np.zeros(7), desc) <= 1e-9
        with pytest.raises(NearSingular):
            manipulability_gradient(np.zeros(7), desc)


def test_fk_frames_chain_consistency(rng):
    for q in random_q(rng, 20):
        frames = fk_frames(q)
        assert np.max(np.abs(frames[8] - fk(q))) < 1e-12
