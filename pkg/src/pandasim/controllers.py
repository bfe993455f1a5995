"""Torque controller library: joint/Cartesian impedance and integrated velocity.

Every controller adds one-sided virtual joint walls near the position limits
and compensates Coriolis torques; gravity is compensated inside the
simulated control unit, so commanded torques are gravity-free. Controller
objects own their setpoint state; the freshest asynchronously written
command is consumed once per control step (single-slot mailbox).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import PANDA, PANDA_DYNAMICS, N_JOINTS
from .dynamics import coriolis_vector
from .errors import InvalidCommand
from .kinematics import fk, jacobian
from .transforms import quat_from_matrix, quat_log_error

DEFAULT_JOINT_STIFFNESS = np.array([600.0, 600.0, 600.0, 600.0, 250.0, 150.0, 50.0])
DEFAULT_JOINT_DAMPING = np.array([50.0, 50.0, 50.0, 20.0, 20.0, 20.0, 10.0])
DEFAULT_CART_STIFFNESS = np.array([600.0, 600.0, 600.0, 30.0, 30.0, 30.0])
DEFAULT_CART_DAMPING = 1.0 * np.sqrt(DEFAULT_CART_STIFFNESS)
DEFAULT_NULLSPACE_STIFFNESS = 0.5

DELTA_TAU_MAX = 1.0          # N*m per 1 ms step


@dataclass(frozen=True)
class WallParams:
    margin: float = 0.1      # rad
    stiffness: float = 300.0
    damping: float = 30.0


DEFAULT_WALL = WallParams()


@dataclass(frozen=True)
class ImpedanceGains:
    joint_stiffness: np.ndarray = field(default_factory=lambda: DEFAULT_JOINT_STIFFNESS.copy())
    joint_damping: np.ndarray = field(default_factory=lambda: DEFAULT_JOINT_DAMPING.copy())
    cart_stiffness: np.ndarray = field(default_factory=lambda: DEFAULT_CART_STIFFNESS.copy())
    cart_damping: np.ndarray = field(default_factory=lambda: DEFAULT_CART_DAMPING.copy())
    nullspace_stiffness: float = DEFAULT_NULLSPACE_STIFFNESS
    filter_coeff: float = 1.0

    def __post_init__(self):
        for name, n in (("joint_stiffness", 7), ("joint_damping", 7),
                        ("cart_stiffness", 6), ("cart_damping", 6)):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,) or np.any(arr < 0):
                raise ValueError(f"{name} must be a non-negative {n}-vector")
            object.__setattr__(self, name, arr)
        if self.nullspace_stiffness < 0:
            raise ValueError("nullspace_stiffness must be non-negative")
        if not 0.0 < self.filter_coeff <= 1.0:
            raise ValueError("filter_coeff must lie in (0, 1]")


def joint_wall_torque(q, dq, limits, wall=DEFAULT_WALL):
    """One-sided repulsive spring-damper near each joint limit.

    Zero strictly inside [q_min + margin, q_max - margin]; the damper acts
    only while moving toward the limit so release is not sticky.
    """
    tau = np.zeros(N_JOINTS)
    lo = limits.q_min + wall.margin
    hi = limits.q_max - wall.margin
    below = q < lo
    above = q > hi
    tau[below] = wall.stiffness * (lo[below] - q[below])
    tau[above] = wall.stiffness * (hi[above] - q[above])
    damp_lo = below & (dq < 0)
    damp_hi = above & (dq > 0)
    tau[damp_lo] -= wall.damping * dq[damp_lo]
    tau[damp_hi] -= wall.damping * dq[damp_hi]
    return tau


def saturate_torque_rate(tau_cmd, tau_prev, tau_max, delta_max=DELTA_TAU_MAX):
    """Limit the per-step torque change, then clamp to the absolute bound."""
    stepped = tau_prev + np.clip(tau_cmd - tau_prev, -delta_max, delta_max)
    return np.clip(stepped, -tau_max, tau_max)


def joint_impedance_torque(q, dq, q_d, dq_d, gains=None, params=PANDA_DYNAMICS,
                           limits=None, wall=DEFAULT_WALL, desc=PANDA):
    """Spring-damper on the joint error plus Coriolis and wall terms."""
    gains = gains or ImpedanceGains()
    limits = limits or desc.limits
    tau = (gains.joint_stiffness * (q_d - q)
           + gains.joint_damping * (dq_d - dq)
           + coriolis_vector(q, dq, params, desc)
           + joint_wall_torque(q, dq, limits, wall))
    return tau


def cartesian_impedance_torque(q, dq, position_d, orientation_d, gains=None,
                               params=PANDA_DYNAMICS, limits=None,
                               wall=DEFAULT_WALL, desc=PANDA, nullspace_q=None):
    """Task-space spring-damper mapped through the Jacobian transpose.

    The orientation error is the quaternion logarithm in rad, shortest arc.
    A nullspace spring pulls toward ``nullspace_q`` (the neutral pose by
    default) without disturbing the task.
    """
    gains = gains or ImpedanceGains()
    limits = limits or desc.limits
    if nullspace_q is None:
        nullspace_q = desc.neutral_q
    T = fk(q, desc)
    J = jacobian(q, desc)
    R = T[:3, :3]
    e = np.empty(6)
    e[:3] = R.T @ (position_d - T[:3, 3])
    e[3:] = R.T @ quat_log_error(orientation_d, quat_from_matrix(R))
    wrench = gains.cart_stiffness * e - gains.cart_damping * (J @ dq)
    tau_task = J.T @ wrench
    kn = gains.nullspace_stiffness
    tau_null_raw = kn * (nullspace_q - q) - 2.0 * math.sqrt(kn) * dq
    # Project into the task nullspace (torque-space projector).
    Jpinv_T = np.linalg.pinv(J.T)
    tau_null = tau_null_raw - J.T @ (Jpinv_T @ tau_null_raw)
    return (tau_task + tau_null
            + coriolis_vector(q, dq, params, desc)
            + joint_wall_torque(q, dq, limits, wall))


def integrated_velocity_step(q_d, dq_cmd, dt, limits, margin=DEFAULT_WALL.margin):
    """Integrate a clamped velocity command into a joint setpoint.

    The setpoint saturates a margin inside the position limits; commands are
    clamped, never rejected.
    """
    dq = np.clip(dq_cmd, -limits.dq_max, limits.dq_max)
    q_new = np.clip(q_d + dq * dt, limits.q_min + margin, limits.q_max - margin)
    return q_new, dq


class _ControllerBase:
    """Shared lifecycle: sim-time tracking and the setpoint mailbox."""

    def __init__(self):
        self._start_time = None
        self._time = 0.0

    def on_start(self, state, desc, params):
        self._start_time = state.time
        self._time = state.time

    def on_step_time(self, t):
        self._time = t

    def get_time(self):
        """Seconds of controller time since start."""
        if self._start_time is None:
            return 0.0
        return self._time - self._start_time


class JointImpedance(_ControllerBase):
    """Tracks a joint setpoint (q_d, dq_d) with impedance torques."""

    def __init__(self, stiffness=None, damping=None, filter_coeff=1.0):
        super().__init__()
        self.gains = ImpedanceGains(
            joint_stiffness=DEFAULT_JOINT_STIFFNESS if stiffness is None else stiffness,
            joint_damping=DEFAULT_JOINT_DAMPING if damping is None else damping,
            filter_coeff=filter_coeff,
        )
        self._cmd = None
        self._filtered = None

    def set_control(self, q_d, dq_d=None):
        q_d = np.asarray(q_d, dtype=float)
        if q_d.shape != (N_JOINTS,) or not np.all(np.isfinite(q_d)):
            raise InvalidCommand("q_d must be a finite 7-vector")
        dq_d = np.zeros(N_JOINTS) if dq_d is None else np.asarray(dq_d, dtype=float)
        self._cmd = (q_d, dq_d)

    def on_start(self, state, desc, params):
        super().on_start(state, desc, params)
        self._desc, self._params = desc, params
        if self._cmd is None:
            self._cmd = (state.q.copy(), np.zeros(N_JOINTS))
        self._filtered = None

    def step(self, state, dt):
        q_d, dq_d = self._cmd
        a = self.gains.filter_coeff
        if self._filtered is None or a >= 1.0:
            self._filtered = q_d.copy()
        else:
            self._filtered = a * q_d + (1.0 - a) * self._filtered
        return joint_impedance_torque(state.q, state.dq, self._filtered, dq_d,
                                      self.gains, self._params,
                                      self._desc.limits, desc=self._desc)


class CartesianImpedance(_ControllerBase):
    """Tracks a Cartesian pose setpoint (position + quaternion)."""

    def __init__(self, impedance=None, damping=None, nullspace_stiffness=None,
                 filter_coeff=1.0):
        super().__init__()
        self.gains = ImpedanceGains(
            cart_stiffness=DEFAULT_CART_STIFFNESS if impedance is None else impedance,
            cart_damping=(np.sqrt(np.asarray(impedance, dtype=float)) if impedance is not None
                          and damping is None else
                          (DEFAULT_CART_DAMPING if damping is None else damping)),
            nullspace_stiffness=(DEFAULT_NULLSPACE_STIFFNESS if nullspace_stiffness is None
                                 else nullspace_stiffness),
            filter_coeff=filter_coeff,
        )
        self._cmd = None
        self._filtered = None

    def set_control(self, position, orientation):
        position = np.asarray(position, dtype=float)
        orientation = np.asarray(orientation, dtype=float)
        if position.shape != (3,) or not np.all(np.isfinite(position)):
            raise InvalidCommand("position must be a finite 3-vector")
        if orientation.shape != (4,) or abs(np.linalg.norm(orientation) - 1.0) > 1e-9:
            raise InvalidCommand("orientation must be a unit quaternion (x, y, z, w)")
        self._cmd = (position, orientation)

    def on_start(self, state, desc, params):
        super().on_start(state, desc, params)
        self._desc, self._params = desc, params
        if self._cmd is None:
            T = state.O_T_EE
            self._cmd = (T[:3, 3].copy(), quat_from_matrix(T[:3, :3]))
        self._filtered = None

    def step(self, state, dt):
        pos_cmd, quat_cmd = self._cmd
        a = self.gains.filter_coeff
        if self._filtered is None or a >= 1.0:
            self._filtered = (pos_cmd.copy(), quat_cmd.copy())
        else:
            p = a * pos_cmd + (1.0 - a) * self._filtered[0]
            qraw = a * quat_cmd + (1.0 - a) * self._filtered[1]
            if np.dot(quat_cmd, self._filtered[1]) < 0:
                qraw = a * quat_cmd - (1.0 - a) * self._filtered[1]
            self._filtered = (p, qraw / np.linalg.norm(qraw))
        return cartesian_impedance_torque(state.q, state.dq, self._filtered[0],
                                          self._filtered[1], self.gains,
                                          self._params, self._desc.limits,
                                          desc=self._desc)


class IntegratedVelocity(_ControllerBase):
    """Integrates velocity commands into a joint impedance setpoint."""

    def __init__(self, stiffness=None, damping=None):
        super().__init__()
        self.gains = ImpedanceGains(
            joint_stiffness=DEFAULT_JOINT_STIFFNESS if stiffness is None else stiffness,
            joint_damping=DEFAULT_JOINT_DAMPING if damping is None else damping,
        )
        self._dq_cmd = np.zeros(N_JOINTS)
        self._q_d = None

    def set_control(self, dq_cmd):
        dq_cmd = np.asarray(dq_cmd, dtype=float)
        if dq_cmd.shape != (N_JOINTS,) or not np.all(np.isfinite(dq_cmd)):
            raise InvalidCommand("dq command must be a finite 7-vector")
        self._dq_cmd = dq_cmd

    def on_start(self, state, desc, params):
        super().on_start(state, desc, params)
        self._desc, self._params = desc, params
        self._q_d = state.q.copy()
        self._dq_cmd = np.zeros(N_JOINTS)

    def step(self, state, dt):
        self._q_d, dq = integrated_velocity_step(self._q_d, self._dq_cmd, dt,
                                                 self._desc.limits)
        return joint_impedance_torque(state.q, state.dq, self._q_d, dq,
                                      self.gains, self._params,
                                      self._desc.limits, desc=self._desc)


class _TrajectoryTracker(_ControllerBase):
    """Internal controller tracking a planned trajectory reference."""

    def __init__(self, traj, gains=None, desc=PANDA):
        super().__init__()
        self.gains = gains or ImpedanceGains()
        self._traj = traj
        self._is_cartesian = hasattr(traj, "sample_joint")
        self._seed = None

    def on_start(self, state, desc, params):
        super().on_start(state, desc, params)
        self._desc, self._params = desc, params
        self._seed = state.q.copy()

    def reference(self, t):
        t = min(max(t, 0.0), self._traj.total_duration)
        if self._is_cartesian:
            q_d, dq_d, _ = self._traj.sample_joint(t, self._seed, self._desc)
            self._seed = q_d
        else:
            q_d, dq_d, _ = self._traj.sample(t)
        return q_d, dq_d

    def step(self, state, dt):
        q_d, dq_d = self.reference(self.get_time())
        return joint_impedance_torque(state.q, state.dq, q_d, dq_d, self.gains,
                                      self._params, self._desc.limits,
                                      desc=self._desc)
