"""Time-optimal jerk-limited motion generation with multi-DOF synchronization.

Single-DOF moves use seven-segment constant-jerk profiles (double-S): ramp
the acceleration up, hold, ramp down, cruise, then the mirrored braking
phase. The peak velocity is the one free parameter; it is resolved by
bisection so the displacement comes out exact. Multi-DOF trajectories are
synchronized by uniformly time-stretching every non-limiting DOF to the
slowest DOF's duration, which preserves C2 continuity and all limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import PANDA, N_JOINTS
from .errors import (DegenerateRotation, InfeasibleStart, OutOfRange,
                     WaypointOutOfLimits)
from .kinematics import ik, jacobian
from .transforms import matrix_from_rotvec, rotvec_from_matrix, validate_pose

_ROT_LENGTH_SCALE = 1.0  # m of arc treated as equivalent to 1 rad for rotation-only moves


@dataclass(frozen=True)
class SSegProfile:
    """Seven-segment constant-jerk profile for one scalar coordinate.

    ``durations``/``jerks`` hold the per-segment length and constant jerk;
    boundary states are precomputed so sampling is a cubic evaluation.
    """

    x0: float
    v0: float
    durations: tuple
    jerks: tuple
    knots_t: tuple
    knots_x: tuple
    knots_v: tuple
    knots_a: tuple

    @property
    def duration(self):
        return self.knots_t[-1]

    @property
    def x_end(self):
        return self.knots_x[-1]

    @property
    def peak_velocity(self):
        return max(abs(v) for v in self.knots_v)

    def sample(self, t):
        """Position, velocity and acceleration at time t within the profile."""
        T = self.knots_t[-1]
        if t < -1e-9 or t > T + 1e-9:
            raise OutOfRange(f"t={t} outside [0, {T}]")
        t = min(max(t, 0.0), T)
        k = 0
        while k < 6 and t > self.knots_t[k + 1]:
            k += 1
        dt = t - self.knots_t[k]
        j = self.jerks[k]
        x = self.knots_x[k] + self.knots_v[k] * dt + 0.5 * self.knots_a[k] * dt * dt + j * dt ** 3 / 6.0
        v = self.knots_v[k] + self.knots_a[k] * dt + 0.5 * j * dt * dt
        a = self.knots_a[k] + j * dt
        return x, v, a

    def stretched(self, gamma):
        """Same path traversed gamma times slower (gamma >= 1)."""
        if gamma <= 1.0 + 1e-12:
            return self
        durations = tuple(d * gamma for d in self.durations)
        jerks = tuple(j / gamma ** 3 for j in self.jerks)
        return _build_profile(self.x0, self.v0 / gamma, durations, jerks)


def _build_profile(x0, v0, durations, jerks):
    t = [0.0]
    xs = [x0]
    vs = [v0]
    accs = [0.0]
    for d, j in zip(durations, jerks):
        x, v, a = xs[-1], vs[-1], accs[-1]
        t.append(t[-1] + d)
        xs.append(x + v * d + 0.5 * a * d * d + j * d ** 3 / 6.0)
        vs.append(v + a * d + 0.5 * j * d * d)
        accs.append(a + j * d)
    return SSegProfile(x0, v0, tuple(durations), tuple(jerks),
                       tuple(t), tuple(xs), tuple(vs), tuple(accs))


def _phase(v_from, v_to, a_max, j_max):
    """Jerk-limited velocity ramp v_from -> v_to starting and ending at a = 0.

    Returns segment durations (t_jerk, t_const, t_jerk), the signed jerk and
    the distance covered. The velocity curve is antisymmetric about its
    midpoint, so distance = mean velocity * time.
    """
    dv = v_to - v_from
    if dv == 0.0:
        return (0.0, 0.0, 0.0), 0.0, 0.0
    s = 1.0 if dv > 0 else -1.0
    adv = abs(dv)
    if adv >= a_max * a_max / j_max:
        tj = a_max / j_max
        tc = adv / a_max - a_max / j_max
    else:
        tj = math.sqrt(adv / j_max)
        tc = 0.0
    T = 2.0 * tj + tc
    return (tj, tc, tj), s * j_max, 0.5 * (v_from + v_to) * T


def plan_dof_profile(x0, v0, xf, v_max, a_max, j_max):
    """Minimal-duration seven-segment profile from (x0, v0) to rest at xf.

    Raises InfeasibleStart when |v0| exceeds the velocity limit. When the
    braking distance from v0 overshoots the target, the profile dips through
    negative peak velocity and comes back; this is handled by the same
    peak-velocity search.
    """
    if not (v_max > 0 and a_max > 0 and j_max > 0):
        raise ValueError("limits must be strictly positive")
    if abs(v0) > v_max * (1.0 + 1e-9):
        raise InfeasibleStart(f"|v0|={abs(v0)} exceeds v_max={v_max}")
    D = xf - x0
    if D == 0.0 and v0 == 0.0:
        return _build_profile(x0, 0.0, (0.0,) * 7, (0.0,) * 7)

    # Mirror so the displacement is non-negative (pure-braking moves keep
    # their sign from the initial velocity).
    sigma = 1.0
    if D < 0.0 or (D == 0.0 and v0 > 0.0):
        sigma = -1.0
    Dm = sigma * D
    v0m = sigma * v0

    def total_dist(vp):
        _, _, d_acc = _phase(v0m, vp, a_max, j_max)
        _, _, d_dec = _phase(vp, 0.0, a_max, j_max)
        return d_acc + d_dec

    if total_dist(v_max) <= Dm:
        vp = v_max
    else:
        lo, hi = -v_max, v_max       # total_dist is monotone increasing in vp
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if total_dist(mid) < Dm:
                lo = mid
            else:
                hi = mid
        vp = hi

    (tj_a, tc_a, _), j_acc, d_acc = _phase(v0m, vp, a_max, j_max)
    (tj_d, tc_d, _), j_dec, d_dec = _phase(vp, 0.0, a_max, j_max)
    # Whatever distance the ramps do not cover is served by the cruise,
    # which also absorbs the bisection residual exactly.
    cruise = max((Dm - d_acc - d_dec) / vp, 0.0) if abs(vp) > 1e-15 else 0.0
    durations = (tj_a, tc_a, tj_a, cruise, tj_d, tc_d, tj_d)
    jerks = (sigma * j_acc, 0.0, -sigma * j_acc, 0.0,
             sigma * j_dec, 0.0, -sigma * j_dec)
    return _build_profile(x0, v0, durations, jerks)


def _constant_profile(x0, duration):
    return _build_profile(x0, 0.0, (duration, 0, 0, 0, 0, 0, 0), (0.0,) * 7)


@dataclass(frozen=True)
class JointTrajectory:
    """Waypoint-to-waypoint joint motion, one synchronized profile set per leg."""

    waypoints: tuple
    legs: tuple          # each: tuple of 7 SSegProfile sharing one duration
    leg_durations: tuple

    @property
    def total_duration(self):
        return sum(self.leg_durations)

    def _locate(self, t):
        T = self.total_duration
        if t < -1e-9 or t > T + 1e-9:
            raise OutOfRange(f"t={t} outside [0, {T}]")
        t = min(max(t, 0.0), T)
        for leg, dur in zip(self.legs, self.leg_durations):
            if t <= dur or leg is self.legs[-1]:
                return leg, min(t, dur)
            t -= dur
        return self.legs[-1], self.leg_durations[-1]

    def sample(self, t):
        """Reference (q_d, dq_d, ddq_d) at time t."""
        leg, tl = self._locate(t)
        q = np.empty(N_JOINTS)
        dq = np.empty(N_JOINTS)
        ddq = np.empty(N_JOINTS)
        for i, prof in enumerate(leg):
            q[i], dq[i], ddq[i] = prof.sample(tl)
        return q, dq, ddq


@dataclass(frozen=True)
class CartesianTrajectory:
    """Straight-line position path with shortest-arc orientation per leg."""

    poses: tuple
    legs: tuple          # each: (p0, R0, u, L, axis, angle, profile, path_len)
    leg_durations: tuple

    @property
    def total_duration(self):
        return sum(self.leg_durations)

    def _locate(self, t):
        T = self.total_duration
        if t < -1e-9 or t > T + 1e-9:
            raise OutOfRange(f"t={t} outside [0, {T}]")
        t = min(max(t, 0.0), T)
        for leg, dur in zip(self.legs, self.leg_durations):
            if t <= dur or leg is self.legs[-1]:
                return leg, min(t, dur)
            t -= dur
        return self.legs[-1], self.leg_durations[-1]

    def sample_pose(self, t):
        """Pose and world-frame twist ((4,4), linear (3,), angular (3,)) at t."""
        leg, tl = self._locate(t)
        (p0, R0, u, L, axis, angle, prof, path_len) = leg
        s, ds, _ = prof.sample(tl)
        frac = s / path_len if path_len > 0 else 0.0
        T = np.eye(4)
        T[:3, 3] = p0 + u * (frac * L)
        if angle > 0:
            T[:3, :3] = R0 @ matrix_from_rotvec(axis * (angle * frac))
        else:
            T[:3, :3] = R0
        rate = ds / path_len if path_len > 0 else 0.0
        v_lin = u * (rate * L)
        omega = (R0 @ axis) * (angle * rate) if angle > 0 else np.zeros(3)
        return T, v_lin, omega

    def sample_joint(self, t, q_seed, desc=PANDA):
        """Joint-space reference at t via inverse kinematics with a seed.

        Returns (q_d, dq_d, ddq_d); velocities map the path twist through a
        damped Jacobian inverse and accelerations are reported as zero.
        """
        T, v_lin, omega = self.sample_pose(t)
        q_d = ik(T, q7=float(q_seed[6]), q_init=q_seed, desc=desc)
        J = jacobian(q_d, desc)
        R = T[:3, :3]
        twist = np.concatenate([R.T @ v_lin, R.T @ omega])
        JJt = J @ J.T
        JJt[np.diag_indices_from(JJt)] += 1e-10
        dq_d = J.T @ np.linalg.solve(JJt, twist)
        return q_d, dq_d, np.zeros(N_JOINTS)


def _scaled_joint_limits(limits, speed_factor):
    if not 0.0 < speed_factor <= 1.0:
        raise ValueError("speed_factor must lie in (0, 1]")
    s = float(speed_factor)
    return limits.dq_max * s, limits.ddq_max * s * s, limits.dddq_max * s ** 3


def plan_joint_waypoints(waypoints, limits=None, speed_factor=0.2):
    """Time-optimal synchronized joint trajectory through the waypoints.

    Each leg stops at its waypoint; per leg every DOF is planned
    time-optimally and then stretched to the slowest DOF.
    """
    limits = limits or PANDA.limits
    wps = [np.asarray(w, dtype=float) for w in waypoints]
    if len(wps) < 2:
        raise ValueError("need at least two waypoints")
    for w in wps:
        if w.shape != (N_JOINTS,):
            raise ValueError("waypoints must be 7-vectors")
        if np.any(w < limits.q_min - 1e-12) or np.any(w > limits.q_max + 1e-12):
            raise WaypointOutOfLimits(f"waypoint {w} outside joint limits")
    v, a, j = _scaled_joint_limits(limits, speed_factor)

    legs = []
    durations = []
    for w0, w1 in zip(wps[:-1], wps[1:]):
        profs = [plan_dof_profile(w0[i], 0.0, w1[i], v[i], a[i], j[i])
                 for i in range(N_JOINTS)]
        T = max(p.duration for p in profs)
        synced = tuple(
            p.stretched(T / p.duration) if p.duration > 0 else _constant_profile(w0[i], T)
            for i, p in enumerate(profs)
        )
        legs.append(synced)
        durations.append(T)
    return JointTrajectory(tuple(map(tuple, wps)), tuple(legs), tuple(durations))


def plan_cartesian_waypoints(poses, limits=None, speed_factor=0.2):
    """Straight-line Cartesian trajectory with double-S arc-length timing."""
    limits = limits or PANDA.limits
    if len(poses) < 2:
        raise ValueError("need at least two poses")
    Ts = [validate_pose(p, f"poses[{i}]") for i, p in enumerate(poses)]
    if not 0.0 < speed_factor <= 1.0:
        raise ValueError("speed_factor must lie in (0, 1]")
    s = float(speed_factor)
    v, a, j = limits.v_max_cart * s, limits.a_max_cart * s * s, limits.j_max_cart * s ** 3
    omega_lim = limits.omega_max * s

    legs = []
    durations = []
    for T0, T1 in zip(Ts[:-1], Ts[1:]):
        p0, p1 = T0[:3, 3], T1[:3, 3]
        R0 = T0[:3, :3]
        delta = p1 - p0
        L = float(np.linalg.norm(delta))
        R_rel = R0.T @ T1[:3, :3]
        trace = np.clip((np.trace(R_rel) - 1.0) * 0.5, -1.0, 1.0)
        angle = float(math.acos(trace))
        if angle > math.pi - 1e-9:
            raise DegenerateRotation("consecutive orientations are antipodal")
        if angle > 1e-12:
            rv = rotvec_from_matrix(R_rel)
            angle = float(np.linalg.norm(rv))
            axis = rv / angle
        else:
            angle = 0.0
            axis = np.zeros(3)
        if L > 1e-12:
            u = delta / L
            path_len = L
            prof = plan_dof_profile(0.0, 0.0, L, v, a, j)
            if angle > 0 and prof.duration > 0:
                # Orientation rides the translation clock; slow down if the
                # implied angular rate would exceed the limit.
                peak_omega = angle * prof.peak_velocity / L
                if peak_omega > omega_lim:
                    prof = prof.stretched(peak_omega / omega_lim)
        elif angle > 1e-12:
            u = np.zeros(3)
            path_len = angle
            prof = plan_dof_profile(0.0, 0.0, angle, omega_lim,
                                    a / _ROT_LENGTH_SCALE, j / _ROT_LENGTH_SCALE)
        else:
            u = np.zeros(3)
            path_len = 0.0
            prof = _constant_profile(0.0, 0.0)
        legs.append((p0.copy(), R0.copy(), u, L, axis, angle, prof, path_len))
        durations.append(prof.duration)
    return CartesianTrajectory(tuple(np.array(T) for T in Ts), tuple(legs), tuple(durations))


def export_csv(traj, path, desc=PANDA, rate=1000.0, q_seed=None):
    """Write ``t,qd0..qd6,dqd0..dqd6`` rows sampled at the given rate."""
    dt = 1.0 / rate
    n = int(math.floor(traj.total_duration / dt)) + 1
    if q_seed is None:
        q_seed = desc.neutral_q
    q_seed = np.asarray(q_seed, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(f"qd{i}" for i in range(7)) + ","
                 + ",".join(f"dqd{i}" for i in range(7)) + "\n")
        for k in range(n):
            t = min(k * dt, traj.total_duration)
            if isinstance(traj, JointTrajectory):
                q, dq, _ = traj.sample(t)
            else:
                q, dq, _ = traj.sample_joint(t, q_seed, desc)
                q_seed = q
            fh.write(f"{t!r}," + ",".join(repr(float(x)) for x in q) + ","
                     + ",".join(repr(float(x)) for x in dq) + "\n")
