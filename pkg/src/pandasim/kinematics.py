"""Forward/inverse kinematics, Jacobians and manipulability for the 7-DOF arm.

The inverse kinematics is a closed-form geometric decomposition
parameterized by the last joint angle (the redundancy parameter), with a
damped-least-squares polish as fallback near singular configurations.
Hot paths (fk, ik) run on plain scalars; frame enumeration and Jacobians
use vectorized numpy.
"""

from __future__ import annotations

import math
from math import atan2, cos, hypot, isfinite, sin, sqrt

import numpy as np

from .config import PANDA, N_JOINTS
from .errors import NearSingular, Unreachable
from .transforms import rotvec_from_matrix, rot_x, rot_z

_TWO_PI = 2.0 * math.pi


def _check_q(q):
    q = np.asarray(q, dtype=float)
    if q.shape != (N_JOINTS,):
        raise ValueError(f"expected 7 joint values, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint vector contains non-finite values")
    return q


def _fk_tuple(qt, desc):
    """Chain product as flat scalars: (r00..r22, px, py, pz)."""
    r00, r01, r02 = 1.0, 0.0, 0.0
    r10, r11, r12 = 0.0, 1.0, 0.0
    r20, r21, r22 = 0.0, 0.0, 1.0
    p0 = p1 = p2 = 0.0
    i = 0
    for a, d, ca, sa, off in desc._rows_scalar:
        th = qt[i] + off if i < N_JOINTS else off
        i += 1
        ct, st = cos(th), sin(th)
        ty, tz = -sa * d, ca * d
        p0 += r00 * a + r01 * ty + r02 * tz
        p1 += r10 * a + r11 * ty + r12 * tz
        p2 += r20 * a + r21 * ty + r22 * tz
        stca, stsa, ctca, ctsa = st * ca, st * sa, ct * ca, ct * sa
        r00, r01, r02 = (r00 * ct + r01 * stca + r02 * stsa,
                         -r00 * st + r01 * ctca + r02 * ctsa,
                         -r01 * sa + r02 * ca)
        r10, r11, r12 = (r10 * ct + r11 * stca + r12 * stsa,
                         -r10 * st + r11 * ctca + r12 * ctsa,
                         -r11 * sa + r12 * ca)
        r20, r21, r22 = (r20 * ct + r21 * stca + r22 * stsa,
                         -r20 * st + r21 * ctca + r22 * ctsa,
                         -r21 * sa + r22 * ca)
    if not desc._flange_is_identity:
        x00, x01, x02, xt0, x10, x11, x12, xt1, x20, x21, x22, xt2 = desc._flange_scalar
        p0 += r00 * xt0 + r01 * xt1 + r02 * xt2
        p1 += r10 * xt0 + r11 * xt1 + r12 * xt2
        p2 += r20 * xt0 + r21 * xt1 + r22 * xt2
        r00, r01, r02, r10, r11, r12, r20, r21, r22 = (
            r00 * x00 + r01 * x10 + r02 * x20,
            r00 * x01 + r01 * x11 + r02 * x21,
            r00 * x02 + r01 * x12 + r02 * x22,
            r10 * x00 + r11 * x10 + r12 * x20,
            r10 * x01 + r11 * x11 + r12 * x21,
            r10 * x02 + r11 * x12 + r12 * x22,
            r20 * x00 + r21 * x10 + r22 * x20,
            r20 * x01 + r21 * x11 + r22 * x21,
            r20 * x02 + r21 * x12 + r22 * x22,
        )
    return r00, r01, r02, r10, r11, r12, r20, r21, r22, p0, p1, p2

def fk(q, desc=PANDA):
    """Base-to-end-effector homogeneous transform, tool transform included."""
    qt = (float(q[0]), float(q[1]), float(q[2]), float(q[3]),
          float(q[4]), float(q[5]), float(q[6]))
    if not (isfinite(qt[0]) and isfinite(qt[1]) and isfinite(qt[2]) and isfinite(qt[3])
            and isfinite(qt[4]) and isfinite(qt[5]) and isfinite(qt[6])):
        raise ValueError("joint vector contains non-finite values")
    r = _fk_tuple(qt, desc)
    return np.array([[r[0], r[1], r[2], r[9]],
                     [r[3], r[4], r[5], r[10]],
                     [r[6], r[7], r[8], r[11]],
                     [0.0, 0.0, 0.0, 1.0]])


def _row_transforms(q, desc):
    """All eight elementary row transforms for configuration q, shape (8,4,4)."""
    theta = desc.dh_theta_offset.copy()
    theta[:N_JOINTS] += q
    ct, st = np.cos(theta), np.sin(theta)
    return desc._row_const + ct[:, None, None] * desc._row_cos + st[:, None, None] * desc._row_sin


def fk_frames(q, desc=PANDA):
    """Cumulative transforms after each chain row plus the end effector.

    Returns an array of shape (9, 4, 4): frames 1..8 and the EE frame.
    """
    q = _check_q(q)
    rows = _row_transforms(q, desc)
    out = np.empty((9, 4, 4))
    T = rows[0]
    out[0] = T
    for i in range(1, 8):
        T = T @ rows[i]
        out[i] = T
    out[8] = T @ desc.flange_to_ee
    return out


def jacobian(q, desc=PANDA):
    """Geometric Jacobian in the end-effector frame, 6x7.

    Rows are linear velocity (m/s) then angular velocity (rad/s) of the EE
    per unit joint rate.
    """
    frames = fk_frames(q, desc)
    z = frames[:N_JOINTS, :3, 2]          # joint axes in the base frame
    p = frames[:N_JOINTS, :3, 3]          # joint origins
    p_ee = frames[8, :3, 3]
    R_ee = frames[8, :3, :3]
    J = np.empty((6, N_JOINTS))
    J[:3] = R_ee.T @ np.cross(z, p_ee - p).T
    J[3:] = R_ee.T @ z.T
    return J


def manipulability(q, desc=PANDA):
    """Dexterity measure sqrt(det(J J^T)); zero exactly at singularities."""
    J = jacobian(q, desc)
    return math.sqrt(max(float(np.linalg.det(J @ J.T)), 0.0))


def manipulability_gradient(q, desc=PANDA, step=1e-6):
    """Gradient of the manipulability measure by central finite differences."""
    q = _check_q(q)
    if manipulability(q, desc) <= 1e-9:
        raise NearSingular("manipulability gradient unreliable at a singularity")
    grad = np.empty(N_JOINTS)
    for i in range(N_JOINTS):
        delta = np.zeros(N_JOINTS)
        delta[i] = step
        grad[i] = (manipulability(q + delta, desc) - manipulability(q - delta, desc)) / (2.0 * step)
    return grad


# -- inverse kinematics ------------------------------------------------------

def _pose_error(T, T_target):
    dp = T_target[:3, 3] - T[:3, 3]
    rv = rotvec_from_matrix(T_target[:3, :3] @ T[:3, :3].T)
    return float(np.linalg.norm(dp)), float(np.linalg.norm(rv))


def _candidate_errors(qc, Rt, pt, desc):
    """Position and rotation error of a candidate against scalar targets."""
    r = _fk_tuple(qc, desc)
    dp = sqrt((r[9] - pt[0]) ** 2 + (r[10] - pt[1]) ** 2 + (r[11] - pt[2]) ** 2)
    # m = Rt @ Rc^T; small-angle resolution needs the skew part, not the trace.
    m00 = Rt[0] * r[0] + Rt[1] * r[1] + Rt[2] * r[2]
    m11 = Rt[3] * r[3] + Rt[4] * r[4] + Rt[5] * r[5]
    m22 = Rt[6] * r[6] + Rt[7] * r[7] + Rt[8] * r[8]
    m21 = Rt[6] * r[3] + Rt[7] * r[4] + Rt[8] * r[5]
    m12 = Rt[3] * r[6] + Rt[4] * r[7] + Rt[5] * r[8]
    m02 = Rt[0] * r[6] + Rt[1] * r[7] + Rt[2] * r[8]
    m20 = Rt[6] * r[0] + Rt[7] * r[1] + Rt[8] * r[2]
    m10 = Rt[3] * r[0] + Rt[4] * r[1] + Rt[5] * r[2]
    m01 = Rt[0] * r[3] + Rt[1] * r[4] + Rt[2] * r[5]
    c = (m00 + m11 + m22 - 1.0) * 0.5
    if c > 0.99:
        s = 0.5 * sqrt((m21 - m12) ** 2 + (m02 - m20) ** 2 + (m10 - m01) ** 2)
        dr = math.asin(min(1.0, s))
    else:
        dr = math.acos(max(-1.0, min(1.0, c)))
    return dp, dr


def _dls_polish(q, T_target, desc, damping=1e-6, max_iters=50):
    """Damped-least-squares refinement on joints 1..6 with joint 7 held fixed."""
    q = np.asarray(q, dtype=float).copy()
    lim = desc.limits
    for _ in range(max_iters):
        frames = fk_frames(q, desc)
        T = frames[8]
        R = T[:3, :3]
        e = np.empty(6)
        e[:3] = R.T @ (T_target[:3, 3] - T[:3, 3])
        e[3:] = rotvec_from_matrix(R.T @ T_target[:3, :3])
        if np.max(np.abs(e)) < 1e-12:
            break
        J = jacobian(q, desc)[:, :6]
        JJt = J @ J.T
        JJt[np.diag_indices_from(JJt)] += damping
        dq = J.T @ np.linalg.solve(JJt, e)
        q[:6] = np.clip(q[:6] + dq, lim.q_min[:6], lim.q_max[:6])
    return q


def _fit_limit(angle, lo, hi):
    """Shift by 2*pi to land inside [lo, hi] if possible, else return None."""
    for cand in (angle, angle + _TWO_PI, angle - _TWO_PI):
        if lo - 1e-9 <= cand <= hi + 1e-9:
            return min(max(cand, lo), hi)
    return None


def ik(pose, q7=None, q_init=None, desc=PANDA):
    """Joint angles realizing the given EE pose with joint 7 fixed at q7.

    Among the valid closed-form branches the one closest to q_init in the
    Euclidean sense is returned; ties prefer the larger elbow angle. Raises
    Unreachable when the pose is outside the workspace or no branch fits
    the joint limits.
    """
    T_target = np.asarray(pose, dtype=float)
    if T_target.shape != (4, 4):
        raise ValueError("pose must be a 4x4 homogeneous transform")
    lim = desc.limits
    if q_init is None:
        q_init = desc.neutral_q
    qi = (float(q_init[0]), float(q_init[1]), float(q_init[2]), float(q_init[3]),
          float(q_init[4]), float(q_init[5]), float(q_init[6]))
    if q7 is None:
        q7 = qi[6]
    q7 = float(q7)
    if not (lim._q_min_s[6] - 1e-9 <= q7 <= lim._q_max_s[6] + 1e-9):
        raise ValueError("q7 outside the joint-7 limits")

    rows = desc._rows_scalar
    d1, d3, d5, d_fl = rows[0][1], rows[2][1], rows[4][1], rows[7][1]
    a4, a7 = rows[3][0], rows[6][0]
    qlo, qhi = lim._q_min_s, lim._q_max_s

    Rt = (T_target[0, 0], T_target[0, 1], T_target[0, 2],
          T_target[1, 0], T_target[1, 1], T_target[1, 2],
          T_target[2, 0], T_target[2, 1], T_target[2, 2])
    pt = (T_target[0, 3], T_target[1, 3], T_target[2, 3])

    # Frame 7 = EE with the tool and flange offsets stripped.
    if desc._flange_is_identity:
        f00, f01, f02, f10, f11, f12, f20, f21, f22 = Rt
        g0, g1, g2 = pt
    else:
        x00, x01, x02, xt0, x10, x11, x12, xt1, x20, x21, x22, xt2 = desc._flange_scalar
        # R7 = Rt @ X_R^T, p7 = pt - R7 @ X_t
        f00 = Rt[0] * x00 + Rt[1] * x01 + Rt[2] * x02
        f01 = Rt[0] * x10 + Rt[1] * x11 + Rt[2] * x12
        f02 = Rt[0] * x20 + Rt[1] * x21 + Rt[2] * x22
        f10 = Rt[3] * x00 + Rt[4] * x01 + Rt[5] * x02
        f11 = Rt[3] * x10 + Rt[4] * x11 + Rt[5] * x12
        f12 = Rt[3] * x20 + Rt[4] * x21 + Rt[5] * x22
        f20 = Rt[6] * x00 + Rt[7] * x01 + Rt[8] * x02
        f21 = Rt[6] * x10 + Rt[7] * x11 + Rt[8] * x12
        f22 = Rt[6] * x20 + Rt[7] * x21 + Rt[8] * x22
        g0 = pt[0] - (f00 * xt0 + f01 * xt1 + f02 * xt2)
        g1 = pt[1] - (f10 * xt0 + f11 * xt1 + f12 * xt2)
        g2 = pt[2] - (f20 * xt0 + f21 * xt1 + f22 * xt2)
    g0 -= d_fl * f02
    g1 -= d_fl * f12
    g2 -= d_fl * f22

    # Frame 6 is fully determined once q7 is fixed.
    c7, s7 = cos(q7), sin(q7)
    b00 = c7 * f00 - s7 * f01
    b10 = c7 * f10 - s7 * f11
    b20 = c7 * f20 - s7 * f21
    b01, b11, b21 = -f02, -f12, -f22
    b02 = s7 * f00 + c7 * f01
    b12 = s7 * f10 + c7 * f11
    b22 = s7 * f20 + c7 * f21
    o6x = g0 - a7 * b00
    o6y = g1 - a7 * b10
    o6z = g2 - a7 * b20

    vx, vy, vz = o6x, o6y, o6z - d1
    r26_sq = vx * vx + vy * vy + vz * vz

    # Elbow angle from the law of cosines on the shoulder-elbow-wrist triangle.
    A4 = a4 * (d3 + d5)
    B4 = a4 * a4 - d3 * d5
    C4 = ((d3 * d3 + a4 * a4) + (d5 * d5 + a4 * a4) - r26_sq) * 0.5
    Rc = hypot(A4, B4)
    ratio = C4 / Rc
    if abs(ratio) > 1.0 + 1e-9:
        raise Unreachable("wrist point outside the reachable annulus")
    ratio = min(1.0, max(-1.0, ratio))
    phi = atan2(B4, A4)
    base = math.asin(ratio)
    q4_options = []
    for raw in (base - phi, math.pi - base - phi):
        raw = atan2(sin(raw), cos(raw))
        fitted = _fit_limit(raw, qlo[3], qhi[3])
        if fitted is not None and not any(abs(fitted - o) < 1e-10 for o in q4_options):
            q4_options.append(fitted)

    w0 = -(b00 * vx + b10 * vy + b20 * vz)
    w1 = -(b01 * vx + b11 * vy + b21 * vz)
    w2 = -(b02 * vx + b12 * vy + b22 * vz)

    candidates = []
    for q4 in q4_options:
        s4, c4 = sin(q4), cos(q4)
        E = a4 - (d3 * s4 + a4 * c4)
        F = -(d5 + d3 * c4 - a4 * s4)
        if abs(E) < 1e-9:
            continue  # rare degenerate geometry: the polish fallback covers it
        s5 = w2 / E
        if abs(s5) > 1.0 + 1e-9:
            continue
        s5 = min(1.0, max(-1.0, s5))
        root5 = sqrt(max(0.0, 1.0 - s5 * s5))
        for c5 in (root5, -root5):
            xt = E * c5
            den = xt * xt + F * F
            if den < 1e-14:
                continue
            c6 = (xt * w0 + F * w1) / den
            s6 = (F * w0 - xt * w1) / den
            q5 = atan2(s5, c5)
            q6 = atan2(s6, c6)
            q5f = q5 if qlo[4] <= q5 <= qhi[4] else _fit_limit(q5, qlo[4], qhi[4])
            q6f = q6 if qlo[5] <= q6 <= qhi[5] else _fit_limit(q6, qlo[5], qhi[5])
            if q5f is None or q6f is None:
                continue
            # Shoulder angles via the ZYZ factorization of the upper chain:
            # M = R04 Rz(-q4) Rx(-pi/2) = Rz(q1) Ry(q2) Rz(q3).
            # H = (R56^T R45^T) (Rz(-q4) Rx(-pi/2)) expanded to scalars.
            h00 = c5 * c6 * c4 - s6 * s4
            h01 = c6 * s5
            h02 = c5 * c6 * s4 + s6 * c4
            h10 = -c5 * s6 * c4 - c6 * s4
            h11 = -s5 * s6
            h12 = -c5 * s6 * s4 + c6 * c4
            h20 = s5 * c4
            h21 = -c5
            h22 = s5 * s4
            m00 = b00 * h00 + b01 * h10 + b02 * h20
            m10 = b10 * h00 + b11 * h10 + b12 * h20
            m20 = b20 * h00 + b21 * h10 + b22 * h20
            m21 = b20 * h01 + b21 * h11 + b22 * h21
            m02 = b00 * h02 + b01 * h12 + b02 * h22
            m12 = b10 * h02 + b11 * h12 + b12 * h22
            m22 = b20 * h02 + b21 * h12 + b22 * h22
            c2 = min(1.0, max(-1.0, m22))
            s2_root = sqrt(max(0.0, 1.0 - c2 * c2))
            for s2 in (s2_root, -s2_root):
                if s2_root > 1e-8:
                    q1 = atan2(m12 / s2, m02 / s2)
                    q2 = atan2(s2, c2)
                    q3 = atan2(m21 / s2, -m20 / s2)
                else:
                    # Shoulder singularity: only q1 + q3 is determined.
                    if c2 < 0:
                        break  # q2 = +-pi is outside the limits
                    q2 = 0.0
                    m01_ = b00 * h01 + b01 * h11 + b02 * h21
                    total = atan2(m10, m00) if abs(m00) + abs(m10) > 1e-12 else atan2(-m01_, m00)
                    q1 = min(max(qi[0], qlo[0]), qhi[0])
                    q3 = atan2(sin(total - q1), cos(total - q1))
                    q3f = _fit_limit(q3, qlo[2], qhi[2])
                    if q3f is None:
                        q3 = min(max(q3, qlo[2]), qhi[2])
                        q1 = atan2(sin(total - q3), cos(total - q3))
                    else:
                        q3 = q3f
                q1f = q1 if qlo[0] <= q1 <= qhi[0] else _fit_limit(q1, qlo[0], qhi[0])
                q2f = q2 if qlo[1] <= q2 <= qhi[1] else _fit_limit(q2, qlo[1], qhi[1])
                q3f = q3 if qlo[2] <= q3 <= qhi[2] else _fit_limit(q3, qlo[2], qhi[2])
                if q1f is not None and q2f is not None and q3f is not None:
                    candidates.append((q1f, q2f, q3f, q4, q5f, q6f, q7))
                if s2_root <= 1e-8:
                    break  # both s2 signs coincide at the singularity

    # Rank by distance to the seed; ties prefer the larger elbow angle.
    if len(candidates) > 1:
        i0, i1, i2, i3, i4, i5 = qi[0], qi[1], qi[2], qi[3], qi[4], qi[5]

        def rank(c):
            return ((c[0] - i0) ** 2 + (c[1] - i1) ** 2 + (c[2] - i2) ** 2
                    + (c[3] - i3) ** 2 + (c[4] - i4) ** 2 + (c[5] - i5) ** 2, -c[3])

        candidates.sort(key=rank)
    for cand in candidates:
        pos_err, rot_err = _candidate_errors(cand, Rt, pt, desc)
        if pos_err <= 1e-8 and rot_err <= 1e-8:
            return np.array(cand)
        polished = _dls_polish(cand, T_target, desc)
        polished[6] = q7
        pos_err, rot_err = _pose_error(fk(polished, desc), T_target)
        if pos_err <= 1e-8 and rot_err <= 1e-8:
            return polished

    # No analytic branch worked (degenerate geometry): polish from the seed.
    seeded = np.array(qi)
    seeded[6] = q7
    polished = _dls_polish(seeded, T_target, desc)
    polished[6] = q7
    pos_err, rot_err = _pose_error(fk(polished, desc), T_target)
    if pos_err <= 1e-8 and rot_err <= 1e-8:
        return polished
    raise Unreachable("no joint solution within limits reaches the pose")
