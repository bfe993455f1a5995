"""Small SO(3)/SE(4x4) helpers shared by kinematics, controllers and planning.

Quaternions use the scalar-last (x, y, z, w) convention throughout.
"""

from __future__ import annotations

import math

import numpy as np


def validate_pose(T, name="pose"):
    """Check the homogeneous-transform invariants and return T as a 4x4 array.

    The bottom row must be exactly (0, 0, 0, 1) and the rotation block
    orthonormal to 1e-9.
    """
    T = np.asarray(T, dtype=float)
    if T.shape != (4, 4):
        raise ValueError(f"{name} must be 4x4, got {T.shape}")
    if not np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0]):
        raise ValueError(f"{name} bottom row must be exactly [0,0,0,1]")
    R = T[:3, :3]
    if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
        raise ValueError(f"{name} rotation block is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > 1e-9:
        raise ValueError(f"{name} rotation block must have det +1")
    return T


def pose_inverse(T):
    R = T[:3, :3]
    out = np.eye(4)
    out[:3, :3] = R.T
    out[:3, 3] = -R.T @ T[:3, 3]
    return out


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotvec_from_matrix(R):
    """Logarithm of a rotation matrix as an axis*angle 3-vector.

    Stable across the whole domain including angles near 0 and pi.
    """
    trace = float(np.clip((R[0, 0] + R[1, 1] + R[2, 2] - 1.0) * 0.5, -1.0, 1.0))
    angle = math.acos(trace)
    if angle < 1e-8:
        # First-order: skew part already equals axis*angle.
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) * 0.5
    if angle > math.pi - 1e-6:
        # Near pi the skew part vanishes; recover the axis from the symmetric part.
        B = (R + np.eye(3)) * 0.5
        axis = np.sqrt(np.maximum(np.diag(B), 0.0))
        # Fix signs using the largest component as reference.
        k = int(np.argmax(axis))
        if axis[k] > 0:
            for i in range(3):
                if i != k and B[k, i] < 0:
                    axis[i] = -axis[i]
        axis /= np.linalg.norm(axis)
        # Resolve the overall sign with the (tiny but signed) skew part.
        skew = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        if np.dot(skew, axis) < 0:
            axis = -axis
        return axis * angle
    skew = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return skew * (angle / (2.0 * math.sin(angle)))


def matrix_from_rotvec(v):
    angle = float(np.linalg.norm(v))
    if angle < 1e-12:
        return np.eye(3) + skew(v)
    axis = np.asarray(v, dtype=float) / angle
    K = skew(axis)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def skew(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def quat_from_matrix(R):
    """Rotation matrix to unit quaternion (x, y, z, w), w >= 0."""
    t = R[0, 0] + R[1, 1] + R[2, 2]
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array([(R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s, 0.25 * s])
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array([0.25 * s, (R[0, 1] + R[1, 0]) / s,
                      (R[0, 2] + R[2, 0]) / s, (R[2, 1] - R[1, 2]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array([(R[0, 1] + R[1, 0]) / s, 0.25 * s,
                      (R[1, 2] + R[2, 1]) / s, (R[0, 2] - R[2, 0]) / s])
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array([(R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s,
                      0.25 * s, (R[1, 0] - R[0, 1]) / s])
    if q[3] < 0:
        q = -q
    return q / np.linalg.norm(q)


def matrix_from_quat(q):
    x, y, z, w = q
    n = x * x + y * y + z * z + w * w
    if abs(n - 1.0) > 1e-9:
        raise ValueError("quaternion must have unit norm")
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def quat_log_error(q_desired, q_current):
    """Orientation error as a rotation vector, shortest arc, in rad.

    Equals log(R_d * R^T) computed through quaternions; antipodal inputs
    are resolved toward the positive scalar part.
    """
    xd, yd, zd, wd = q_desired
    x, y, z, w = q_current
    # q_err = q_desired * conj(q_current)
    ex = wd * -x + xd * w + yd * -z - zd * -y
    ey = wd * -y - xd * -z + yd * w + zd * -x
    ez = wd * -z + xd * -y - yd * -x + zd * w
    ew = wd * w - xd * -x - yd * -y - zd * -z
    if ew < 0:
        ex, ey, ez, ew = -ex, -ey, -ez, -ew
    vec_norm = math.sqrt(ex * ex + ey * ey + ez * ez)
    if vec_norm < 1e-12:
        return np.array([2.0 * ex, 2.0 * ey, 2.0 * ez])
    angle = 2.0 * math.atan2(vec_norm, ew)
    return np.array([ex, ey, ez]) * (angle / vec_norm)


def rpy_zyx(R):
    """Intrinsic z-y-x Euler angles (roll, pitch, yaw) with
    R = Rz(yaw) @ Ry(pitch) @ Rx(roll), angles in rad."""
    sy = -R[2, 0]
    sy = min(1.0, max(-1.0, sy))
    pitch = math.asin(sy)
    if abs(sy) > 1.0 - 1e-12:
        # Gimbal lock: fold yaw into roll.
        roll = math.atan2(-R[1, 2], R[1, 1])
        yaw = 0.0
    else:
        roll = math.atan2(R[2, 1], R[2, 2])
        yaw = math.atan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])
