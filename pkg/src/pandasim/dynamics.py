"""Rigid-body dynamics: recursive Newton-Euler, mass matrix, Coriolis, gravity.

The inverse dynamics uses the classic link-frame Newton-Euler recursion;
the mass matrix uses the composite-rigid-body algorithm with 6x6 spatial
inertias so the two stay independently checkable against each other.
Spatial vectors are ordered [angular; linear].
"""

from __future__ import annotations

import numpy as np

from .config import PANDA_DYNAMICS, PANDA, N_JOINTS
from .kinematics import _row_transforms

_EZ = np.array([0.0, 0.0, 1.0])


def _check_vec(v, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (N_JOINTS,):
        raise ValueError(f"{name} must have 7 entries")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


def rnea(q, dq, ddq, params=PANDA_DYNAMICS, desc=PANDA, gravity=None):
    """Joint torques tau = M(q) ddq + c(q, dq) + g(q) via Newton-Euler.

    Gravity enters as a fictitious base acceleration; pass a zero gravity
    vector to evaluate the gravity-free part. The recursion runs on plain
    scalars: it sits inside the 1 kHz loops of both controller and simulator.
    """
    from math import cos, sin, isfinite

    qt = tuple(map(float, q))
    dqt = tuple(map(float, dq))
    ddqt = tuple(map(float, ddq))
    if len(qt) != N_JOINTS or len(dqt) != N_JOINTS or len(ddqt) != N_JOINTS:
        raise ValueError("q, dq, ddq must each have 7 entries")
    if not all(map(isfinite, qt + dqt + ddqt)):
        raise ValueError("inputs contain non-finite values")
    g = params.gravity if gravity is None else np.asarray(gravity, dtype=float)

    rows = desc._rows_scalar
    # Forward pass: angular velocity/acceleration and frame acceleration,
    # all expressed in the local link frame.
    wx = wy = wz = 0.0
    dwx = dwy = dwz = 0.0
    ax, ay, az = -float(g[0]), -float(g[1]), -float(g[2])
    Rs = []
    Fs = []
    Ns = []
    for i in range(N_JOINTS):
        a_len, d, ca, sa, off = rows[i]
        th = qt[i] + off
        ct, st = cos(th), sin(th)
        # Rotation of frame i in frame i-1 and its origin.
        r00, r01, r02 = ct, -st, 0.0
        r10, r11, r12 = st * ca, ct * ca, -sa
        r20, r21, r22 = st * sa, ct * sa, ca
        px, py, pz = a_len, -sa * d, ca * d
        Rs.append((r00, r01, r02, r10, r11, r12, r20, r21, r22))

        # a + dw x p + w x (w x p), then rotate into frame i.
        cx = wy * pz - wz * py
        cy = wz * px - wx * pz
        cz = wx * py - wy * px
        tx = ax + (dwy * pz - dwz * py) + (wy * cz - wz * cy)
        ty = ay + (dwz * px - dwx * pz) + (wz * cx - wx * cz)
        tz = az + (dwx * py - dwy * px) + (wx * cy - wy * cx)
        ax = r00 * tx + r10 * ty + r20 * tz
        ay = r01 * tx + r11 * ty + r21 * tz
        az = r02 * tx + r12 * ty + r22 * tz

        nwx = r00 * wx + r10 * wy + r20 * wz
        nwy = r01 * wx + r11 * wy + r21 * wz
        nwz = r02 * wx + r12 * wy + r22 * wz
        ndwx = r00 * dwx + r10 * dwy + r20 * dwz
        ndwy = r01 * dwx + r11 * dwy + r21 * dwz
        ndwz = r02 * dwx + r12 * dwy + r22 * dwz
        qd = dqt[i]
        # dw += w_in x (qd ez), w += qd ez, dw_z += qdd
        dwx = ndwx + nwy * qd
        dwy = ndwy - nwx * qd
        dwz = ndwz + ddqt[i]
        wx, wy, wz = nwx, nwy, nwz + qd

        link = params.links[i]
        m = link._m
        cx_, cy_, cz_ = link._c
        i00, i01, i02, i10, i11, i12, i20, i21, i22 = link._I
        # COM acceleration and the resulting force/moment about the frame.
        ccx = wy * cz_ - wz * cy_
        ccy = wz * cx_ - wx * cz_
        ccz = wx * cy_ - wy * cx_
        acx = ax + (dwy * cz_ - dwz * cy_) + (wy * ccz - wz * ccy)
        acy = ay + (dwz * cx_ - dwx * cz_) + (wz * ccx - wx * ccz)
        acz = az + (dwx * cy_ - dwy * cx_) + (wx * ccy - wy * ccx)
        Fs.append((m * acx, m * acy, m * acz))
        iwx = i00 * wx + i01 * wy + i02 * wz
        iwy = i10 * wx + i11 * wy + i12 * wz
        iwz = i20 * wx + i21 * wy + i22 * wz
        Ns.append((i00 * dwx + i01 * dwy + i02 * dwz + wy * iwz - wz * iwy,
                   i10 * dwx + i11 * dwy + i12 * dwz + wz * iwx - wx * iwz,
                   i20 * dwx + i21 * dwy + i22 * dwz + wx * iwy - wy * iwx))

    # Fixed flange row closes the chain with zero tip force.
    a_len, d, ca, sa, off = rows[7]
    ct, st = cos(off), sin(off)
    R_next = (ct, -st, 0.0, st * ca, ct * ca, -sa, st * sa, ct * sa, ca)
    p_next = (a_len, -sa * d, ca * d)

    tau = np.empty(N_JOINTS)
    fx = fy = fz = 0.0
    nx = ny = nz = 0.0
    for i in range(N_JOINTS - 1, -1, -1):
        r00, r01, r02, r10, r11, r12, r20, r21, r22 = R_next
        px, py, pz = p_next
        fcx = r00 * fx + r01 * fy + r02 * fz
        fcy = r10 * fx + r11 * fy + r12 * fz
        fcz = r20 * fx + r21 * fy + r22 * fz
        rnx = r00 * nx + r01 * ny + r02 * nz
        rny = r10 * nx + r11 * ny + r12 * nz
        rnz = r20 * nx + r21 * ny + r22 * nz
        Fx, Fy, Fz = Fs[i]
        cx_, cy_, cz_ = params.links[i]._c
        Nx, Ny, Nz = Ns[i]
        nx = Nx + rnx + (cy_ * Fz - cz_ * Fy) + (py * fcz - pz * fcy)
        ny = Ny + rny + (cz_ * Fx - cx_ * Fz) + (pz * fcx - px * fcz)
        nz = Nz + rnz + (cx_ * Fy - cy_ * Fx) + (px * fcy - py * fcx)
        fx, fy, fz = fcx + Fx, fcy + Fy, fcz + Fz
        tau[i] = nz + params.armature[i] * ddqt[i]
        R_next = Rs[i]
        p_next = (rows[i][0], -rows[i][3] * rows[i][1], rows[i][2] * rows[i][1])
    return tau


def gravity_vector(q, params=PANDA_DYNAMICS, desc=PANDA):
    """Torques balancing gravity at rest: g(q) = rnea(q, 0, 0)."""
    zero = np.zeros(N_JOINTS)
    return rnea(q, zero, zero, params, desc)


def coriolis_vector(q, dq, params=PANDA_DYNAMICS, desc=PANDA):
    """Velocity-product torques: c(q, dq) = rnea(q, dq, 0) - g(q)."""
    zero = np.zeros(N_JOINTS)
    return rnea(q, dq, zero, params, desc, gravity=np.zeros(3))


def _spatial_inertia(link):
    cx = np.array([[0.0, -link.com[2], link.com[1]],
                   [link.com[2], 0.0, -link.com[0]],
                   [-link.com[1], link.com[0], 0.0]])
    I = np.empty((6, 6))
    I[:3, :3] = link.inertia + link.mass * (cx @ cx.T)
    I[:3, 3:] = link.mass * cx
    I[3:, :3] = -link.mass * cx
    I[3:, 3:] = link.mass * np.eye(3)
    return I


def mass_matrix(q, params=PANDA_DYNAMICS, desc=PANDA):
    """Symmetric positive-definite joint-space inertia via composite bodies."""
    q = _check_vec(q, "q")
    rows = _row_transforms(q, desc)

    # Motion transform mapping parent-frame twists into frame i coordinates.
    X = np.zeros((N_JOINTS, 6, 6))
    for i in range(N_JOINTS):
        Rt = rows[i, :3, :3].T
        pi = rows[i, :3, 3]
        px = np.array([[0.0, -pi[2], pi[1]],
                       [pi[2], 0.0, -pi[0]],
                       [-pi[1], pi[0], 0.0]])
        X[i, :3, :3] = Rt
        X[i, 3:, 3:] = Rt
        X[i, 3:, :3] = -Rt @ px

    Ic = [_spatial_inertia(params.links[i]) for i in range(N_JOINTS)]
    for i in range(N_JOINTS - 1, 0, -1):
        Ic[i - 1] = Ic[i - 1] + X[i].T @ Ic[i] @ X[i]

    M = np.zeros((N_JOINTS, N_JOINTS))
    for i in range(N_JOINTS):
        Fi = Ic[i][:, 2].copy()    # Ic @ S with S = z rotation axis
        M[i, i] = Fi[2] + params.armature[i]
        j = i
        while j > 0:
            Fi = X[j].T @ Fi
            j -= 1
            M[i, j] = Fi[2]
            M[j, i] = Fi[2]
    return M
