"""Arm description, motion limits and inertial parameters.

Everything is loadable from a plain-text ``key = value`` config file; the
packaged ``data/panda.cfg`` provides the defaults used throughout the library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

N_JOINTS = 7
N_ROWS = 8  # seven joints plus the fixed flange row


def _as_vec(values, n, name):
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have {n} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class MotionLimits:
    """Joint-space and Cartesian limits used by planners and safety checks."""

    q_min: np.ndarray
    q_max: np.ndarray
    dq_max: np.ndarray
    ddq_max: np.ndarray
    dddq_max: np.ndarray
    tau_max: np.ndarray
    v_max_cart: float = 1.7
    a_max_cart: float = 13.0
    j_max_cart: float = 6500.0
    omega_max: float = 2.5

    def __post_init__(self):
        for name in ("q_min", "q_max", "dq_max", "ddq_max", "dddq_max", "tau_max"):
            object.__setattr__(self, name, _as_vec(getattr(self, name), N_JOINTS, name))
        if not np.all(self.q_min < self.q_max):
            raise ValueError("q_min must be strictly below q_max componentwise")
        for name in ("dq_max", "ddq_max", "dddq_max", "tau_max"):
            if not np.all(getattr(self, name) > 0):
                raise ValueError(f"{name} must be strictly positive")
        for name in ("v_max_cart", "a_max_cart", "j_max_cart", "omega_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        object.__setattr__(self, "_q_min_s", tuple(float(v) for v in self.q_min))
        object.__setattr__(self, "_q_max_s", tuple(float(v) for v in self.q_max))


@dataclass(frozen=True)
class RobotDescription:
    """Modified-DH chain (Craig convention), tool transform and limits."""

    dh_a: np.ndarray
    dh_d: np.ndarray
    dh_alpha: np.ndarray
    dh_theta_offset: np.ndarray
    flange_to_ee: np.ndarray
    limits: MotionLimits
    neutral_q: np.ndarray

    def __post_init__(self):
        for name in ("dh_a", "dh_d", "dh_alpha", "dh_theta_offset"):
            object.__setattr__(self, name, _as_vec(getattr(self, name), N_ROWS, name))
        object.__setattr__(self, "flange_to_ee", np.asarray(self.flange_to_ee, dtype=float).reshape(4, 4))
        object.__setattr__(self, "neutral_q", _as_vec(self.neutral_q, N_JOINTS, "neutral_q"))
        if not (np.all(self.limits.q_min < self.neutral_q) and np.all(self.neutral_q < self.limits.q_max)):
            raise ValueError("neutral_q must lie strictly inside the joint limits")
        # Constant-coefficient decomposition of each row transform,
        # T_i(theta) = C_i + cos(theta) * D_i + sin(theta) * E_i,
        # precomputed once so forward kinematics is a handful of array ops.
        C = np.zeros((N_ROWS, 4, 4))
        D = np.zeros((N_ROWS, 4, 4))
        E = np.zeros((N_ROWS, 4, 4))
        ca, sa = np.cos(self.dh_alpha), np.sin(self.dh_alpha)
        C[:, 0, 3] = self.dh_a
        C[:, 1, 2] = -sa
        C[:, 1, 3] = -sa * self.dh_d
        C[:, 2, 2] = ca
        C[:, 2, 3] = ca * self.dh_d
        C[:, 3, 3] = 1.0
        D[:, 0, 0] = 1.0
        D[:, 1, 1] = ca
        D[:, 2, 1] = sa
        E[:, 0, 1] = -1.0
        E[:, 1, 0] = ca
        E[:, 2, 0] = sa
        object.__setattr__(self, "_row_const", C)
        object.__setattr__(self, "_row_cos", D)
        object.__setattr__(self, "_row_sin", E)
        # Scalar row constants (a, d, cos alpha, sin alpha, theta offset) for
        # the tight-loop forward kinematics kernel.
        rows_scalar = tuple(
            (float(a), float(d), float(math.cos(al)), float(math.sin(al)), float(off))
            for a, d, al, off in zip(self.dh_a, self.dh_d, self.dh_alpha, self.dh_theta_offset)
        )
        object.__setattr__(self, "_rows_scalar", rows_scalar)
        X = self.flange_to_ee
        object.__setattr__(self, "_flange_is_identity", bool(np.array_equal(X, np.eye(4))))
        object.__setattr__(self, "_flange_scalar", tuple(float(v) for v in X[:3, :4].ravel()))


@dataclass(frozen=True)
class LinkInertia:
    """Mass, COM (link frame) and inertia about the COM."""

    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "com", _as_vec(self.com, 3, "com"))
        inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        object.__setattr__(self, "inertia", inertia)
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if np.max(np.abs(inertia - inertia.T)) > 1e-12:
            raise ValueError("inertia must be symmetric")
        if np.min(np.linalg.eigvalsh(inertia)) <= 0:
            raise ValueError("inertia must be positive definite")
        object.__setattr__(self, "_m", float(self.mass))
        object.__setattr__(self, "_c", tuple(float(v) for v in self.com))
        object.__setattr__(self, "_I", tuple(float(v) for v in inertia.ravel()))


@dataclass(frozen=True)
class DynamicsParams:
    """Per-link inertials, reflected rotor inertia and the gravity vector.

    ``armature`` is the motor-plus-gear inertia reflected to each joint; it
    adds directly to the mass-matrix diagonal.
    """

    links: tuple
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    armature: np.ndarray = field(default_factory=lambda: np.full(N_JOINTS, 0.3))

    def __post_init__(self):
        if len(self.links) != N_JOINTS:
            raise ValueError(f"expected {N_JOINTS} links, got {len(self.links)}")
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "gravity", _as_vec(self.gravity, 3, "gravity"))
        object.__setattr__(self, "armature", _as_vec(self.armature, N_JOINTS, "armature"))
        if np.any(self.armature < 0):
            raise ValueError("armature inertia must be non-negative")


def _parse_config_text(text):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = [float(tok) for tok in value.replace(",", " ").split()]
    return entries


def _scalar(entries, key):
    vals = entries[key]
    if len(vals) != 1:
        raise ValueError(f"config key {key} must be a single number")
    return vals[0]


def load_robot_config(path=None):
    """Parse a config file into (RobotDescription, DynamicsParams).

    With no path, the packaged default arm is loaded.
    """
    if path is None:
        text = resources.files("pandasim.data").joinpath("panda.cfg").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    entries = _parse_config_text(text)

    limits = MotionLimits(
        q_min=entries["q_min"],
        q_max=entries["q_max"],
        dq_max=entries["dq_max"],
        ddq_max=entries["ddq_max"],
        dddq_max=entries["dddq_max"],
        tau_max=entries["tau_max"],
        v_max_cart=_scalar(entries, "v_max_cart"),
        a_max_cart=_scalar(entries, "a_max_cart"),
        j_max_cart=_scalar(entries, "j_max_cart"),
        omega_max=_scalar(entries, "omega_max"),
    )
    desc = RobotDescription(
        dh_a=entries["dh_a"],
        dh_d=entries["dh_d"],
        dh_alpha=entries["dh_alpha"],
        dh_theta_offset=entries["dh_theta_offset"],
        flange_to_ee=np.asarray(entries.get("flange_to_ee", np.eye(4).ravel())).reshape(4, 4),
        limits=limits,
        neutral_q=entries["neutral_q"],
    )

    links = []
    for i in range(1, N_JOINTS + 1):
        xx, yy, zz, xy, xz, yz = entries[f"link{i}_inertia"]
        inertia = np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])
        links.append(LinkInertia(mass=_scalar(entries, f"link{i}_mass"),
                                 com=entries[f"link{i}_com"], inertia=inertia))
    params = DynamicsParams(links=tuple(links), gravity=entries["gravity"],
                            armature=entries["armature"])
    if abs(np.linalg.norm(params.gravity) - 9.81) > 0.2:
        raise ValueError("gravity magnitude implausibly far from 9.81 m/s^2")
    return desc, params


PANDA, PANDA_DYNAMICS = load_robot_config()

JOINT_POSITION_START = np.array(
    [0.0, -math.pi / 4, 0.0, -3 * math.pi / 4, 0.0, math.pi / 2, math.pi / 4]
)
