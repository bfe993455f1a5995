"""Wire protocol: fixed-layout UDP datagrams plus newline-delimited JSON.

Both datagrams are little-endian with fixed sizes (316 and 72 bytes). The
pose block travels column-major.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

STATE_FORMAT = "<2Q37dI"
STATE_SIZE = struct.calcsize(STATE_FORMAT)      # 316
COMMAND_FORMAT = "<2Q7d"
COMMAND_SIZE = struct.calcsize(COMMAND_FORMAT)  # 72

MODE_IDLE = 0
MODE_TORQUE = 1

# Reflex bitset.
FLAG_JOINT_POSITION_LIMIT = 0x1
FLAG_JOINT_VELOCITY_LIMIT = 0x2
FLAG_TORQUE_LIMIT = 0x4
FLAG_COMMUNICATION = 0x8

FLAG_NAMES = {
    FLAG_JOINT_POSITION_LIMIT: "joint_position_limit",
    FLAG_JOINT_VELOCITY_LIMIT: "joint_velocity_limit",
    FLAG_TORQUE_LIMIT: "torque_limit",
    FLAG_COMMUNICATION: "communication",
}


def flags_to_names(flags):
    return [name for bit, name in FLAG_NAMES.items() if flags & bit]


@dataclass(frozen=True)
class StateDatagram:
    seq: int
    sim_time_us: int
    q: np.ndarray
    dq: np.ndarray
    tau_J: np.ndarray
    O_T_EE: np.ndarray
    error_flags: int

    def pack(self):
        return struct.pack(
            STATE_FORMAT, self.seq, self.sim_time_us,
            *self.q, *self.dq, *self.tau_J,
            *self.O_T_EE.flatten(order="F"),
            self.error_flags,
        )

    @classmethod
    def unpack(cls, data):
        if len(data) != STATE_SIZE:
            raise ValueError(f"state datagram must be {STATE_SIZE} bytes, got {len(data)}")
        vals = struct.unpack(STATE_FORMAT, data)
        return cls(
            seq=vals[0],
            sim_time_us=vals[1],
            q=np.array(vals[2:9]),
            dq=np.array(vals[9:16]),
            tau_J=np.array(vals[16:23]),
            O_T_EE=np.array(vals[23:39]).reshape(4, 4, order="F"),
            error_flags=vals[39],
        )


@dataclass(frozen=True)
class CommandDatagram:
    seq_echo: int
    mode: int
    tau: np.ndarray

    def pack(self):
        return struct.pack(COMMAND_FORMAT, self.seq_echo, self.mode, *self.tau)

    @classmethod
    def unpack(cls, data):
        if len(data) != COMMAND_SIZE:
            raise ValueError(f"command datagram must be {COMMAND_SIZE} bytes, got {len(data)}")
        vals = struct.unpack(COMMAND_FORMAT, data)
        return cls(seq_echo=vals[0], mode=vals[1], tau=np.array(vals[2:9]))


def dump_line(obj):
    """One NDJSON line, compact separators, trailing newline."""
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode()


def parse_line(line):
    return json.loads(line.decode())


CSV_HEADER = (
    "time,"
    + ",".join(f"q{i}" for i in range(7)) + ","
    + ",".join(f"dq{i}" for i in range(7)) + ","
    + ",".join(f"tau{i}" for i in range(7))
    + ",ee_x,ee_y,ee_z,"
    + ",".join(f"m{r}{c}" for c in range(4) for r in range(4))
)


def csv_row(time_s, q, dq, tau, O_T_EE):
    """One log row following CSV_HEADER; floats use shortest round-trip repr."""
    pose_cols = O_T_EE.flatten(order="F")
    parts = [repr(float(time_s))]
    parts += [repr(float(v)) for v in q]
    parts += [repr(float(v)) for v in dq]
    parts += [repr(float(v)) for v in tau]
    parts += [repr(float(v)) for v in O_T_EE[:3, 3]]
    parts += [repr(float(v)) for v in pose_cols]
    return ",".join(parts)
