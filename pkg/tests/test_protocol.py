"""Wire-format conformance: golden bytes, sizes and round trips."""

import numpy as np

from pandasim.protocol import (COMMAND_SIZE, CSV_HEADER, CommandDatagram,
                               STATE_SIZE, StateDatagram, csv_row)

# Golden fixture: a state datagram with hand-checkable field encodings,
# frozen as hex. seq=1, time=1000 us, q = (1, -2, 0.5, 0, 0, 0, 0),
# dq = zeros, tau = (0, ..., -1), pose = identity with translation
# (0.25, -0.5, 1.0), flags = 0x5.
GOLDEN_STATE = StateDatagram(
    seq=1,
    sim_time_us=1000,
    q=np.array([1.0, -2.0, 0.5, 0.0, 0.0, 0.0, 0.0]),
    dq=np.zeros(7),
    tau_J=np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]),
    O_T_EE=np.array([[1.0, 0.0, 0.0, 0.25],
                     [0.0, 1.0, 0.0, -0.5],
                     [0.0, 0.0, 1.0, 1.0],
                     [0.0, 0.0, 0.0, 1.0]]),
    error_flags=0x5,
)

GOLDEN_STATE_HEX = (
    "0100000000000000" "e803000000000000"
    "000000000000f03f" "00000000000000c0" "000000000000e03f"
    "0000000000000000" "0000000000000000" "0000000000000000" "0000000000000000"
    + "0000000000000000" * 7
    + "0000000000000000" * 6 + "000000000000f0bf"
    # pose, column-major: col0, col1, col2, col3
    + "000000000000f03f" + "0000000000000000" * 3
    + "0000000000000000" + "000000000000f03f" + "0000000000000000" * 2
    + "0000000000000000" * 2 + "000000000000f03f" + "0000000000000000"
    + "000000000000d03f" + "000000000000e0bf" + "000000000000f03f" + "000000000000f03f"
    + "05000000"
)

GOLDEN_COMMAND = CommandDatagram(
    seq_echo=7, mode=1,
    tau=np.array([0.0, 1.0, -1.0, 0.5, 0.0, 0.0, 2.0]))

GOLDEN_COMMAND_HEX = (
    "0700000000000000" "0100000000000000"
    "0000000000000000" "000000000000f03f" "000000000000f0bf"
    "000000000000e03f" "0000000000000000" "0000000000000000"
    "0000000000000040"
)


def test_datagram_sizes():
    assert STATE_SIZE == 316
    assert COMMAND_SIZE == 72


def test_state_golden_bytes():
    packed = GOLDEN_STATE.pack()
    assert len(packed) == 316
    assert packed.hex() == GOLDEN_STATE_HEX


def test_state_golden_unpack():
    st = StateDatagram.unpack(bytes.fromhex(GOLDEN_STATE_HEX))
    assert st.seq == 1
    assert st.sim_time_us == 1000
    assert np.array_equal(st.q, GOLDEN_STATE.q)
    assert np.array_equal(st.dq, GOLDEN_STATE.dq)
    assert np.array_equal(st.tau_J, GOLDEN_STATE.tau_J)
    assert np.array_equal(st.O_T_EE, GOLDEN_STATE.O_T_EE)
    assert st.error_flags == 0x5


def test_command_golden_bytes():
    packed = GOLDEN_COMMAND.pack()
    assert len(packed) == 72
    assert packed.hex() == GOLDEN_COMMAND_HEX
    cmd = CommandDatagram.unpack(packed)
    assert cmd.seq_echo == 7 and cmd.mode == 1
    assert np.array_equal(cmd.tau, GOLDEN_COMMAND.tau)


def test_roundtrip_random(rng):
    for _ in range(100):
        st = StateDatagram(
            seq=int(rng.integers(0, 2 ** 63)),
            sim_time_us=int(rng.integers(0, 2 ** 63)),
            q=rng.standard_normal(7), dq=rng.standard_normal(7),
            tau_J=rng.standard_normal(7),
            O_T_EE=rng.standard_normal((4, 4)),
            error_flags=int(rng.integers(0, 16)))
        back = StateDatagram.unpack(st.pack())
        assert back.seq == st.seq and back.sim_time_us == st.sim_time_us
        assert np.array_equal(back.q, st.q)
        assert np.array_equal(back.O_T_EE, st.O_T_EE)


def test_csv_header_stable():
    assert CSV_HEADER.startswith(
        "time,q0,q1,q2,q3,q4,q5,q6,dq0,dq1,dq2,dq3,dq4,dq5,dq6,"
        "tau0,tau1,tau2,tau3,tau4,tau5,tau6,ee_x,ee_y,ee_z,m00,m10")
    assert len(CSV_HEADER.split(",")) == 1 + 7 + 7 + 7 + 3 + 16


def test_csv_row_matches_header_width():
    row = csv_row(0.001, np.zeros(7), np.zeros(7), np.zeros(7), np.eye(4))
    assert len(row.split(",")) == len(CSV_HEADER.split(","))
    assert row.split(",")[0] == "0.001"
