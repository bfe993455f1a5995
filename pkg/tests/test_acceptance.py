"""Acceptance suite: every top-level criterion at its stated tolerance.

Each test prints one PASS line on success (run with ``pytest -s`` to see
them live); a failure reads as the usual pytest report for that criterion.
"""

import math
import time

import numpy as np
import pytest

from conftest import connect, make_server
from pandasim import controllers, fk, ik
from pandasim.client import Panda
from pandasim.config import JOINT_POSITION_START, PANDA
from pandasim.kinematics import jacobian
from pandasim.mmc import ServoGoal, run_mmc, solve_qp
from pandasim.protocol import (COMMAND_SIZE, CSV_HEADER, CommandDatagram,
                               FLAG_JOINT_POSITION_LIMIT, MODE_TORQUE,
                               STATE_SIZE, StateDatagram)
from pandasim.trajectory import (plan_cartesian_waypoints, plan_dof_profile,
                                 plan_joint_waypoints)
from pandasim.transforms import rotvec_from_matrix
from qp_oracles import oracle_al_pgd, oracle_enumerate, random_problem
from test_protocol import (GOLDEN_COMMAND, GOLDEN_COMMAND_HEX, GOLDEN_STATE,
                           GOLDEN_STATE_HEX)
from test_trajectory import oracle_duration


def _report(name, detail):
    print(f"\nACCEPTANCE PASS  {name}: {detail}")


def _chord_deviation(points, a, b):
    u = (b - a) / np.linalg.norm(b - a)
    d = points - a
    return np.linalg.norm(d - np.outer(d @ u, u), axis=1)


def _block4_poses():
    T0 = fk(JOINT_POSITION_START)
    T0[1, 3] = 0.25
    T1 = T0.copy()
    T1[1, 3] = -0.25
    return T0, T1


def test_fk_ik_round_trip_10k():
    """10 000 random in-limit configurations round-trip below 1e-8."""
    rng = np.random.default_rng(2024)
    lim = PANDA.limits
    t0 = time.perf_counter()
    failures = 0
    worst = 0.0
    for _ in range(10000):
        q = rng.uniform(lim.q_min, lim.q_max)
        T = fk(q)
        q2 = ik(T, q7=q[6], q_init=q)
        T2 = fk(q2)
        pos_err = float(np.linalg.norm(T2[:3, 3] - T[:3, 3]))
        rot_err = float(np.linalg.norm(rotvec_from_matrix(T[:3, :3] @ T2[:3, :3].T)))
        worst = max(worst, pos_err, rot_err)
        if pos_err > 1e-8 or rot_err > 1e-8:
            failures += 1
    elapsed = time.perf_counter() - t0
    assert failures == 0
    assert elapsed < 30.0
    _report("fk/ik round trip",
            f"10000 configs, 0 failures, worst error {worst:.2e}, {elapsed:.1f} s")


def test_latency_envelope():
    """Median runtimes inside 10x of the reference native figures."""
    rng = np.random.default_rng(77)
    lim = PANDA.limits
    qs = rng.uniform(lim.q_min, lim.q_max, size=(2000, 7))
    poses = [fk(q) for q in qs]

    t_fk = []
    for q in qs:
        t0 = time.perf_counter_ns()
        fk(q)
        t_fk.append(time.perf_counter_ns() - t0)
    fk_med = float(np.median(t_fk)) / 1e3

    t_ik = []
    for q, T in zip(qs, poses):
        t0 = time.perf_counter_ns()
        ik(T, q7=q[6], q_init=q)
        t_ik.append(time.perf_counter_ns() - t0)
    ik_med = float(np.median(t_ik)) / 1e3

    t_joint = []
    for _ in range(30):
        wps = [rng.uniform(lim.q_min, lim.q_max) for _ in range(5)]
        t0 = time.perf_counter()
        plan_joint_waypoints(wps, lim, 0.2)
        t_joint.append(time.perf_counter() - t0)
    joint_med = float(np.median(t_joint)) * 1e3

    T0, T1 = _block4_poses()
    t_cart = []
    for _ in range(30):
        t0 = time.perf_counter()
        plan_cartesian_waypoints([T0, T1], lim, 0.2)
        t_cart.append(time.perf_counter() - t0)
    cart_med = float(np.median(t_cart)) * 1e3

    assert fk_med <= 20.0, f"fk median {fk_med:.1f} us"
    assert ik_med <= 50.0, f"ik median {ik_med:.1f} us"
    assert joint_med <= 170.0, f"joint plan median {joint_med:.1f} ms"
    assert cart_med <= 81.0, f"cartesian plan median {cart_med:.1f} ms"
    _report("latency envelope",
            f"fk {fk_med:.1f} us, ik {ik_med:.1f} us, "
            f"5-wp joint plan {joint_med:.2f} ms, cartesian plan {cart_med:.2f} ms")


def test_trajectory_optimality_and_limits():
    """1000-case single-DOF suite within 1e-6 s of the brute-force oracle."""
    rng = np.random.default_rng(55)
    worst_gap = 0.0
    worst_violation = 0.0
    for _ in range(1000):
        x0, xf = rng.uniform(-3.0, 3.0, 2)
        if abs(xf - x0) < 1e-9:
            xf = x0 + 0.5
        v = rng.uniform(0.2, 4.0)
        a = rng.uniform(0.5, 15.0)
        j = rng.uniform(5.0, 8000.0)
        prof = plan_dof_profile(x0, 0.0, xf, v, a, j)
        gap = abs(prof.duration - oracle_duration(abs(xf - x0), v, a, j))
        worst_gap = max(worst_gap, gap)
        assert gap <= 1e-6
        n = max(int(prof.duration * 1000), 10)
        for k in range(n + 1):
            t = min(k * prof.duration / n, prof.duration)
            _, vel, acc = prof.sample(t)
            worst_violation = max(worst_violation, abs(vel) - v, abs(acc) - a)
        for jk in prof.jerks:
            worst_violation = max(worst_violation, abs(jk) - j)
    assert worst_violation <= 1e-9
    _report("trajectory optimality & limits",
            f"1000 cases, worst duration gap {worst_gap:.2e} s, "
            f"worst limit violation {worst_violation:.2e}")


def test_straight_vs_joint_space_paths(tmp_path):
    """Cartesian motion hugs the chord; the joint-space twin bows away."""
    server = make_server(mode="lockstep")
    try:
        desk, panda = connect(server)
        T0, T1 = _block4_poses()
        a, b = T0[:3, 3], T1[:3, 3]

        panda.move_to_pose(T0)
        panda.enable_logging(2000)
        panda.move_to_pose(T1)
        panda.disable_logging()
        log_cart = panda.get_log()
        cart_csv = tmp_path / "path_cartesian.csv"
        panda.export_log_csv(cart_csv)
        dev_cart = _chord_deviation(log_cart["O_T_EE"][:, :3, 3], a, b)

        q0 = ik(T0, q7=JOINT_POSITION_START[6], q_init=JOINT_POSITION_START)
        q1 = ik(T1, q7=q0[6], q_init=q0)
        panda.move_to_joint_position(q0)
        panda.enable_logging(4000)
        panda.move_to_joint_position(q1)
        panda.disable_logging()
        log_joint = panda.get_log()
        joint_csv = tmp_path / "path_joint.csv"
        panda.export_log_csv(joint_csv)
        dev_joint = _chord_deviation(log_joint["O_T_EE"][:, :3, 3], a, b)

        panda.close()
        desk.close()
    finally:
        server.close()

    assert dev_cart.max() < 5e-3
    assert dev_joint.max() > 1e-3
    header = cart_csv.read_text().splitlines()[0]
    assert header == CSV_HEADER
    assert joint_csv.read_text().splitlines()[0] == CSV_HEADER
    _report("path contrast",
            f"cartesian max deviation {dev_cart.max()*1e3:.2f} mm (< 5 mm), "
            f"joint-space {dev_joint.max()*1e3:.1f} mm (> 1 mm)")


def test_sinusoid_tracking():
    """4*pi seconds of 1 kHz Cartesian impedance: amplitude and RMS error."""
    server = make_server(mode="lockstep")
    try:
        desk, panda = connect(server)
        panda.move_to_start()
        ctrl = controllers.CartesianImpedance()
        x0 = panda.get_position()
        q0 = panda.get_orientation()
        runtime = math.pi * 4.0
        panda.start_controller(ctrl)
        ys = []
        y_cmd = []
        with panda.create_context(frequency=1e3, max_runtime=runtime) as ctx:
            while ctx.ok():
                x_d = x0.copy()
                x_d[1] += 0.1 * math.sin(ctrl.get_time())
                ctrl.set_control(x_d, q0)
                ys.append(panda.get_position()[1])
                y_cmd.append(x_d[1])
        iters = ctx.iterations
        panda.stop_controller()
        panda.close()
        desk.close()
    finally:
        server.close()

    ys = np.array(ys)
    y_cmd = np.array(y_cmd)
    amplitude = 0.5 * (ys.max() - ys.min())
    rms = float(np.sqrt(np.mean((ys - y_cmd) ** 2)))
    assert abs(iters - 12566) <= 126
    assert 0.09 <= amplitude <= 0.11
    assert rms < 5e-3
    _report("sinusoid tracking",
            f"{iters} iterations, amplitude {amplitude:.4f} m, RMS {rms*1e3:.2f} mm")


def test_logging_window():
    """A 2000-step buffer spans exactly the final two seconds of motion."""
    server = make_server(mode="lockstep")
    try:
        desk, panda = connect(server)
        T0, T1 = _block4_poses()
        panda.move_to_pose(T0)
        panda.enable_logging(2000)
        panda.move_to_pose(T1)
        panda.disable_logging()
        log = panda.get_log()
        final_time = panda.get_state().time
        panda.close()
        desk.close()
    finally:
        server.close()

    assert len(log["time"]) == 2000
    span = log["time"][-1] - log["time"][0]
    assert abs(span - 2.0) <= 0.05
    assert np.all(np.diff(log["seq"]) == 1)
    _report("logging window",
            f"2000 entries spanning {span:.3f} s up to t={final_time:.3f} s")


def test_qp_solver_500_suite():
    """Randomized QP suite against the dual oracle inside 60 seconds."""
    rng = np.random.default_rng(31415)
    t0 = time.perf_counter()
    worst_gap = 0.0
    worst_kkt = 0.0
    for k in range(500):
        n = int(rng.integers(2, 14))
        m = int(rng.integers(0, min(7, n)))
        p = random_problem(rng, n, m)
        sol = solve_qp(p)
        assert sol.status == "optimal", (k, n, m, sol.status)
        worst_kkt = max(worst_kkt, max(sol.kkt_residuals))
        if n <= 6:
            ref_obj = oracle_enumerate(p)[0]
        else:
            ref_obj, _ = oracle_al_pgd(p)
        gap = abs(sol.objective - ref_obj)
        worst_gap = max(worst_gap, gap)
        assert gap <= 1e-6 * max(1.0, abs(ref_obj)), (k, n, m, gap)
    elapsed = time.perf_counter() - t0
    assert worst_kkt <= 1e-6
    assert elapsed < 60.0
    _report("qp solver",
            f"500 problems, worst objective gap {worst_gap:.2e}, "
            f"worst KKT {worst_kkt:.2e}, {elapsed:.1f} s")


def test_mmc_end_to_end():
    """Resolved-rate servo arrives and beats the pseudoinverse baseline."""
    server = make_server(mode="lockstep")
    try:
        desk, panda = connect(server)
        panda.move_to_start()
        offset = np.eye(4)
        offset[:3, 3] = (0.3, 0.2, 0.3)
        goal = ServoGoal(Tep=fk(panda.q) @ offset)

        report = run_mmc(panda, goal, loop_hz=20.0, max_runtime=30.0)
        panda.move_to_start()
        baseline = run_mmc(panda, goal, loop_hz=20.0, max_runtime=30.0,
                           manipulability_cost=False)
        panda.close()
        desk.close()
    finally:
        server.close()

    assert report.arrived and report.iterations <= 20 * 30
    assert baseline.arrived
    assert report.final_manipulability >= baseline.final_manipulability

    # Monotone decrease whenever the twist slack is inactive, with 1%
    # headroom for steps near arrival.
    errs = np.array(report.errors)
    slack = np.array(report.slack_norms)
    active_threshold = 0.1
    bad = 0
    considered = 0
    for k in range(len(errs) - 1):
        if k < len(slack) and slack[k] >= active_threshold:
            continue
        considered += 1
        if errs[k + 1] > errs[k] + 1e-12:
            bad += 1
    assert considered > 10
    assert bad <= 0.01 * considered
    _report("mmc end-to-end",
            f"arrived in {report.iterations} iterations "
            f"({report.iterations/20.0:.2f} s sim), final manipulability "
            f"{report.final_manipulability:.4f} vs baseline "
            f"{baseline.final_manipulability:.4f}, "
            f"{bad}/{considered} non-monotone steps")


def test_protocol_conformance():
    """Golden datagram bytes and bit-identical lockstep determinism."""
    assert STATE_SIZE == 316 and COMMAND_SIZE == 72
    assert GOLDEN_STATE.pack().hex() == GOLDEN_STATE_HEX
    assert GOLDEN_COMMAND.pack().hex() == GOLDEN_COMMAND_HEX
    st = StateDatagram.unpack(bytes.fromhex(GOLDEN_STATE_HEX))
    assert st.seq == GOLDEN_STATE.seq
    assert np.array_equal(st.O_T_EE, GOLDEN_STATE.O_T_EE)

    def scripted_run():
        server = make_server(mode="lockstep")
        try:
            desk, panda = connect(server)
            panda._tcp_ok("start_torque_control")
            stream = []
            rng = np.random.default_rng(7)
            seq = panda.get_state().seq
            for _ in range(500):
                tau = 0.4 * rng.standard_normal(7)
                cmd = CommandDatagram(seq_echo=seq, mode=MODE_TORQUE, tau=tau)
                panda._udp.sendto(cmd.pack(), panda._server_addr)
                data, _ = panda._udp.recvfrom(4096)
                stream.append(data)
                seq = StateDatagram.unpack(data).seq
            panda.close()
            desk.close()
            return b"".join(stream)
        finally:
            server.close()

    s1 = scripted_run()
    s2 = scripted_run()
    assert s1 == s2
    _report("protocol conformance",
            f"golden bytes verified; two 500-step lockstep runs bit-identical "
            f"({len(s1)} bytes)")


def test_reflex_and_recovery():
    """Limit violation trips the reflex in one step; recover restores idle."""
    server = make_server(mode="lockstep")
    try:
        desk, panda = connect(server)
        panda._tcp_ok("start_torque_control")
        lim = panda.desc.limits
        target = lim.q_max[6] + 0.5
        st = panda.get_state()
        seq = st.seq
        q7 = st.q[6]
        dq7 = st.dq[6]
        tripped_step = None
        prev_inside = True
        for k in range(6000):
            tau = np.zeros(7)
            tau[6] = np.clip(6.0 * (target - q7) - 6.0 * dq7, -4.0, 4.0)
            cmd = CommandDatagram(seq_echo=seq, mode=MODE_TORQUE, tau=tau)
            panda._udp.sendto(cmd.pack(), panda._server_addr)
            data, _ = panda._udp.recvfrom(4096)
            raw = StateDatagram.unpack(data)
            seq, q7, dq7 = raw.seq, raw.q[6], raw.dq[6]
            if raw.error_flags & FLAG_JOINT_POSITION_LIMIT:
                assert prev_inside, "reflex must fire within one step of crossing"
                tripped_step = k
                break
            prev_inside = q7 <= lim.q_max[6]
        assert tripped_step is not None
        panda._pending_flags = 0

        panda.recover()
        st = panda.get_state()
        assert st.error_flags == 0
        assert server.unit.mode == "idle"

        # A fresh reflex surfaces as ControlException at the next ok().
        from pandasim.errors import ControlException
        panda._tcp_ok("trigger_reflex", flags=FLAG_JOINT_POSITION_LIMIT)
        with pytest.raises(ControlException):
            with panda.create_context(frequency=100, max_runtime=1.0) as ctx:
                while ctx.ok():
                    pass
        panda.recover()
        panda.close()
        desk.close()
    finally:
        server.close()
    _report("reflex & recovery",
            f"position reflex tripped at step {tripped_step}, recovery returned "
            f"the unit to idle, context surfaced the exception")
