"""Simulated robot control unit served over TCP (JSON) and UDP (datagrams).

Three channels: an administrative "desk" channel (brake lock, interface
activation), a command channel (control lifecycle, gripper, recovery) and
the realtime UDP channel carrying torque commands and state telemetry.

In lockstep mode the simulation clock advances exactly one step per
received command datagram and every reply is deterministic; wall-clock
mode free-runs at the configured rate for latency work.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import selectors
import socket
import threading
import time

import numpy as np

from .config import PANDA, PANDA_DYNAMICS, load_robot_config, N_JOINTS
from .dynamics import coriolis_vector, mass_matrix
from .kinematics import fk
from .protocol import (COMMAND_SIZE, CommandDatagram, FLAG_COMMUNICATION,
                       FLAG_JOINT_POSITION_LIMIT, FLAG_JOINT_VELOCITY_LIMIT,
                       FLAG_TORQUE_LIMIT, MODE_TORQUE, StateDatagram, CSV_HEADER,
                       csv_row, dump_line, parse_line)

DT = 1e-3
BRAKE_TIME_CONSTANT = 0.05   # s; reflex braking reaches rest well inside 0.5 s
VELOCITY_REFLEX_FACTOR = 1.1
COMM_TIMEOUT_STEPS = 10

MODE_IDLE_CTRL = "idle"
MODE_TORQUE_CTRL = "torque_control"
MODE_REFLEX = "reflex_error"

GRIPPER_MAX_WIDTH = 0.08


class RobotUnit:
    """Simulation core: forward dynamics, reflex state machine, gripper."""

    def __init__(self, desc=PANDA, params=PANDA_DYNAMICS, object_width=0.03):
        self.desc = desc
        self.params = params
        self.q = desc.neutral_q.copy()
        self.dq = np.zeros(N_JOINTS)
        self.tau_cmd = np.zeros(N_JOINTS)
        self.seq = 0
        self.step_count = 0
        self.mode = MODE_IDLE_CTRL
        self.error_flags = 0
        self.gripper_width = GRIPPER_MAX_WIDTH
        self.object_width = float(object_width)
        self.is_grasped = False

    @property
    def sim_time(self):
        return self.step_count * DT

    def check_reflex(self, tau_cmd):
        """Reflex conditions for the state about to be committed."""
        lim = self.desc.limits
        flags = 0
        if np.any(self.q < lim.q_min) or np.any(self.q > lim.q_max):
            flags |= FLAG_JOINT_POSITION_LIMIT
        if np.any(np.abs(self.dq) > lim.dq_max * VELOCITY_REFLEX_FACTOR):
            flags |= FLAG_JOINT_VELOCITY_LIMIT
        if tau_cmd is not None and np.any(np.abs(tau_cmd) > lim.tau_max):
            flags |= FLAG_TORQUE_LIMIT
        return flags

    def trigger_reflex(self, flags):
        self.error_flags |= flags
        self.mode = MODE_REFLEX

    def step(self, tau_cmd):
        """Advance one control period under the commanded torque.

        Gravity is compensated inside the unit: the commanded torque acts on
        top of perfect gravity cancellation, so tau = 0 holds the arm still.
        """
        if self.mode == MODE_REFLEX:
            # Joints brake to rest; commands are ignored.
            self.dq = self.dq * math.exp(-DT / BRAKE_TIME_CONSTANT)
            self.q = self.q + self.dq * DT
        else:
            flags = self.check_reflex(tau_cmd)
            if flags & FLAG_TORQUE_LIMIT:
                self.trigger_reflex(flags)
                self.tau_cmd = np.zeros(N_JOINTS)
            else:
                tau = np.zeros(N_JOINTS) if tau_cmd is None else np.asarray(tau_cmd, dtype=float)
                self.tau_cmd = tau
                M = mass_matrix(self.q, self.params, self.desc)
                rhs = tau - coriolis_vector(self.q, self.dq, self.params, self.desc)
                ddq = np.linalg.solve(M, rhs)
                self.dq = self.dq + ddq * DT
                self.q = self.q + self.dq * DT
                flags = self.check_reflex(None)
                if flags:
                    self.trigger_reflex(flags)
        self.step_count += 1
        self.seq += 1

    def recover(self):
        if self.mode != MODE_REFLEX:
            raise ValueError("not_in_error")
        if np.max(np.abs(self.dq)) > 1e-3:
            raise ValueError("still_moving")
        lim = self.desc.limits
        self.q = np.clip(self.q, lim.q_min, lim.q_max)
        self.dq = np.zeros(N_JOINTS)
        self.error_flags = 0
        self.mode = MODE_IDLE_CTRL

    def state_datagram(self):
        return StateDatagram(
            seq=self.seq,
            sim_time_us=self.step_count * 1000,
            q=self.q.copy(),
            dq=self.dq.copy(),
            tau_J=self.tau_cmd.copy(),
            O_T_EE=fk(self.q, self.desc),
            error_flags=self.error_flags,
        )

    def gripper_move(self, width, speed):
        width = min(max(float(width), 0.0), GRIPPER_MAX_WIDTH)
        self.gripper_width = width
        self.is_grasped = False
        return True

    def gripper_grasp(self, width, speed, force, eps_inner, eps_outer):
        # Fingers close until contact; the object stops them at its width.
        measured = min(self.object_width, self.gripper_width)
        self.gripper_width = measured
        ok = (width - eps_inner) <= measured <= (width + eps_outer)
        self.is_grasped = bool(ok)
        return self.is_grasped


class SimServer:
    """Event-loop server exposing one RobotUnit over the wire protocol."""

    def __init__(self, tcp_port=7100, desk_port=7101, udp_port=7200, rate=1000.0,
                 mode="lockstep", object_width=0.03, config=None, log_csv=None,
                 host="127.0.0.1"):
        if mode not in ("lockstep", "wallclock"):
            raise ValueError("mode must be lockstep or wallclock")
        desc, params = load_robot_config(config) if config else (PANDA, PANDA_DYNAMICS)
        self.unit = RobotUnit(desc, params, object_width)
        self.mode = mode
        self.rate = float(rate)
        self.host = host
        self.desk_user = os.environ.get("SIM_DESK_USER", "admin")
        self.desk_pass = os.environ.get("SIM_DESK_PASS", "admin")
        self.brakes_locked = True
        self.fci_active = False
        self._log_path = log_csv
        self._log_fh = None

        self._cmd_listener = self._listen(tcp_port)
        self._desk_listener = self._listen(desk_port)
        self._udp = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._udp.bind((host, udp_port))
        self._udp.setblocking(False)
        self.tcp_port = self._cmd_listener.getsockname()[1]
        self.desk_port = self._desk_listener.getsockname()[1]
        self.udp_port = self._udp.getsockname()[1]

        self._rt_peer = None          # (addr, owning command connection)
        self._stop_pipe_r, self._stop_pipe_w = socket.socketpair()
        self._stop_pipe_r.setblocking(False)
        self._missed = 0
        self._last_cmd = None
        self._echo_gap_max = 0
        self._thread = None
        self._running = False

    def _listen(self, port):
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        s.bind((self.host, port))
        s.listen(8)
        s.setblocking(False)
        return s

    # -- channel handlers ----------------------------------------------------

    def _handle_desk(self, conn_state, msg):
        cmd = msg.get("cmd")
        if cmd == "login":
            if msg.get("user") == self.desk_user and msg.get("pass") == self.desk_pass:
                conn_state["auth"] = True
                return {"ok": True}
            return {"ok": False, "error": "auth_failed"}
        if not conn_state.get("auth"):
            return {"ok": False, "error": "auth_required"}
        if cmd == "unlock":
            self.brakes_locked = False
            return self._desk_status()
        if cmd == "lock":
            # Locking implies the realtime interface goes down first.
            self.brakes_locked = True
            self.fci_active = False
            return self._desk_status()
        if cmd == "activate_fci":
            if self.brakes_locked:
                return {"ok": False, "error": "invalid_transition"}
            self.fci_active = True
            return self._desk_status()
        if cmd == "deactivate_fci":
            self.fci_active = False
            return self._desk_status()
        if cmd == "status":
            return self._desk_status()
        return {"ok": False, "error": "unknown_command"}

    def _desk_status(self):
        return {"ok": True, "brakes_locked": self.brakes_locked,
                "fci_active": self.fci_active}

    def _handle_command(self, conn, conn_state, msg):
        unit = self.unit
        cmd = msg.get("cmd")
        if cmd == "connect_rt":
            if not self.fci_active:
                return {"ok": False, "error": "fci_inactive"}
            if self._rt_peer is not None:
                return {"ok": False, "error": "exclusive_lock"}
            peer_host = conn.getpeername()[0]
            addr = (peer_host, int(msg["udp_port"]))
            self._rt_peer = (addr, conn)
            self._missed = 0
            return {"ok": True, "mode": self.mode, "rate": self.rate,
                    "seq": unit.seq}
        if cmd == "start_torque_control":
            if self._rt_peer is None or self._rt_peer[1] is not conn:
                return {"ok": False, "error": "no_rt_client"}
            if unit.mode == MODE_REFLEX:
                return {"ok": False, "error": "reflex_active"}
            if unit.mode == MODE_TORQUE_CTRL:
                return {"ok": False, "error": "busy"}
            unit.mode = MODE_TORQUE_CTRL
            return {"ok": True}
        if cmd == "stop_control":
            if unit.mode == MODE_TORQUE_CTRL:
                unit.mode = MODE_IDLE_CTRL
                unit.tau_cmd = np.zeros(N_JOINTS)
            return {"ok": True}
        if cmd == "recover":
            try:
                unit.recover()
            except ValueError as exc:
                return {"ok": False, "error": str(exc)}
            return {"ok": True}
        if cmd == "gripper_move":
            ok = unit.gripper_move(msg["width"], msg.get("speed", 0.05))
            return {"ok": True, "success": ok, "width": unit.gripper_width}
        if cmd == "gripper_grasp":
            ok = unit.gripper_grasp(msg["width"], msg.get("speed", 0.05),
                                    msg.get("force", 10.0),
                                    msg.get("eps_in", 0.005),
                                    msg.get("eps_out", 0.005))
            return {"ok": True, "success": ok, "width": unit.gripper_width,
                    "is_grasped": unit.is_grasped}
        if cmd == "gripper_state":
            return {"ok": True, "width": unit.gripper_width,
                    "is_grasped": unit.is_grasped}
        if cmd == "trigger_reflex":
            # Maintenance/testing hook: force a reflex as if tripped externally.
            unit.trigger_reflex(int(msg.get("flags", FLAG_JOINT_POSITION_LIMIT)))
            return {"ok": True}
        if cmd == "status":
            return {"ok": True, "mode": unit.mode, "flags": unit.error_flags,
                    "sim_time": unit.sim_time, "seq": unit.seq,
                    "echo_gap_max": self._echo_gap_max}
        return {"ok": False, "error": "unknown_command"}

    def _drop_connection(self, sel, conn):
        sel.unregister(conn)
        if self._rt_peer is not None and self._rt_peer[1] is conn:
            self._rt_peer = None
            if self.unit.mode == MODE_TORQUE_CTRL:
                self.unit.mode = MODE_IDLE_CTRL
                self.unit.tau_cmd = np.zeros(N_JOINTS)
        conn.close()

    def _log_state(self, dgram):
        if self._log_fh is not None:
            self._log_fh.write(csv_row(dgram.sim_time_us * 1e-6, dgram.q,
                                       dgram.dq, dgram.tau_J, dgram.O_T_EE) + "\n")

    def _step_and_reply(self, tau_cmd, addr):
        self.unit.step(tau_cmd)
        dgram = self.unit.state_datagram()
        self._log_state(dgram)
        self._udp.sendto(dgram.pack(), addr)

    # -- event loop ------------------------------------------------------------

    def run(self):
        """Serve until stop(); single-threaded, deterministic in lockstep."""
        if self._log_path:
            self._log_fh = open(self._log_path, "w", encoding="utf-8")
            self._log_fh.write(CSV_HEADER + "\n")
        sel = selectors.DefaultSelector()
        sel.register(self._cmd_listener, selectors.EVENT_READ, ("accept", "cmd"))
        sel.register(self._desk_listener, selectors.EVENT_READ, ("accept", "desk"))
        sel.register(self._udp, selectors.EVENT_READ, ("udp", None))
        sel.register(self._stop_pipe_r, selectors.EVENT_READ, ("stop", None))
        self._running = True
        next_step = time.perf_counter() + 1.0 / self.rate
        try:
            while self._running:
                if self.mode == "wallclock":
                    timeout = max(0.0, next_step - time.perf_counter())
                else:
                    timeout = None
                events = sel.select(timeout)
                for key, _ in events:
                    kind, channel = key.data[0], key.data[1]
                    if kind == "stop":
                        self._running = False
                        break
                    if kind == "accept":
                        conn, _ = key.fileobj.accept()
                        conn.setblocking(False)
                        sel.register(conn, selectors.EVENT_READ,
                                     ("conn", channel, {"buf": b"", "auth": False}))
                        continue
                    if kind == "udp":
                        try:
                            data, addr = self._udp.recvfrom(4096)
                        except BlockingIOError:
                            continue
                        if self._rt_peer is None or addr != self._rt_peer[0]:
                            continue
                        if len(data) != COMMAND_SIZE:
                            continue
                        cmd = CommandDatagram.unpack(data)
                        gap = abs(self.unit.seq - cmd.seq_echo)
                        if gap > self._echo_gap_max:
                            self._echo_gap_max = gap
                        tau = cmd.tau if (cmd.mode == MODE_TORQUE
                                          and self.unit.mode == MODE_TORQUE_CTRL) else None
                        if self.mode == "lockstep":
                            self._step_and_reply(tau, addr)
                        else:
                            self._last_cmd = tau
                            self._missed = 0
                        continue
                    if kind == "conn":
                        _, channel, st = key.data
                        try:
                            chunk = key.fileobj.recv(65536)
                        except (BlockingIOError, InterruptedError):
                            continue
                        except ConnectionResetError:
                            chunk = b""
                        if not chunk:
                            self._drop_connection(sel, key.fileobj)
                            continue
                        st["buf"] += chunk
                        while b"\n" in st["buf"]:
                            line, st["buf"] = st["buf"].split(b"\n", 1)
                            if not line.strip():
                                continue
                            try:
                                msg = parse_line(line)
                            except json.JSONDecodeError:
                                reply = {"ok": False, "error": "bad_json"}
                            else:
                                if channel == "desk":
                                    reply = self._handle_desk(st, msg)
                                else:
                                    reply = self._handle_command(key.fileobj, st, msg)
                            try:
                                key.fileobj.sendall(dump_line(reply))
                            except OSError:
                                self._drop_connection(sel, key.fileobj)
                                break
                if self.mode == "wallclock" and self._running:
                    now = time.perf_counter()
                    while now >= next_step:
                        if self._rt_peer is not None:
                            if self.unit.mode == MODE_TORQUE_CTRL and self._last_cmd is None:
                                self._missed += 1
                                if self._missed > COMM_TIMEOUT_STEPS:
                                    self.unit.trigger_reflex(FLAG_COMMUNICATION)
                            self._step_and_reply(self._last_cmd, self._rt_peer[0])
                            self._last_cmd = None
                        next_step += 1.0 / self.rate
                        now = time.perf_counter()
        finally:
            self._running = False
            sel.close()
            if self._log_fh is not None:
                self._log_fh.close()
                self._log_fh = None

    def start_thread(self):
        self._thread = threading.Thread(target=self.run, daemon=True)
        self._thread.start()
        return self._thread

    def stop(self):
        self._running = False
        try:
            self._stop_pipe_w.send(b"x")
        except OSError:
            pass
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def close(self):
        self.stop()
        for s in (self._cmd_listener, self._desk_listener, self._udp,
                  self._stop_pipe_r, self._stop_pipe_w):
            try:
                s.close()
            except OSError:
                pass


def main(argv=None):
    parser = argparse.ArgumentParser(prog="simserver",
                                     description="Simulated robot control unit")
    parser.add_argument("--tcp-port", type=int, default=7100)
    parser.add_argument("--desk-port", type=int, default=7101)
    parser.add_argument("--udp-port", type=int, default=7200)
    parser.add_argument("--rate", type=float, default=1000.0)
    parser.add_argument("--mode", choices=("lockstep", "wallclock"), default="lockstep")
    parser.add_argument("--object-width", type=float, default=0.03)
    parser.add_argument("--config", default=None)
    parser.add_argument("--log-csv", default=None)
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)
    try:
        server = SimServer(tcp_port=args.tcp_port, desk_port=args.desk_port,
                           udp_port=args.udp_port, rate=args.rate, mode=args.mode,
                           object_width=args.object_width, config=args.config,
                           log_csv=args.log_csv, host=args.host)
    except OSError as exc:
        raise SystemExit(f"simserver: cannot bind sockets: {exc}")
    print(json.dumps({"ready": True, "tcp_port": server.tcp_port,
                      "desk_port": server.desk_port, "udp_port": server.udp_port,
                      "mode": server.mode}), flush=True)
    try:
        server.run()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()


if __name__ == "__main__":
    main()
