"""User-facing robot handle: connection, motions, controllers, logging.

One handle owns the realtime UDP channel plus a TCP command channel. In
lockstep mode (the default for simulation work) there is no background
thread: every client step sends one command datagram and waits for the
matching state datagram, which makes closed-loop runs bit-reproducible.
Wall-clock mode runs the control loop on a background thread at the
server's rate.
"""

from __future__ import annotations

import math
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .config import PANDA, PANDA_DYNAMICS, N_JOINTS
from .controllers import (DEFAULT_WALL, ImpedanceGains, _TrajectoryTracker,
                          saturate_torque_rate)
from .errors import (AuthFailed, BusyError, ControlException, Disconnected,
                     ExclusiveLock, FciInactive, InvalidTransition, NotInError,
                     NotRunning, PandaError, StillMoving)
from .kinematics import fk
from .protocol import (CSV_HEADER, CommandDatagram, FLAG_COMMUNICATION,
                       MODE_IDLE, MODE_TORQUE, STATE_SIZE, StateDatagram,
                       csv_row, dump_line, flags_to_names, parse_line)
from .trajectory import plan_cartesian_waypoints, plan_joint_waypoints
from .transforms import quat_from_matrix, validate_pose

DT = 1e-3
RAMP_DOWN_STEPS = 100
SETTLE_STEPS = 500
_RPC_TIMEOUT = 10.0
_RT_TIMEOUT = 5.0


@dataclass(frozen=True)
class RobotState:
    """Controller-side state snapshot, the unit of logging and telemetry."""

    seq: int
    time: float
    q: np.ndarray
    dq: np.ndarray
    tau_J: np.ndarray
    O_T_EE: np.ndarray
    error_flags: int
    control_mode: str


@dataclass(frozen=True)
class MotionResult:
    success: bool
    duration: float
    final_error: float
    allowed_path_deviation: float


class _RampDown:
    """Internal stand-in controller fading the last torque to zero."""

    def __init__(self, tau0, steps=RAMP_DOWN_STEPS):
        self._tau0 = tau0
        self._steps = steps
        self._k = 0

    def on_step_time(self, t):
        pass

    def step(self, state, dt):
        self._k = min(self._k + 1, self._steps)
        return self._tau0 * (1.0 - self._k / self._steps)


class _JsonChannel:
    """Blocking NDJSON request/response over one TCP connection."""

    def __init__(self, hostname, port):
        try:
            self._sock = socket.create_connection((hostname, port), timeout=_RPC_TIMEOUT)
        except OSError as exc:
            raise ConnectionRefusedError(f"cannot reach {hostname}:{port}: {exc}") from exc
        self._sock.settimeout(_RPC_TIMEOUT)
        self._buf = b""

    def request(self, obj):
        try:
            self._sock.sendall(dump_line(obj))
            while b"\n" not in self._buf:
                chunk = self._sock.recv(65536)
                if not chunk:
                    raise Disconnected("command channel closed by server")
                self._buf += chunk
        except socket.timeout as exc:
            raise Disconnected("command channel timed out") from exc
        except OSError as exc:
            raise Disconnected(f"command channel error: {exc}") from exc
        line, self._buf = self._buf.split(b"\n", 1)
        return parse_line(line)

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass


class Desk:
    """Administrative session: brake lock/unlock and interface activation."""

    def __init__(self, hostname, username, password, port=7101):
        self._chan = _JsonChannel(hostname, port)
        reply = self._chan.request({"cmd": "login", "user": username, "pass": password})
        if not reply.get("ok"):
            self._chan.close()
            raise AuthFailed("desk rejected the credentials")
        self.hostname = hostname
        self.username = username

    def _do(self, cmd):
        reply = self._chan.request({"cmd": cmd})
        if not reply.get("ok"):
            err = reply.get("error", "unknown")
            if err == "invalid_transition":
                raise InvalidTransition(f"{cmd} not allowed in the current state")
            raise PandaError(f"desk {cmd} failed: {err}")
        return reply

    def unlock(self):
        return self._do("unlock")

    def lock(self):
        return self._do("lock")

    def activate_fci(self):
        return self._do("activate_fci")

    def deactivate_fci(self):
        return self._do("deactivate_fci")

    def status(self):
        return self._do("status")

    def close(self):
        self._chan.close()


class Gripper:
    """Gripper handle on its own command connection (not realtime)."""

    def __init__(self, hostname, port=7100):
        self._chan = _JsonChannel(hostname, port)
        self._busy = threading.Lock()

    def grasp(self, width, speed, force, epsilon_inner=0.005, epsilon_outer=0.005):
        """Close until contact; True iff the grasped width falls in the window."""
        with self._busy:
            reply = self._chan.request({"cmd": "gripper_grasp", "width": width,
                                        "speed": speed, "force": force,
                                        "eps_in": epsilon_inner,
                                        "eps_out": epsilon_outer})
        return bool(reply.get("success"))

    def move(self, width, speed):
        """Travel to the given width, blocking; True on completion."""
        with self._busy:
            reply = self._chan.request({"cmd": "gripper_move", "width": width,
                                        "speed": speed})
        return bool(reply.get("success"))

    def state(self):
        reply = self._chan.request({"cmd": "gripper_state"})
        return float(reply["width"]), bool(reply["is_grasped"])

    def close(self):
        self._chan.close()


class PandaContext:
    """Fixed-frequency loop helper; ok() paces the loop and surfaces errors."""

    def __init__(self, panda, frequency, max_runtime=None):
        if frequency <= 0:
            raise ValueError("frequency must be positive")
        self._panda = panda
        self.frequency = float(frequency)
        self.max_runtime = max_runtime
        self.period = 1.0 / float(frequency)
        if panda._lockstep:
            steps = 1000.0 / float(frequency)
            if abs(steps - round(steps)) > 1e-6 or round(steps) < 1:
                raise ValueError("frequency must divide 1 kHz in lockstep mode")
            self._steps_per_tick = int(round(steps))
        self._iters = 0
        self._wall_start = None

    @property
    def iterations(self):
        return self._iters

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        return False

    def ok(self):
        """Throttle the loop; False once max_runtime has elapsed.

        Re-raises any control exception pending from the control loop.
        """
        self._panda._raise_pending()
        n = self._iters + 1
        if self.max_runtime is not None and n * self.period > self.max_runtime + 1e-12:
            return False
        if self._panda._lockstep:
            self._panda._advance(self._steps_per_tick)
        else:
            if self._wall_start is None:
                self._wall_start = time.monotonic()
            deadline = self._wall_start + n * self.period
            delay = deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        self._panda._raise_pending()
        self._iters = n
        return True


class Panda:
    """Robot handle speaking the wire protocol of the simulated control unit."""

    def __init__(self, hostname, tcp_port=7100, udp_port=7200,
                 desc=PANDA, params=PANDA_DYNAMICS):
        self.desc = desc
        self.params = params
        self._chan = _JsonChannel(hostname, tcp_port)
        self._udp = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._udp.bind((self._chan._sock.getsockname()[0], 0))
        self._udp.settimeout(_RT_TIMEOUT)
        self._server_addr = (hostname, udp_port)

        reply = self._chan.request({"cmd": "connect_rt",
                                    "udp_port": self._udp.getsockname()[1]})
        if not reply.get("ok"):
            err = reply.get("error")
            self._chan.close()
            self._udp.close()
            if err == "fci_inactive":
                raise FciInactive("realtime interface inactive: unlock brakes and activate it")
            if err == "exclusive_lock":
                raise ExclusiveLock("another client owns the realtime channel")
            raise PandaError(f"connect failed: {err}")
        self._lockstep = reply["mode"] == "lockstep"
        self.rate = float(reply["rate"])
        self._seq = int(reply.get("seq", 0))

        self._latest = None
        self._latest_wall = None
        self._history = deque(maxlen=100)
        self._log = None
        self._logging = False
        self._controller = None
        self._motion_active = False
        self._pending_flags = 0
        self._tau_prev = np.zeros(N_JOINTS)
        self._torque_stream = None        # optional tap for tests
        self._closed = False

        if self._lockstep:
            self._step_once(None)
        else:
            self._stop_evt = threading.Event()
            self._thread = threading.Thread(target=self._rt_loop, daemon=True)
            self._thread.start()
            deadline = time.monotonic() + 2.0
            while self._latest is None and time.monotonic() < deadline:
                time.sleep(0.001)
            if self._latest is None:
                self.close()
                raise Disconnected("no state received from the server")

    # -- state plumbing ------------------------------------------------------

    def _on_state(self, dgram):
        mode = "torque" if self._controller or self._motion_active else "idle"
        state = RobotState(seq=dgram.seq, time=dgram.sim_time_us * 1e-6,
                           q=dgram.q, dq=dgram.dq, tau_J=dgram.tau_J,
                           O_T_EE=dgram.O_T_EE, error_flags=dgram.error_flags,
                           control_mode=mode)
        self._latest = state
        self._latest_wall = time.monotonic()
        self._history.append(state)
        if self._logging and self._log is not None:
            self._log.append(state)
        if dgram.error_flags:
            self._pending_flags |= dgram.error_flags
        ctrl = self._controller
        if ctrl is not None:
            ctrl.on_step_time(state.time)
        return state

    def _raise_pending(self):
        if self._pending_flags:
            flags = self._pending_flags
            self._pending_flags = 0
            names = ",".join(flags_to_names(flags)) or hex(flags)
            raise ControlException(f"reflex: {names}", flags, list(self._history))

    def _step_once(self, tau):
        """Send one command datagram and block for the state reply (lockstep)."""
        mode = MODE_TORQUE if tau is not None else MODE_IDLE
        dgram = CommandDatagram(seq_echo=self._seq, mode=mode,
                                tau=tau if tau is not None else np.zeros(N_JOINTS))
        try:
            self._udp.sendto(dgram.pack(), self._server_addr)
            data, _ = self._udp.recvfrom(4096)
        except socket.timeout:
            self._pending_flags |= FLAG_COMMUNICATION
            raise ControlException("communication: no state datagram received",
                                   FLAG_COMMUNICATION, list(self._history))
        except OSError as exc:
            raise Disconnected(f"realtime channel error: {exc}") from exc
        if len(data) != STATE_SIZE:
            raise Disconnected("malformed state datagram")
        st = StateDatagram.unpack(data)
        self._seq = st.seq
        return self._on_state(st)

    def _advance(self, steps):
        """Drive the 1 kHz loop forward (lockstep mode only)."""
        for _ in range(steps):
            if self._pending_flags:
                return
            ctrl = self._controller
            if ctrl is not None:
                tau_raw = ctrl.step(self._latest, DT)
                tau = saturate_torque_rate(tau_raw, self._tau_prev,
                                           self.desc.limits.tau_max)
                self._tau_prev = tau
                if self._torque_stream is not None:
                    self._torque_stream.append(tau.copy())
                self._step_once(tau)
            else:
                self._step_once(None)

    def _rt_loop(self):
        """Background loop for wall-clock mode: the server paces the steps."""
        while not self._stop_evt.is_set():
            try:
                data, _ = self._udp.recvfrom(4096)
            except socket.timeout:
                self._pending_flags |= FLAG_COMMUNICATION
                continue
            except OSError:
                return
            if len(data) != STATE_SIZE:
                continue
            st = StateDatagram.unpack(data)
            self._seq = st.seq
            self._on_state(st)
            ctrl = self._controller
            if ctrl is not None and not self._pending_flags:
                tau_raw = ctrl.step(self._latest, 1.0 / self.rate)
                tau = saturate_torque_rate(tau_raw, self._tau_prev,
                                           self.desc.limits.tau_max)
                self._tau_prev = tau
                cmd = CommandDatagram(self._seq, MODE_TORQUE, tau)
            else:
                cmd = CommandDatagram(self._seq, MODE_IDLE, np.zeros(N_JOINTS))
            try:
                self._udp.sendto(cmd.pack(), self._server_addr)
            except OSError:
                return

    # -- state access ----------------------------------------------------------

    @property
    def q(self):
        return self.get_state().q

    def get_state(self):
        if self._closed or self._latest is None:
            raise Disconnected("not connected")
        return self._latest

    def get_pose(self):
        """Current base-to-EE transform as a 4x4 matrix (copy)."""
        return self.get_state().O_T_EE.copy()

    def get_position(self):
        return self.get_state().O_T_EE[:3, 3].copy()

    def get_orientation(self):
        """EE orientation as a unit quaternion, scalar last (x, y, z, w)."""
        return quat_from_matrix(self.get_state().O_T_EE[:3, :3])

    def state_age(self):
        """Wall-clock seconds since the last state arrived."""
        if self._latest_wall is None:
            return math.inf
        return time.monotonic() - self._latest_wall

    # -- logging -----------------------------------------------------------------

    def enable_logging(self, buffer_size):
        """Start logging every received state into a fresh circular buffer."""
        n = int(buffer_size)
        if n <= 0:
            raise ValueError("buffer size must be positive")
        self._log = deque(maxlen=n)
        self._logging = True

    def disable_logging(self):
        self._logging = False

    def get_log(self):
        """Column-oriented snapshot of the log buffer (copies, never views)."""
        states = list(self._log) if self._log is not None else []
        n = len(states)
        return {
            "time": np.array([s.time for s in states]),
            "seq": np.array([s.seq for s in states], dtype=np.int64),
            "q": np.array([s.q for s in states]).reshape(n, N_JOINTS),
            "dq": np.array([s.dq for s in states]).reshape(n, N_JOINTS),
            "tau_J": np.array([s.tau_J for s in states]).reshape(n, N_JOINTS),
            "O_T_EE": np.array([s.O_T_EE for s in states]).reshape(n, 4, 4),
            "error_flags": np.array([s.error_flags for s in states], dtype=np.int64),
        }

    def export_log_csv(self, path):
        """Write the log buffer using the stable documented column order."""
        states = list(self._log) if self._log is not None else []
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")
            for s in states:
                fh.write(csv_row(s.time, s.q, s.dq, s.tau_J, s.O_T_EE) + "\n")

    # -- control lifecycle ---------------------------------------------------------

    def _require_idle(self):
        if self._controller is not None or self._motion_active:
            raise BusyError("a motion or controller is already active")

    _ERROR_TYPES = {
        "auth_failed": AuthFailed,
        "invalid_transition": InvalidTransition,
        "fci_inactive": FciInactive,
        "exclusive_lock": ExclusiveLock,
        "busy": BusyError,
        "not_in_error": NotInError,
        "still_moving": StillMoving,
    }

    def _tcp_ok(self, cmd, **kw):
        reply = self._chan.request({"cmd": cmd, **kw})
        if not reply.get("ok"):
            code = reply.get("error")
            exc = self._ERROR_TYPES.get(code, PandaError)
            raise exc(f"{cmd} failed: {code}")
        return reply

    def start_controller(self, ctrl):
        """Run a controller at 1 kHz against the state stream."""
        self._require_idle()
        self._raise_pending()
        self._tcp_ok("start_torque_control")
        ctrl.on_start(self.get_state(), self.desc, self.params)
        self._tau_prev = np.zeros(N_JOINTS)
        self._controller = ctrl

    def stop_controller(self):
        """Ramp torques down over 100 ms and return the robot to idle."""
        if self._controller is None:
            raise NotRunning("no controller running")
        if self._lockstep:
            self._controller = None
            tau0 = self._tau_prev.copy()
            for k in range(1, RAMP_DOWN_STEPS + 1):
                scale = 1.0 - k / RAMP_DOWN_STEPS
                tau = saturate_torque_rate(tau0 * scale, self._tau_prev,
                                           self.desc.limits.tau_max)
                self._tau_prev = tau
                self._step_once(tau)
        else:
            # The background loop keeps running; hand it a fading controller.
            self._controller = _RampDown(self._tau_prev.copy())
            time.sleep(1.5 * RAMP_DOWN_STEPS / self.rate)
            self._controller = None
        self._tau_prev = np.zeros(N_JOINTS)
        self._tcp_ok("stop_control")
        self._raise_pending()

    def create_context(self, frequency, max_runtime=None):
        return PandaContext(self, frequency, max_runtime)

    def recover(self):
        """Clear a reflex error after the joints have come to rest."""
        if self._lockstep:
            # Let the braking play out so the recover precondition holds.
            for _ in range(600):
                st = self._step_once(None)
                if np.max(np.abs(st.dq)) < 1e-4:
                    break
        self._tcp_ok("recover")
        self._pending_flags = 0
        if self._lockstep:
            self._step_once(None)

    # -- motions -----------------------------------------------------------------

    def _track(self, traj, gains, goal_q=None, goal_pose=None,
               allowed_path_deviation=0.0):
        self._require_idle()
        self._raise_pending()
        tracker = _TrajectoryTracker(traj, gains, self.desc)
        self._tcp_ok("start_torque_control")
        self._motion_active = True
        self._controller = tracker
        tracker.on_start(self.get_state(), self.desc, self.params)
        self._tau_prev = np.zeros(N_JOINTS)
        try:
            steps = int(math.ceil(traj.total_duration / DT))
            if self._lockstep:
                self._advance(steps)
                goal = goal_q if goal_q is not None else tracker.reference(traj.total_duration)[0]
                for _ in range(SETTLE_STEPS):
                    st = self._latest
                    if (np.max(np.abs(st.q - goal)) < 1e-3
                            and np.max(np.abs(st.dq)) < 5e-3):
                        break
                    self._advance(1)
                    if self._pending_flags:
                        break
            else:
                deadline = time.monotonic() + traj.total_duration + SETTLE_STEPS / self.rate
                while time.monotonic() < deadline and not self._pending_flags:
                    time.sleep(0.005)
            self._raise_pending()
        except ControlException:
            self._controller = None
            self._motion_active = False
            self._tau_prev = np.zeros(N_JOINTS)
            try:
                self._tcp_ok("stop_control")
            except PandaError:
                pass
            raise
        else:
            self._motion_active = False
            self.stop_controller()
        final = self.get_state()
        if goal_pose is not None:
            err = float(np.linalg.norm(final.O_T_EE[:3, 3] - goal_pose[:3, 3]))
            success = err < 1e-3
        elif goal_q is not None:
            err = float(np.max(np.abs(final.q - goal_q)))
            success = err < 1e-3
        else:
            err = 0.0
            success = True
        return MotionResult(success=success, duration=traj.total_duration,
                            final_error=err,
                            allowed_path_deviation=allowed_path_deviation)

    def move_to_start(self, speed_factor=0.2, gains=None):
        """Single call returning the arm to its neutral configuration."""
        goal = self.desc.neutral_q.copy()
        traj = plan_joint_waypoints([self.get_state().q, goal],
                                    self.desc.limits, speed_factor)
        return self._track(traj, gains, goal_q=goal)

    def move_to_joint_position(self, waypoints, speed_factor=0.2, gains=None,
                               allowed_path_deviation=0.0):
        """Joint-space motion through one or more 7-vector waypoints."""
        wps = np.asarray(waypoints, dtype=float)
        if wps.ndim == 1:
            wps = wps[None, :]
        pts = [self.get_state().q] + [w for w in wps]
        traj = plan_joint_waypoints(pts, self.desc.limits, speed_factor)
        return self._track(traj, gains, goal_q=pts[-1],
                           allowed_path_deviation=allowed_path_deviation)

    def move_to_pose(self, poses, speed_factor=0.2, gains=None,
                     allowed_path_deviation=0.0):
        """Cartesian motion: straight-line path to one or more poses."""
        if isinstance(poses, np.ndarray) and poses.ndim == 2:
            pose_list = [poses]
        else:
            pose_list = list(poses)
        pose_list = [validate_pose(p) for p in pose_list]
        start = self.get_pose()
        traj = plan_cartesian_waypoints([start] + pose_list, self.desc.limits,
                                        speed_factor)
        return self._track(traj, gains, goal_pose=pose_list[-1],
                           allowed_path_deviation=allowed_path_deviation)

    # -- shutdown -------------------------------------------------------------------

    def close(self):
        if self._closed:
            return
        self._closed = True
        if not self._lockstep:
            self._stop_evt.set()
        try:
            self._udp.close()
        except OSError:
            pass
        self._chan.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False
