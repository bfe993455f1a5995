"""Scripting bridge: NDJSON-RPC over stdio exposing the client library.

Foreign-language frontends spawn ``python -m pandasim.bridge`` and drive one
robot session through it, so scripted flows run on exactly the same native
control stack as in-process callers. Requests are single JSON lines
``{"id": n, "method": str, "params": {...}}``; replies carry ``result`` or
``error`` with the exception class name.

Method inventory (params in parentheses):
  desk_login(hostname, username, password, port) / desk_unlock / desk_lock /
  desk_activate_fci / desk_deactivate_fci / desk_status
  connect(hostname, tcp_port, udp_port) / close
  fk(q) / ik(pose[, q7, q_init]) / jacobian(q) / manipulability_jacobian(q)
  constants() -> {joint_position_start, dq_max}
  get_state / get_pose / get_position / get_orientation / get_q
  move_to_start(speed_factor) / move_to_joint_position(waypoints, speed_factor)
  move_to_pose(poses, speed_factor)
  enable_logging(buffer_size) / disable_logging / get_log / export_log_csv(path)
  start_controller(kind: cartesian_impedance|integrated_velocity|joint_impedance)
  stop_controller / set_control(...) / controller_time
  create_context(frequency[, max_runtime]) -> ctx id / context_ok(ctx)
  gripper_connect(hostname, port) / gripper_grasp(...) / gripper_move(...) /
  gripper_state
  p_servo(Te, Tep, gain, threshold) / solve_qp(Q, c, A_eq, b_eq, lb, ub)
"""

from __future__ import annotations

import json
import sys

import numpy as np

from . import controllers as ctrl_lib
from .client import Desk, Gripper, Panda
from .config import JOINT_POSITION_START, PANDA
from .kinematics import fk, ik, jacobian, manipulability_gradient
from .mmc import QPProblem, p_servo, solve_qp


class _Session:
    def __init__(self):
        self.desk = None
        self.panda = None
        self.gripper = None
        self.controller = None
        self.contexts = {}
        self.next_ctx = 1

    # -- desk -----------------------------------------------------------------

    def desk_login(self, hostname, username, password, port=7101):
        self.desk = Desk(hostname, username, password, port=port)
        return True

    def desk_unlock(self):
        return self.desk.unlock()

    def desk_lock(self):
        return self.desk.lock()

    def desk_activate_fci(self):
        return self.desk.activate_fci()

    def desk_deactivate_fci(self):
        return self.desk.deactivate_fci()

    def desk_status(self):
        return self.desk.status()

    # -- robot handle ---------------------------------------------------------

    def connect(self, hostname, tcp_port=7100, udp_port=7200):
        self.panda = Panda(hostname, tcp_port=tcp_port, udp_port=udp_port)
        return True

    def close(self):
        if self.panda is not None:
            self.panda.close()
            self.panda = None
        return True

    def fk(self, q):
        return fk(np.asarray(q, dtype=float)).tolist()

    def ik(self, pose, q7=None, q_init=None):
        q_init = None if q_init is None else np.asarray(q_init, dtype=float)
        return ik(np.asarray(pose, dtype=float), q7=q7, q_init=q_init).tolist()

    def jacobian(self, q):
        return jacobian(np.asarray(q, dtype=float)).tolist()

    def manipulability_jacobian(self, q):
        return manipulability_gradient(np.asarray(q, dtype=float)).tolist()

    def constants(self):
        return {"joint_position_start": JOINT_POSITION_START.tolist(),
                "dq_max": PANDA.limits.dq_max.tolist()}

    def get_state(self):
        s = self.panda.get_state()
        return {"seq": s.seq, "time": s.time, "q": s.q.tolist(),
                "dq": s.dq.tolist(), "tau_J": s.tau_J.tolist(),
                "O_T_EE": s.O_T_EE.tolist(), "error_flags": s.error_flags,
                "control_mode": s.control_mode}

    def get_pose(self):
        return self.panda.get_pose().tolist()

    def get_position(self):
        return self.panda.get_position().tolist()

    def get_orientation(self):
        return self.panda.get_orientation().tolist()

    def get_q(self):
        return self.panda.q.tolist()

    def move_to_start(self, speed_factor=0.2):
        r = self.panda.move_to_start(speed_factor=speed_factor)
        return {"success": r.success, "duration": r.duration,
                "final_error": r.final_error}

    def move_to_joint_position(self, waypoints, speed_factor=0.2):
        r = self.panda.move_to_joint_position(np.asarray(waypoints, dtype=float),
                                              speed_factor=speed_factor)
        return {"success": r.success, "duration": r.duration,
                "final_error": r.final_error}

    def move_to_pose(self, poses, speed_factor=0.2):
        arr = np.asarray(poses, dtype=float)
        r = self.panda.move_to_pose(arr, speed_factor=speed_factor)
        return {"success": r.success, "duration": r.duration,
                "final_error": r.final_error}

    def enable_logging(self, buffer_size):
        self.panda.enable_logging(int(buffer_size))
        return True

    def disable_logging(self):
        self.panda.disable_logging()
        return True

    def get_log(self):
        log = self.panda.get_log()
        return {k: v.tolist() for k, v in log.items()}

    def export_log_csv(self, path):
        self.panda.export_log_csv(path)
        return True

    def start_controller(self, kind):
        kinds = {"cartesian_impedance": ctrl_lib.CartesianImpedance,
                 "integrated_velocity": ctrl_lib.IntegratedVelocity,
                 "joint_impedance": ctrl_lib.JointImpedance}
        self.controller = kinds[kind]()
        self.panda.start_controller(self.controller)
        return True

    def stop_controller(self):
        self.panda.stop_controller()
        self.controller = None
        return True

    def set_control(self, position=None, orientation=None, dq=None, q=None):
        if dq is not None:
            self.controller.set_control(np.asarray(dq, dtype=float))
        elif q is not None:
            self.controller.set_control(np.asarray(q, dtype=float))
        else:
            self.controller.set_control(np.asarray(position, dtype=float),
                                        np.asarray(orientation, dtype=float))
        return True

    def controller_time(self):
        return self.controller.get_time()

    def create_context(self, frequency, max_runtime=None):
        ctx = self.panda.create_context(frequency, max_runtime)
        handle = self.next_ctx
        self.next_ctx += 1
        self.contexts[handle] = ctx
        return handle

    def context_ok(self, ctx):
        return self.contexts[ctx].ok()

    # -- gripper ---------------------------------------------------------------

    def gripper_connect(self, hostname, port=7100):
        self.gripper = Gripper(hostname, port=port)
        return True

    def gripper_grasp(self, width, speed, force, epsilon_inner=0.005,
                      epsilon_outer=0.005):
        return self.gripper.grasp(width, speed, force, epsilon_inner, epsilon_outer)

    def gripper_move(self, width, speed):
        return self.gripper.move(width, speed)

    def gripper_state(self):
        width, is_grasped = self.gripper.state()
        return {"width": width, "is_grasped": is_grasped}

    # -- numerics for the resolved-rate example ---------------------------------

    def p_servo(self, Te, Tep, gain=1.0, threshold=0.1):
        v, arrived = p_servo(np.asarray(Te, dtype=float),
                             np.asarray(Tep, dtype=float), gain, threshold)
        return {"v": v.tolist(), "arrived": bool(arrived)}

    def solve_qp(self, Q, c, A_eq, b_eq, lb, ub):
        n = len(c)
        prob = QPProblem(Q=np.asarray(Q, dtype=float),
                         c=np.asarray(c, dtype=float),
                         A_eq=np.asarray(A_eq, dtype=float).reshape(-1, n),
                         b_eq=np.asarray(b_eq, dtype=float),
                         lb=np.asarray(lb, dtype=float),
                         ub=np.asarray(ub, dtype=float))
        sol = solve_qp(prob)
        return {"x": sol.x.tolist(), "status": sol.status,
                "objective": sol.objective}


def serve(stdin=None, stdout=None):
    """Process one NDJSON request per line until EOF."""
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    session = _Session()
    for raw in stdin:
        raw = raw.strip()
        if not raw:
            continue
        rid = None
        try:
            msg = json.loads(raw)
            rid = msg.get("id")
            method = msg["method"]
            if method.startswith("_") or not hasattr(session, method):
                raise AttributeError(f"unknown method {method!r}")
            result = getattr(session, method)(**msg.get("params", {}))
            reply = {"id": rid, "result": result}
        except Exception as exc:  # propagate to the peer, never die mid-session
            reply = {"id": rid, "error": {"type": type(exc).__name__,
                                          "message": str(exc)}}
        stdout.write((json.dumps(reply, separators=(",", ":")) + "\n").encode())
        stdout.flush()
    session.close()


if __name__ == "__main__":
    serve()
