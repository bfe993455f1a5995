"""Cartesian vs joint-space motion between the same two poses.

Spins up an in-process lockstep simulator, runs both motions with telemetry
enabled and plots the logged xy paths: the Cartesian move is a straight
line, the joint-space move bows away from the chord.

Run:  python demos/03_path_contrast.py
Writes path_contrast.svg plus the two CSV logs next to the script.
"""

import os

import numpy as np

from pandasim import JOINT_POSITION_START, fk, ik
from pandasim.client import Desk, Panda
from pandasim.server import SimServer
from svg_plot import polyline_svg

here = os.path.dirname(os.path.abspath(__file__))

server = SimServer(tcp_port=0, desk_port=0, udp_port=0, mode="lockstep")
server.start_thread()
desk = Desk("127.0.0.1", "admin", "admin", port=server.desk_port)
desk.unlock()
desk.activate_fci()
panda = Panda("127.0.0.1", tcp_port=server.tcp_port, udp_port=server.udp_port)

T0 = fk(JOINT_POSITION_START)
T0[1, 3] = 0.25
T1 = T0.copy()
T1[1, 3] = -0.25

# Straight-line Cartesian motion, telemetry on.
panda.move_to_pose(T0)
panda.enable_logging(2000)
panda.move_to_pose(T1)
panda.disable_logging()
cart = panda.get_log()
panda.export_log_csv(os.path.join(here, "path_cartesian.csv"))

# Same waypoints through joint space.
q0 = ik(T0, q7=JOINT_POSITION_START[6], q_init=JOINT_POSITION_START)
q1 = ik(T1, q7=q0[6], q_init=q0)
panda.move_to_joint_position(q0)
panda.enable_logging(4000)
panda.move_to_joint_position(q1)
panda.disable_logging()
joint = panda.get_log()
panda.export_log_csv(os.path.join(here, "path_joint.csv"))

panda.close()
desk.close()
server.close()

pc = cart["O_T_EE"][:, :3, 3]
pj = joint["O_T_EE"][:, :3, 3]
polyline_svg(os.path.join(here, "path_contrast.svg"),
             [("move_to_pose (straight)", pc[:, 0], pc[:, 1], "#1f77b4"),
              ("move_to_joint_position (bowed)", pj[:, 0], pj[:, 1], "#d62728")],
             title="logged EE path, base-frame xy projection")

chord = lambda p: np.max(np.abs(p[:, 0] - p[0, 0]))
print(f"cartesian log: {len(cart['time'])} states, x wander "
      f"{1e3 * chord(pc):.2f} mm")
print(f"joint log:     {len(joint['time'])} states, x wander "
      f"{1e3 * chord(pj):.2f} mm")
print("wrote path_contrast.svg, path_cartesian.csv, path_joint.csv")
