"""Asynchronous Cartesian impedance control: a sinusoidal setpoint at 1 kHz.

The controller holds the start pose; the user loop overwrites the setpoint
every millisecond with a slow sine on the y axis. Run time is one period.

Run:  python demos/04_sinusoid_controller.py
"""

import math
import os

import numpy as np

from pandasim import controllers
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
panda.move_to_start()

ctrl = controllers.CartesianImpedance()
x0 = panda.get_position()
q0 = panda.get_orientation()
panda.start_controller(ctrl)

ts, y_meas, y_cmd = [], [], []
with panda.create_context(frequency=1e3, max_runtime=2 * math.pi) as ctx:
    while ctx.ok():
        x_d = x0.copy()
        x_d[1] += 0.1 * math.sin(ctrl.get_time())
        ctrl.set_control(x_d, q0)
        ts.append(ctrl.get_time())
        y_meas.append(panda.get_position()[1])
        y_cmd.append(x_d[1])
panda.stop_controller()
panda.close()
desk.close()
server.close()

y_meas = np.array(y_meas)
y_cmd = np.array(y_cmd)
rms = np.sqrt(np.mean((y_meas - y_cmd) ** 2))
print(f"{len(ts)} control periods, y amplitude "
      f"{(y_meas.max() - y_meas.min()) / 2:.4f} m, RMS tracking error "
      f"{1e3 * rms:.2f} mm")
polyline_svg(os.path.join(here, "sinusoid.svg"),
             [("commanded y", ts, y_cmd, "#888888"),
              ("measured y", ts, y_meas, "#1f77b4")],
             title="cartesian impedance tracking a sinusoidal setpoint")
print("wrote sinusoid.svg")
