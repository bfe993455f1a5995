"""Resolved-rate servo with manipulability maximization.

Each 20 Hz cycle solves a small QP: joint velocities realize the commanded
EE twist (softened by a slack) while a linear cost pushes along the
manipulability gradient. Velocities feed the IntegratedVelocity controller.
Compare against the same servo without the manipulability term.

Run:  python demos/05_resolved_rate.py
"""

import numpy as np

from pandasim import fk
from pandasim.client import Desk, Panda
from pandasim.mmc import ServoGoal, run_mmc
from pandasim.server import SimServer

server = SimServer(tcp_port=0, desk_port=0, udp_port=0, mode="lockstep")
server.start_thread()
desk = Desk("127.0.0.1", "admin", "admin", port=server.desk_port)
desk.unlock()
desk.activate_fci()
panda = Panda("127.0.0.1", tcp_port=server.tcp_port, udp_port=server.udp_port)

panda.move_to_start()
offset = np.eye(4)
offset[:3, 3] = (0.3, 0.2, 0.3)
goal = ServoGoal(Tep=fk(panda.q) @ offset)

report = run_mmc(panda, goal, loop_hz=20.0)
print(f"with manipulability cost: arrived in {report.iterations} cycles "
      f"({report.iterations / 20:.2f} s sim), final manipulability "
      f"{report.final_manipulability:.4f}")

panda.move_to_start()
baseline = run_mmc(panda, goal, loop_hz=20.0, manipulability_cost=False)
print(f"pseudoinverse baseline:   arrived in {baseline.iterations} cycles, "
      f"final manipulability {baseline.final_manipulability:.4f}")

panda.close()
desk.close()
server.close()
