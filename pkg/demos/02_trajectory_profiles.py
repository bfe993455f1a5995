"""Jerk-limited motion profiles: single DOF, synchronization and CSV export.

Run:  python demos/02_trajectory_profiles.py
Writes profile.svg and trajectory.csv next to the script.
"""

import os

import numpy as np

from pandasim.config import PANDA
from pandasim.trajectory import (export_csv, plan_dof_profile,
                                 plan_joint_waypoints)
from svg_plot import polyline_svg

here = os.path.dirname(os.path.abspath(__file__))

# A single-DOF move saturating all three limits: the classic seven segments.
prof = plan_dof_profile(0.0, 0.0, 1.0, v_max=1.0, a_max=2.0, j_max=10.0)
print(f"unit move duration: {prof.duration:.4f} s, "
      f"peak velocity {prof.peak_velocity:.3f} rad/s")
ts = np.linspace(0, prof.duration, 400)
samples = np.array([prof.sample(t) for t in ts])
polyline_svg(os.path.join(here, "profile.svg"),
             [("position", ts, samples[:, 0], "#1f77b4"),
              ("velocity", ts, samples[:, 1], "#d62728"),
              ("acceleration", ts, samples[:, 2] / 2.0, "#2ca02c")],
             title="seven-segment profile (accel scaled by 1/2)")
print("wrote profile.svg")

# Multi-DOF: each joint planned time-optimally, then stretched to the slowest
# one so all seven finish together.
rng = np.random.default_rng(3)
lim = PANDA.limits
wps = [PANDA.neutral_q, rng.uniform(lim.q_min + 0.3, lim.q_max - 0.3)]
traj = plan_joint_waypoints(wps, lim, speed_factor=0.3)
print(f"\nsynchronized duration: {traj.total_duration:.3f} s")
for i, p in enumerate(traj.legs[0]):
    print(f"  joint {i}: displacement {p.x_end - p.x0:+.3f} rad, "
          f"duration {p.duration:.3f} s")

csv_path = os.path.join(here, "trajectory.csv")
export_csv(traj, csv_path)
print(f"wrote {os.path.basename(csv_path)} "
      f"({sum(1 for _ in open(csv_path)) - 1} samples at 1 kHz)")
