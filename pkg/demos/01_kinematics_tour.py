"""Tour of the kinematics layer: FK, IK, Jacobians and manipulability.

Run:  python demos/01_kinematics_tour.py
"""

import numpy as np

from pandasim import (JOINT_POSITION_START, fk, ik, jacobian, manipulability,
                      manipulability_gradient)

np.set_printoptions(precision=4, suppress=True)

# Forward kinematics at the neutral pose: a 4x4 homogeneous transform.
T = fk(JOINT_POSITION_START)
print("EE pose at the start configuration:\n", T)

# Lower the target 10 cm and solve the inverse kinematics for it. The last
# joint stays where it is; the closest branch to the seed is returned.
pose = T.copy()
pose[2, 3] -= 0.1
q = ik(pose)
print("\nIK solution for the lowered pose:", q)
print("reached position:", fk(q)[:3, 3], " target:", pose[:3, 3])

# The Jacobian maps joint rates to the EE twist (linear; angular), expressed
# in the EE frame.
J = jacobian(q)
dq = np.array([0.1, 0, 0, 0, 0, 0, 0])
print("\nEE twist for a 0.1 rad/s base-joint rate:", J @ dq)

# Manipulability is the volume measure sqrt(det(J J^T)): high in the middle
# of the workspace, zero at singularities. Its gradient points toward more
# dexterous configurations.
print("\nmanipulability at start:", manipulability(JOINT_POSITION_START))
print("manipulability near a straight elbow:",
      manipulability(np.array([0.0, 0.0, 0.0, -0.0698, 0.0, -0.0175, 0.0])))
g = manipulability_gradient(q)
print("gradient at the IK solution:", g)
step = q + 1e-2 * g / np.linalg.norm(g)
print("one small ascent step raises it:",
      manipulability(q), "->", manipulability(step))
