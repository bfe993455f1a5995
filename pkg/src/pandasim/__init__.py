"""Control framework for a simulated 7-DOF torque-controlled arm.

Top level re-exports the scripting surface: the robot/desk/gripper handles,
forward and inverse kinematics and the start pose constant.
"""

from . import controllers, trajectory
from .client import Desk, Gripper, MotionResult, Panda, PandaContext, RobotState
from .config import (JOINT_POSITION_START, PANDA, PANDA_DYNAMICS,
                     DynamicsParams, LinkInertia, MotionLimits,
                     RobotDescription, load_robot_config)
from .kinematics import fk, ik, jacobian, manipulability, manipulability_gradient
from . import errors

__all__ = [
    "Desk", "Gripper", "Panda", "PandaContext", "RobotState", "MotionResult",
    "fk", "ik", "jacobian", "manipulability", "manipulability_gradient",
    "JOINT_POSITION_START", "PANDA", "PANDA_DYNAMICS", "RobotDescription",
    "MotionLimits", "DynamicsParams", "LinkInertia", "load_robot_config",
    "controllers", "trajectory", "errors",
]

__version__ = "0.1.0"
