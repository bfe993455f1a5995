"""Exception taxonomy shared across the library."""


class PandaError(Exception):
    """Base class for all library errors."""


# -- kinematics / planning -------------------------------------------------

class Unreachable(PandaError):
    """Target pose lies outside the workspace or no branch fits the limits."""


class NearSingular(PandaError):
    """Operation is unreliable this close to a kinematic singularity."""


class InfeasibleStart(PandaError):
    """Initial velocity violates the velocity limit of the profile."""


class WaypointOutOfLimits(PandaError):
    """A waypoint lies outside the joint position limits."""


class DegenerateRotation(PandaError):
    """Consecutive orientations are antipodal; the geodesic is ambiguous."""


class OutOfRange(PandaError):
    """Sample time outside the trajectory domain."""


# -- client / protocol ------------------------------------------------------

class AuthFailed(PandaError):
    """Desk rejected the credentials."""


class InvalidTransition(PandaError):
    """Desk operation not allowed in the current lock/interface state."""


class FciInactive(PandaError):
    """Realtime interface is not active (brakes locked or not enabled)."""


class ExclusiveLock(PandaError):
    """Another client already owns the realtime channel."""


class BusyError(PandaError):
    """A motion or controller is already active on this handle."""


class NotRunning(PandaError):
    """No controller is running."""


class Disconnected(PandaError):
    """Connection to the control unit was lost."""


class InvalidCommand(PandaError):
    """Malformed controller command (e.g. non-unit quaternion)."""


class GripperBusy(PandaError):
    """Gripper is executing another command."""


class NotInError(PandaError):
    """recover() called while not in the reflex error state."""


class StillMoving(PandaError):
    """recover() called before the joints came to rest."""


class NoConvergence(PandaError):
    """Servo loop hit its runtime limit before arriving."""


class EmptyLog(PandaError):
    """Log buffer holds no states."""


class ControlException(PandaError):
    """Reflex or communication error surfaced from the control loop.

    Carries the reflex bitset and a short history of the most recent
    robot states for diagnosis.
    """

    def __init__(self, message, error_flags=0, recent_states=None):
        super().__init__(message)
        self.error_flags = error_flags
        self.recent_states = list(recent_states or [])
