"""Exception types raised across the toolkit."""


class PlanarPushError(Exception):
    """Base class for all toolkit errors."""


class InvalidScenario(PlanarPushError):
    """Obstacle placement could not satisfy the scenario constraints."""


class UnknownSuite(PlanarPushError):
    """Requested scenario suite id does not exist."""


class NoValidPlacement(PlanarPushError):
    """Start/goal (or EE) rejection sampling exhausted its attempt budget."""


class NoPath(PlanarPushError):
    """Goal unreachable on the planning grid."""


class StartOccupied(PlanarPushError):
    """Plan start cell occupied (even after snapping to nearby free cells)."""


class GoalOccupied(PlanarPushError):
    """Plan goal cell occupied."""


class EmptyPath(PlanarPushError):
    """Subgoal sampling called with an empty path."""


class DegenerateContact(PlanarPushError):
    """Contact normal has zero length."""


class DegenerateGeometry(PlanarPushError):
    """EE and pushee coincide; no direction is defined."""


class MalformedEncoder(PlanarPushError):
    """Encoder weight file is inconsistent (shape/dimension mismatch)."""


class EpisodeFinished(PlanarPushError):
    """step() called after the episode terminated."""


class ResetFailed(PlanarPushError):
    """Environment reset could not build a valid episode."""


class InsufficientEntries(PlanarPushError):
    """Replay buffer holds fewer entries than the requested batch size."""


class LengthMismatch(PlanarPushError):
    """Paired inputs have different lengths."""


class EmptyInput(PlanarPushError):
    """Aggregation called with no records."""


class PolicyTimeout(PlanarPushError):
    """External protocol agent did not answer within the deadline."""


class ProtocolError(PlanarPushError):
    """Malformed or out-of-order wire protocol message."""


class IoFailure(PlanarPushError):
    """Result export could not write its files."""
