"""Exception hierarchy shared by all modules."""


class MicrodispatchError(Exception):
    """Base class for every error raised by the package."""


class ParseError(MicrodispatchError):
    pass


class ValidationError(MicrodispatchError):
    """An invariant of the case description is violated.

    ``path`` names the offending field, e.g. ``buses[3].id``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class TopologyError(MicrodispatchError):
    pass


class UnknownBranch(MicrodispatchError, KeyError):
    pass


class OutOfRange(MicrodispatchError, ValueError):
    pass


class SimultaneousChargeDischarge(MicrodispatchError, ValueError):
    pass


class RateLimit(MicrodispatchError, ValueError):
    pass


class OutOfSupport(MicrodispatchError, ValueError):
    pass


class InfeasibleMoments(MicrodispatchError, ValueError):
    pass


class BadLevelCount(MicrodispatchError, ValueError):
    pass


class MissingProfile(MicrodispatchError):
    pass


class BadTarget(MicrodispatchError, ValueError):
    pass


class HorizonMismatch(MicrodispatchError, ValueError):
    pass


class NonConvergence(MicrodispatchError):
    pass


class VoltageCollapse(MicrodispatchError):
    pass


class NotConverged(MicrodispatchError):
    pass


class DimensionMismatch(MicrodispatchError, ValueError):
    pass


class EmissionOverflow(MicrodispatchError, OverflowError):
    pass


class DegeneratePopulation(MicrodispatchError):
    pass
