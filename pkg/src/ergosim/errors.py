"""Exception types raised by the toolkit."""


class ErgosimError(ValueError):
    """Base class for all toolkit errors."""


class ZeroMass(ErgosimError):
    pass


class MapDomain(ErgosimError):
    pass


class NullConditioning(ErgosimError):
    pass


class SpaceMismatch(ErgosimError):
    pass


class BadSupport(ErgosimError):
    pass


class NegativeTime(ErgosimError):
    pass


class DomainError(ErgosimError):
    pass


class StepTooLarge(ErgosimError):
    pass


class EmptyCandidates(ErgosimError):
    pass


class EmptyBall(ErgosimError):
    pass


class Unassigned(ErgosimError):
    pass
