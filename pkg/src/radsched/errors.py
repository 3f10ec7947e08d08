"""Exception taxonomy shared across the package."""


class RadschedError(Exception):
    """Base class for package errors."""


class InstanceError(RadschedError):
    """An instance document or domain object is inconsistent."""


class KernelError(RadschedError):
    """The LP/IP engine failed numerically or was misused."""


class InfeasibleColumnError(RadschedError):
    """A schedule column violates the placement rules."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)


class HeuristicError(RadschedError):
    """The constructive heuristic could not place a patient."""


class DocumentError(RadschedError):
    """A serialized document is malformed or of an unknown schema version."""


class SimulationError(RadschedError):
    """The rolling-horizon simulation had to abort; carries the failing day."""

    def __init__(self, message: str, day: int | None = None):
        super().__init__(message)
        self.day = day
