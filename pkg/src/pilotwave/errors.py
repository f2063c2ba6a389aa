"""Exception hierarchy.

Every numerical failure raised by the package derives from
:class:`PilotWaveError`; the CLI maps these to exit code 2 and reports the
class name.
"""


class PilotWaveError(Exception):
    """Base class for numerical and contract failures."""


class GridError(PilotWaveError):
    pass


class GridMismatch(GridError):
    pass


class OutOfDomain(PilotWaveError):
    pass


class StabilityFailure(PilotWaveError):
    pass


class NoConvergence(PilotWaveError):
    pass


class NodeEncounter(PilotWaveError):
    pass


class RejectionStall(PilotWaveError):
    pass


class AbortFractionExceeded(PilotWaveError):
    pass


class NullSlice(PilotWaveError):
    pass


class NoBranches(PilotWaveError):
    pass


class InsufficientSeparation(PilotWaveError):
    pass


class StiffnessFailure(PilotWaveError):
    pass


class TurningPointInDomain(PilotWaveError):
    pass


class ConstraintViolation(PilotWaveError):
    pass


class InsufficientOverlap(PilotWaveError):
    pass


class ConfigError(Exception):
    """Configuration validation failure (CLI exit code 1)."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}, column {column or 1})"
        super().__init__(message + where)
