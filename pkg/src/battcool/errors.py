"""Exception hierarchy shared by every module."""


class BattcoolError(Exception):
    """Base class for all package errors."""


class ConfigError(BattcoolError, ValueError):
    pass


class DataError(BattcoolError, ValueError):
    """Malformed or out-of-range input data."""


class ParseError(DataError):
    pass


class NonuniformSampling(DataError):
    pass


class DomainError(DataError):
    pass


class OutOfEnvelope(DataError):
    """A query falls outside the validity envelope of a fitted surrogate."""


class InvalidActuation(DataError):
    """Compressor power request inside the dead band or above the ceiling."""


class InsufficientSamples(DataError):
    pass


class RankDeficient(DataError):
    pass


class EmptySampleSet(DataError):
    pass


class InfeasibilityError(BattcoolError):
    """Optimisation or simulation cannot satisfy the operating constraints."""


class PowerInfeasible(InfeasibilityError):
    pass


class InfeasibleEverywhere(InfeasibilityError):
    pass


class GridEscape(InfeasibilityError):
    pass


class StepFailure(InfeasibilityError):
    """A simulation step violated a hard constraint.

    ``kind`` is one of ``"power"``, ``"soc"``, ``"current"``, ``"grid"``.
    """

    def __init__(self, kind, time_index, message):
        super().__init__(f"step {time_index}: {kind} constraint violated: {message}")
        self.kind = kind
        self.time_index = time_index
