"""Exception hierarchy shared by all eqsynth modules."""


class EqsynthError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(EqsynthError, ValueError):
    """Invalid dimensions, bounds or options."""


class InfeasibleConstraintError(EqsynthError):
    """The equality constraint (or KKT system) has no solution."""


class ContractError(EqsynthError):
    """A post-condition or structural identity failed to hold."""


class RateConditionError(EqsynthError):
    """Constraint spectrum lies outside the admissible interval for synthesis."""

    def __init__(self, message, diagnosis=None):
        super().__init__(message)
        self.diagnosis = diagnosis


class DivergenceError(EqsynthError):
    """Iterates became non-finite or blew up."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class InsufficientDataError(EqsynthError):
    """Not enough usable points for a rate fit."""


class UnsupportedError(EqsynthError):
    """Operation requires capabilities the input does not have."""
