"""Exception hierarchy.

Every error raised on purpose by the package derives from ``UavTopoError`` and
carries an ``exit_code`` used by the command line front end.
"""


class UavTopoError(Exception):
    exit_code = 1


class ConfigError(UavTopoError, ValueError):
    """Invalid parameters, malformed config files, violated preconditions."""

    exit_code = 2


class DomainError(ConfigError):
    """Input outside the mathematical domain of an operation (NaN, zero distance)."""


class InfeasibleError(ConfigError):
    """No candidate satisfies the constraints (e.g. every UAV subset is over budget)."""


class NumericalError(UavTopoError, ArithmeticError):
    exit_code = 3


class OutOfRangeError(NumericalError):
    """A root or optimum lies outside the admissible search bracket."""


class IterationLimitError(NumericalError):
    """A fixed-point iteration hit its cap. ``trace`` holds the iterates."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class ArtifactIOError(UavTopoError, OSError):
    exit_code = 4
