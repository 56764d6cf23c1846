"""Exception types shared across the package.

Every error carries an ``exit_code`` used by the command-line layer:
2 = configuration error, 3 = numeric/precondition error, 4 = non-convergence.
"""


class ShocklabError(Exception):
    exit_code = 3


class ConfigError(ShocklabError):
    exit_code = 2


class InvalidInputError(ShocklabError, ValueError):
    pass


class OutOfRangeError(ShocklabError, IndexError):
    pass


class InadmissibleWeightError(InvalidInputError):
    pass


class NonphysicalSolutionError(ShocklabError):
    pass


class PrecisionError(ShocklabError):
    pass


class NoBranchError(ShocklabError):
    pass


class InvalidProbeError(InvalidInputError):
    pass


class MultivaluedRegionError(ShocklabError):
    pass


class BlowUpError(ShocklabError):
    """Positivity loss during a flow; carries the time stamp where it happened."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class InstabilityError(ShocklabError):
    pass


class NoConvergenceError(ShocklabError):
    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class QuadratureFailureError(ShocklabError):
    exit_code = 4
