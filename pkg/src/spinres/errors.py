"""Exception hierarchy.

The CLI maps the three top-level categories onto exit codes
(config=2, data=3, numeric=4), so every error raised by the library
derives from exactly one of them.
"""


class SpinresError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(SpinresError, ValueError):
    """Invalid parameters, geometry/cell mismatches, unknown mode names."""

    exit_code = 2


class SizingError(ConfigError):
    """Array or split sizes inconsistent with the requested operation."""


class DataError(SpinresError):
    """Malformed input files or unusable dataset windows."""

    exit_code = 3


class NumericalError(SpinresError, ArithmeticError):
    """Non-finite values or ill-posed linear algebra."""

    exit_code = 4


class BlowupError(NumericalError):
    """Integrator produced non-finite values.

    ``cell`` is the (x, y) index of the first offending cell, when known.
    ``input_index`` is filled in by the reservoir driver.
    """

    def __init__(self, message, cell=None, input_index=None):
        super().__init__(message)
        self.cell = cell
        self.input_index = input_index


class SingularMatrixError(NumericalError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DivergenceError(NumericalError):
    """Autonomous forecast produced a non-finite value.

    ``partial`` holds the predictions emitted before the failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = [] if partial is None else list(partial)
