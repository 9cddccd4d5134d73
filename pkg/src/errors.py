"""Exception types shared by the sweep modules."""
from typing import Optional, Any


class SweepError(Exception):
    """Base class for every error raised by the sweep package."""


class InputError(SweepError, ValueError):
    """Invalid band, grid, configuration or input file."""

    def __init__(self, message: str, line: Optional[int] = None):
        """Initialize input error.

        Args:
            message: Human readable description
            line: 1-based line number in the offending file, if known
        """
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InterpolationError(SweepError, ValueError):
    """Singular support, NaN response or empty group set."""


class OracleError(SweepError, RuntimeError):
    """An oracle could not answer a frequency request."""

    def __init__(self, message: str, frequency: Optional[float] = None, partial_report: Any = None):
        """Initialize oracle error.

        Args:
            message: Human readable description
            frequency: Frequency (Hz) that failed, if known
            partial_report: SweepReport of the iterations completed before the failure
        """
        self.frequency = frequency
        self.partial_report = partial_report
        super().__init__(message)


class MetricError(SweepError, ValueError):
    """Relative error is undefined (zero reference magnitude or empty input)."""
