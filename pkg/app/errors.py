from typing import Optional


class FusionError(ValueError):
    """Base class for every error raised by the fusion library"""

    def __init__(self, message: str, batch_index: Optional[int] = None):
        super().__init__(message)
        self.batch_index = batch_index


class NonUnitQuaternion(FusionError):
    pass


class NonFiniteInput(FusionError):
    pass


class DegenerateGeometry(FusionError):
    pass


class SingularInnovation(FusionError):
    pass


class LengthMismatch(FusionError):
    pass


class UnsupportedFilter(FusionError):
    pass


class ParseError(FusionError):
    """CSV cell or header that does not match the log schema"""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class NonMonotoneTime(FusionError):
    def __init__(self, line: int, reason: str = "timestamp is not strictly increasing"):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class DegenerateSample(FusionError):
    def __init__(self, line: int, reason: str = "accelerometer or magnetometer norm below 1e-9"):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class MonteCarloRunError(FusionError):
    """Filter failure inside a Monte Carlo campaign, tagged with the run index"""

    def __init__(self, run_index: int, cause: Exception):
        super().__init__(f"run {run_index}: {cause}")
        self.run_index = run_index
        self.cause = cause
