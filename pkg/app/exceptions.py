########################
# Exception Hierarchy  #
########################

from typing import Any, List, Optional, Tuple


class SolverError(Exception):
    """
    Base exception class for solver-specific errors.

    All custom exceptions for the sine-Gordon solver inherit from this class,
    allowing for unified error handling at the command-line boundary.
    """
    pass


class ValidationError(SolverError):
    """
    Raised when an argument or input fails validation.

    Triggered by things like a non-positive Helmholtz shift, a degenerate
    domain, or a non-positive grid resolution.
    """
    pass


class DimensionError(ValidationError):
    """
    Raised when a vector length or field shape does not match its plan or grid.
    """
    pass


class GridMismatchError(ValidationError):
    """
    Raised when fields living on different grids are combined.

    The two grid families have different shapes and norms, so mixing them is
    never broadcast silently.
    """
    pass


class SamplingError(ValidationError):
    """
    Raised when a sampled function produces a non-finite value.

    Attributes:
        index (Tuple[int, ...]): Node index of the first offending value.
    """

    def __init__(self, message: str, index: Tuple[int, ...]):
        super().__init__(message)
        self.index = index


class ConfigurationError(SolverError):
    """
    Raised when solver or run configuration is invalid.

    Attributes:
        key (Optional[str]): The configuration key at fault, when known.
    """

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class NumericalError(SolverError):
    """
    Raised when a numerical procedure fails.
    """
    pass


class DegenerateDerivativeError(NumericalError):
    """
    Raised when Newton iteration meets a vanishing derivative.
    """
    pass


class NonFiniteValueError(NumericalError):
    """
    Raised when a residual evaluates to a non-finite value.
    """
    pass


class StepFailure(NumericalError):
    """
    Raised when a time step cannot satisfy the energy constraint.

    Attributes:
        step (int): Index of the step being computed.
        residual (float): Last energy residual seen by the root finder.
        iterate (float): Last multiplier iterate.
        diagnostics (List[Any]): Step records completed before the failure.
    """

    def __init__(
        self,
        message: str,
        step: int = 0,
        residual: float = float('nan'),
        iterate: float = float('nan'),
        diagnostics: Optional[List[Any]] = None
    ):
        super().__init__(message)
        self.step = step
        self.residual = residual
        self.iterate = iterate
        self.diagnostics = diagnostics if diagnostics is not None else []


class UnsupportedCaseError(SolverError):
    """
    Raised when a benchmark case cannot serve the requested study.
    """
    pass


class OutputError(SolverError):
    """
    Raised when writing or reading an output file fails.

    Attributes:
        path (str): The file involved.
    """

    def __init__(self, message: str, path: Any):
        super().__init__(message)
        self.path = str(path)
