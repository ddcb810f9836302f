########################
# Scalar Newton        #
########################

from dataclasses import dataclass
import math
from typing import Callable, Optional

from app.exceptions import DegenerateDerivativeError, NonFiniteValueError, ValidationError

DERIVATIVE_FLOOR = 1e-300


@dataclass(frozen=True)
class NewtonResult:
    """
    Outcome of a scalar Newton solve.

    Attributes:
        root (float): Last iterate.
        iterations (int): Newton updates performed.
        residual (float): f(root).
        converged (bool): Whether |residual| <= tol.
    """

    root: float
    iterations: int
    residual: float
    converged: bool


def newton_scalar(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    x0: float,
    tol: float,
    max_iter: int,
    bound: Optional[float] = None
) -> NewtonResult:
    """
    Plain Newton iteration for f(x) = 0 with a residual stopping test.

    Args:
        f: Residual function.
        fprime: Its derivative.
        x0: Starting point.
        tol: Convergence when |f(x)| <= tol.
        max_iter: Maximum number of Newton updates.
        bound: Optional guard; an iterate with |x| > bound ends the solve unconverged.

    Returns:
        NewtonResult: Unconverged results are returned, not raised; the caller decides.

    Raises:
        ValidationError: If tol or max_iter are invalid.
        NonFiniteValueError: If f evaluates to a non-finite value.
        DegenerateDerivativeError: If |f'(x)| < 1e-300 at an iterate.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be at least 1, got {max_iter}")

    x = float(x0)
    iterations = 0
    while True:
        fx = float(f(x))
        if not math.isfinite(fx):
            raise NonFiniteValueError(f"Residual is not finite at x={x!r}: {fx}")
        if bound is not None and abs(x) > bound:
            return NewtonResult(root=x, iterations=iterations, residual=fx, converged=False)
        if abs(fx) <= tol:
            return NewtonResult(root=x, iterations=iterations, residual=fx, converged=True)
        if iterations >= max_iter:
            return NewtonResult(root=x, iterations=iterations, residual=fx, converged=False)

        slope = float(fprime(x))
        if not abs(slope) >= DERIVATIVE_FLOOR:
            raise DegenerateDerivativeError(
                f"Derivative vanishes at x={x!r} (f'={slope}, f={fx})"
            )
        x -= fx / slope
        iterations += 1
