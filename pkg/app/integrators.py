########################
# Time Integrators     #
########################

from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, replace
from enum import Enum
import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from app.exceptions import (
    ConfigurationError,
    DegenerateDerivativeError,
    NonFiniteValueError,
    NumericalError,
    StepFailure,
)
from app.grid import Family, Field, State, check_same_grid, make_grid
from app.model import EnergyLine, GChoice, SGProblem, energy, energy_gradient, supplementary_g
from app.rootfind import NewtonResult, newton_scalar
from app.spectral import helmholtz_solve, laplacian


class Scheme(str, Enum):
    """Fully discrete scheme families."""

    PEPM = "pepm"
    SVM = "svm"
    PC_CN_BASELINE = "baseline"


@dataclass(frozen=True)
class SchemeConfig:
    """
    Time-stepping configuration.

    Attributes:
        scheme (Scheme): Projection, supplementary variable, or the bare
            prediction-correction Crank-Nicolson baseline.
        grid_family (Family): Mid-point (-M schemes) or regular (-R schemes).
        g_choice (GChoice): Supplementary function (SVM only).
        tau (float): Time step.
        t_end (float): Final time.
        newton_tol (float): Energy residual tolerance, relative to max(1, |H0|).
        newton_max_iter (int): Newton iteration cap per step.
    """

    scheme: Scheme = Scheme.PEPM
    grid_family: Family = Family.MID_POINT
    g_choice: GChoice = GChoice.G1
    tau: float = 0.01
    t_end: float = 1.0
    newton_tol: float = 1e-14
    newton_max_iter: int = 50

    def __post_init__(self):
        for key, kind in (('scheme', Scheme), ('grid_family', Family), ('g_choice', GChoice)):
            try:
                object.__setattr__(self, key, kind(getattr(self, key)))
            except ValueError as e:
                raise ConfigurationError(f"Invalid {key}: {getattr(self, key)!r}", key=key) from e
        if not self.tau > 0:
            raise ConfigurationError("tau must be positive", key='tau')
        if not self.t_end >= self.tau:
            raise ConfigurationError("t_end must be at least tau", key='t_end')
        if not self.newton_tol > 0:
            raise ConfigurationError("newton_tol must be positive", key='newton_tol')
        if self.newton_max_iter < 1:
            raise ConfigurationError("newton_max_iter must be at least 1", key='newton_max_iter')

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.tau)))

    @property
    def label(self) -> str:
        suffix = 'M' if self.grid_family is Family.MID_POINT else 'R'
        return f"{self.scheme.value.upper()}-{suffix}"

    def with_changes(self, **changes: Any) -> 'SchemeConfig':
        return replace(self, **changes)


@dataclass(frozen=True)
class StepDiagnostics:
    """
    Per-step record of the time loop.

    Attributes:
        step (int): Step index (0 is the initial state).
        time (float): t_n = n tau.
        energy (float): Discrete energy after the step.
        energy_error (float): |H^n - H^0|.
        multiplier (float): lambda (PEPM), beta (SVM) or 0 (baseline).
        newton_iters (int): Newton updates used by the closure.
    """

    step: int
    time: float
    energy: float
    energy_error: float
    multiplier: float
    newton_iters: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> 'StepDiagnostics':
        return StepDiagnostics(
            step=int(data['step']),
            time=float(data['time']),
            energy=float(data['energy']),
            energy_error=float(data['energy_error']),
            multiplier=float(data['multiplier']),
            newton_iters=int(data['newton_iters']),
        )


@dataclass(frozen=True)
class StepResult:
    """New state plus the closure's multiplier and Newton statistics."""

    state: State
    multiplier: float = 0.0
    iterations: int = 0
    residual: float = 0.0


def _shift(tau: float) -> float:
    return tau * tau / 4.0


def predict(u_n: Field, v_n: Field, u_extrap: Field, phi: Field, tau: float) -> Tuple[Field, Field]:
    """
    Prediction half-level values.

    Solves (u_hat^{n+1} - u^n)/tau = v_hat^{n+1/2} and
    (v_hat^{n+1} - v^n)/tau = Laplacian u_hat^{n+1/2} - phi sin(u_extrap)
    in closed form:
    u_hat^{n+1/2} = (I - tau^2/4 Laplacian)^{-1}(u^n + tau/2 v^n - tau^2/4 phi sin u_extrap),
    v_hat^{n+1/2} = 2/tau (u_hat^{n+1/2} - u^n).

    Returns:
        Tuple[Field, Field]: (u_hat^{n+1/2}, v_hat^{n+1/2}).
    """
    check_same_grid(u_n, v_n, u_extrap, phi)
    forcing = phi * u_extrap.like(_sin(u_extrap))
    u_half = helmholtz_solve(u_n + (tau / 2.0) * v_n - _shift(tau) * forcing, c=_shift(tau))
    v_half = (2.0 / tau) * (u_half - u_n)
    return u_half, v_half


def correct_free(u_n: Field, v_n: Field, u_half: Field, phi: Field, tau: float) -> Tuple[Field, Field]:
    """
    Crank-Nicolson correction with the nonlinearity frozen at u_hat^{n+1/2}.

    u_tilde = (I - tau^2/4 Laplacian)^{-1}((I + tau^2/4 Laplacian) u^n + tau v^n
    - tau^2/2 phi sin u_hat^{n+1/2}), v_tilde = 2/tau (u_tilde - u^n) - v^n.

    Returns:
        Tuple[Field, Field]: (u_tilde^{n+1}, v_tilde^{n+1}).
    """
    check_same_grid(u_n, v_n, u_half, phi)
    forcing = phi * u_half.like(_sin(u_half))
    explicit = u_n + _shift(tau) * laplacian(u_n) + tau * v_n - (tau * tau / 2.0) * forcing
    u_tilde = helmholtz_solve(explicit, c=_shift(tau))
    v_tilde = (2.0 / tau) * (u_tilde - u_n) - v_n
    return u_tilde, v_tilde


def _sin(field: Field) -> np.ndarray:
    return np.sin(field.data)


def _solve_multiplier(
    line: EnergyLine,
    H0: float,
    cfg: SchemeConfig,
    previous_multiplier: float,
    label: str
) -> NewtonResult:
    """Newton from 0 on s -> H(line(s)) - H0, guarded by 10 (|previous| + tau)."""
    tol = cfg.newton_tol * max(1.0, abs(H0))
    bound = 10.0 * (abs(previous_multiplier) + cfg.tau)
    try:
        result = newton_scalar(
            lambda s: line.value(s) - H0,
            line.slope,
            0.0,
            tol,
            cfg.newton_max_iter,
            bound=bound,
        )
    except (DegenerateDerivativeError, NonFiniteValueError) as e:
        logging.error(f"{label} solve failed: {e}")
        raise StepFailure(f"{label} solve failed: {e}") from e

    if not result.converged:
        logging.error(
            f"{label} Newton did not converge: iterate={result.root!r}, "
            f"residual={result.residual!r}, iterations={result.iterations}"
        )
        raise StepFailure(
            f"{label} Newton did not converge after {result.iterations} iterations "
            f"(iterate {result.root!r}, residual {result.residual!r}, bound {bound!r})",
            residual=result.residual,
            iterate=result.root,
        )
    return result


def projection_step(
    u_tilde: Field,
    v_tilde: Field,
    phi: Field,
    H0: float,
    cfg: SchemeConfig,
    previous_multiplier: float = 0.0
) -> StepResult:
    """
    Energy projection along the gradient direction.

    u^{n+1} = u_tilde + lambda (-Laplacian u_tilde + phi sin u_tilde),
    v^{n+1} = v_tilde + lambda v_tilde, with lambda the Newton root from 0 of
    H(u^{n+1}, v^{n+1}) = H0.

    Returns:
        StepResult: (u^{n+1}, v^{n+1}) with lambda and the Newton statistics.

    Raises:
        StepFailure: If Newton does not converge.
    """
    base = State(u_tilde, v_tilde)
    direction = energy_gradient(base, phi)
    result = _solve_multiplier(EnergyLine(base, direction, phi), H0, cfg, previous_multiplier, "Projection")
    lam = result.root
    if lam != 0.0:
        base = State(u_tilde + lam * direction[0], v_tilde + lam * direction[1])
    return StepResult(base, lam, result.iterations, result.residual)


def svm_step(
    u_n: Field,
    v_n: Field,
    u_half: Field,
    v_half: Field,
    phi: Field,
    H0: float,
    cfg: SchemeConfig,
    previous_multiplier: float = 0.0
) -> StepResult:
    """
    Supplementary-variable correction.

    u^{n+1} = u_tilde + beta omega, v^{n+1} = v_tilde + beta gamma, where
    omega = tau^2/2 (I - tau^2/4 Laplacian)^{-1} g[u_hat, v_hat] and
    gamma = 2 omega / tau; beta is the Newton root from 0 of the energy constraint.

    Returns:
        StepResult: (u^{n+1}, v^{n+1}) with beta and the Newton statistics.

    Raises:
        StepFailure: If Newton does not converge or the direction is degenerate.
    """
    u_tilde, v_tilde = correct_free(u_n, v_n, u_half, phi, cfg.tau)
    g = supplementary_g(State(u_half, v_half), phi, cfg.g_choice)
    omega = (cfg.tau * cfg.tau / 2.0) * helmholtz_solve(g, c=_shift(cfg.tau))
    gamma = (2.0 / cfg.tau) * omega
    base = State(u_tilde, v_tilde)
    result = _solve_multiplier(EnergyLine(base, (omega, gamma), phi), H0, cfg, previous_multiplier, "SVM")
    beta = result.root
    if beta != 0.0:
        base = State(u_tilde + beta * omega, v_tilde + beta * gamma)
    return StepResult(base, beta, result.iterations, result.residual)


########################
# Closure Strategies   #
########################

class EnergyClosure(ABC):
    """
    Second stage of a step, after the prediction.

    Each closure turns the predicted half-level values into the new state.
    """

    @abstractmethod
    def close(
        self,
        u_n: Field,
        v_n: Field,
        u_half: Field,
        v_half: Field,
        phi: Field,
        H0: float,
        cfg: SchemeConfig,
        previous_multiplier: float
    ) -> StepResult:
        pass  # pragma: no cover

    def __str__(self) -> str:
        return self.__class__.__name__


class ProjectionClosure(EnergyClosure):
    """Crank-Nicolson correction followed by energy projection (PEPM)."""

    def close(self, u_n, v_n, u_half, v_half, phi, H0, cfg, previous_multiplier):
        u_tilde, v_tilde = correct_free(u_n, v_n, u_half, phi, cfg.tau)
        return projection_step(u_tilde, v_tilde, phi, H0, cfg, previous_multiplier)


class SupplementaryClosure(EnergyClosure):
    """Correction of the relaxed system with the supplementary variable beta (SVM)."""

    def close(self, u_n, v_n, u_half, v_half, phi, H0, cfg, previous_multiplier):
        return svm_step(u_n, v_n, u_half, v_half, phi, H0, cfg, previous_multiplier)


class CrankNicolsonClosure(EnergyClosure):
    """Plain correction without any energy constraint (diagnostic baseline)."""

    def close(self, u_n, v_n, u_half, v_half, phi, H0, cfg, previous_multiplier):
        u, v = correct_free(u_n, v_n, u_half, phi, cfg.tau)
        return StepResult(State(u, v))


class ClosureFactory:
    """
    Factory for closure strategies, keyed by scheme.
    """

    _closures: Dict[Scheme, type] = {
        Scheme.PEPM: ProjectionClosure,
        Scheme.SVM: SupplementaryClosure,
        Scheme.PC_CN_BASELINE: CrankNicolsonClosure,
    }

    @classmethod
    def register_closure(cls, scheme: Scheme, closure_class: type) -> None:
        """
        Register a closure for a scheme.

        Raises:
            TypeError: If closure_class does not inherit from EnergyClosure.
        """
        if not issubclass(closure_class, EnergyClosure):
            raise TypeError("Closure class must inherit from EnergyClosure")
        cls._closures[Scheme(scheme)] = closure_class

    @classmethod
    def create_closure(cls, scheme: Scheme) -> EnergyClosure:
        """
        Raises:
            ConfigurationError: If no closure is registered for the scheme.
        """
        closure_class = cls._closures.get(Scheme(scheme))
        if not closure_class:
            raise ConfigurationError(f"Unknown scheme: {scheme}", key='scheme')
        return closure_class()


def advance_step(
    u_prev: Field,
    u_n: Field,
    v_n: Field,
    phi: Field,
    H0: float,
    cfg: SchemeConfig,
    previous_multiplier: float = 0.0,
    closure: Optional[EnergyClosure] = None
) -> StepResult:
    """
    One three-level step: prediction with u_bar = (3 u^n - u^{n-1}) / 2, then the closure.
    """
    closure = closure or ClosureFactory.create_closure(cfg.scheme)
    u_extrap = 1.5 * u_n - 0.5 * u_prev
    u_half, v_half = predict(u_n, v_n, u_extrap, phi, cfg.tau)
    return closure.close(u_n, v_n, u_half, v_half, phi, H0, cfg, previous_multiplier)


def startup_step(
    state0: State,
    phi: Field,
    cfg: SchemeConfig,
    H0: Optional[float] = None,
    closure: Optional[EnergyClosure] = None
) -> StepResult:
    """
    First step of the two-level start: the prediction uses u^0 in place of u_bar.

    Args:
        state0 (State): Initial data.
        phi (Field): Josephson current density on the same grid.
        cfg (SchemeConfig): Scheme settings.
        H0 (Optional[float]): Constraint level; defaults to the energy of state0.
        closure (Optional[EnergyClosure]): Overrides the scheme's closure.

    Returns:
        StepResult: (u^1, v^1) with the multiplier used.
    """
    closure = closure or ClosureFactory.create_closure(cfg.scheme)
    if H0 is None:
        H0 = energy(state0, phi)
    u_half, v_half = predict(state0.u, state0.v, state0.u, phi, cfg.tau)
    return closure.close(state0.u, state0.v, u_half, v_half, phi, H0, cfg, 0.0)


def run(
    problem: SGProblem,
    cfg: SchemeConfig,
    nx: int,
    ny: int,
    observers: Iterable[Any] = ()
) -> Tuple[State, List[StepDiagnostics]]:
    """
    Integrate a problem from t = 0 to cfg.t_end.

    Observers receive the initial record (step 0) and one record per step.

    Returns:
        Tuple[State, List[StepDiagnostics]]: Final state and all records, step 0 included.

    Raises:
        StepFailure: With the failing step index and the records so far.
    """
    observers = list(observers)
    grid = make_grid(problem.domain, cfg.grid_family, nx, ny)
    phi = problem.sample_phi(grid)
    state = problem.initial_state(grid)
    H0 = energy(state, phi)
    closure = ClosureFactory.create_closure(cfg.scheme)
    n_steps = cfg.n_steps
    if not math.isclose(n_steps * cfg.tau, cfg.t_end, rel_tol=1e-9, abs_tol=1e-12):
        logging.warning(
            f"t_end={cfg.t_end} is not a multiple of tau={cfg.tau}; stopping at t={n_steps * cfg.tau}"
        )
    logging.info(
        f"Run {problem.name} with {cfg.label} ({closure}), grid {grid.shape}, "
        f"tau={cfg.tau}, steps={n_steps}, H0={H0!r}"
    )

    records = [StepDiagnostics(0, 0.0, H0, 0.0, 0.0, 0)]
    _notify(observers, records[0], state)

    u_prev: Optional[Field] = None
    multiplier = 0.0
    for step in range(1, n_steps + 1):
        try:
            if u_prev is None:
                result = startup_step(state, phi, cfg, H0, closure)
            else:
                result = advance_step(u_prev, state.u, state.v, phi, H0, cfg, multiplier, closure)
        except NumericalError as e:
            logging.error(f"Step {step} failed: {e}")
            raise StepFailure(
                f"Step {step} failed: {e}",
                step=step,
                residual=getattr(e, 'residual', float('nan')),
                iterate=getattr(e, 'iterate', float('nan')),
                diagnostics=records,
            ) from e

        u_prev = state.u
        state = result.state
        multiplier = result.multiplier
        current = energy(state, phi)
        record = StepDiagnostics(
            step=step,
            time=step * cfg.tau,
            energy=current,
            energy_error=abs(current - H0),
            multiplier=multiplier,
            newton_iters=result.iterations,
        )
        records.append(record)
        logging.debug(f"Step {step}: closure residual {result.residual:.3e}")
        _notify(observers, record, state)

    logging.info(
        f"Run {problem.name} finished: max energy error "
        f"{max(r.energy_error for r in records):.3e}, max |multiplier| "
        f"{max(abs(r.multiplier) for r in records):.3e}"
    )
    return state, records


def _notify(observers: List[Any], record: StepDiagnostics, state: State) -> None:
    for observer in observers:
        observer.update(record, state)
