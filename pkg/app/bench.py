########################
# Benchmark Cases      #
########################

"""
Named sine-Gordon benchmark problems and the studies run on them.

The breather is the only case with a closed-form solution; it is posed on
[-20, 20] x [0, 1] with one interval in y, so the discrete L2 norm of the
two-dimensional grid equals the one-dimensional one.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import logging
import math
from multiprocessing.pool import ThreadPool
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.exceptions import ConfigurationError, OutputError, UnsupportedCaseError, ValidationError
from app.grid import Domain, Family, Field, norm, sample
from app.integrators import SchemeConfig, Scheme, run
from app.model import SGProblem

BREATHER_SPEED = 0.5
SPECTRAL_THRESHOLD = 1e-9
CONVERGENCE_COLUMNS = ['resolution', 'l2', 'linf', 'order_l2', 'order_linf']


def _sech(z):
    """sech without overflow warnings for large |z|."""
    a = np.exp(-np.abs(z))
    return 2.0 * a / (1.0 + a * a)


def breather_kappa(c: float) -> float:
    return 1.0 / math.sqrt(1.0 + c * c)


def breather_exact(x, t: float, c: float = BREATHER_SPEED):
    """
    Breather solution u(x, t) = 4 arctan(sin(c kappa t) sech(kappa x) / c).

    Args:
        x: Position (scalar or numpy array).
        t (float): Time.
        c (float): Velocity parameter; kappa = 1 / sqrt(1 + c^2).

    Returns:
        Same shape as x.

    Raises:
        ValidationError: If c is zero.
    """
    if c == 0:
        raise ValidationError("Breather parameter c must be non-zero")
    kappa = breather_kappa(c)
    return 4.0 * np.arctan(np.sin(c * kappa * t) * _sech(kappa * np.asarray(x, dtype=float)) / c)


def breather_velocity(x, c: float = BREATHER_SPEED):
    """u_t(x, 0) = 4 kappa sech(kappa x) of the breather."""
    kappa = breather_kappa(c)
    return 4.0 * kappa * _sech(kappa * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ReferenceValue:
    """A known value for a case: what is measured, its level, and under which settings."""

    quantity: str
    value: float
    provenance: str


@dataclass(frozen=True)
class BenchmarkCase:
    """
    A named problem with its default discretisation.

    Attributes:
        name (str): Registry key.
        problem (SGProblem): Equation data.
        default_family (Family): Grid family used unless overridden.
        default_nx (int): Intervals along x.
        default_ny (int): Intervals along y (1 for one-dimensional cases).
        default_tau (float): Time step.
        default_t_end (float): Final time.
        description (str): One line for listings.
        reference_values (Tuple[ReferenceValue, ...]): Known levels for comparisons.
    """

    name: str
    problem: SGProblem
    default_family: Family = Family.MID_POINT
    default_nx: int = 128
    default_ny: int = 128
    default_tau: float = 0.01
    default_t_end: float = 1.0
    description: str = ""
    reference_values: Tuple[ReferenceValue, ...] = field(default_factory=tuple)

    @property
    def has_exact(self) -> bool:
        return self.problem.exact is not None

    def reference(self, quantity: str) -> Optional[float]:
        for ref in self.reference_values:
            if ref.quantity == quantity:
                return ref.value
        return None


def _breather_case() -> BenchmarkCase:
    table = "t=10, tau=0.01, N=128"
    refs = (
        ReferenceValue('pepm-mid l2', 9.20e-6, table),
        ReferenceValue('pepm-mid linf', 6.70e-6, table),
        ReferenceValue('svm-mid l2', 2.35e-5, table),
        ReferenceValue('svm-mid linf', 1.20e-5, table),
        ReferenceValue('pepm-regular l2', 3.35e-5, table),
        ReferenceValue('pepm-regular linf', 1.57e-5, table),
        ReferenceValue('svm-regular l2', 2.35e-5, table),
        ReferenceValue('svm-regular linf', 1.15e-5, table),
    )
    problem = SGProblem(
        domain=Domain(-20.0, 20.0, 0.0, 1.0),
        phi=lambda x, y: 1.0,
        init_u=lambda x, y: np.zeros_like(x),
        init_v=lambda x, y: breather_velocity(x),
        exact=lambda x, y, t: breather_exact(x, t),
        name='breather',
    )
    return BenchmarkCase(
        name='breather', problem=problem, default_nx=128, default_ny=1,
        default_tau=0.01, default_t_end=10.0,
        description="1D breather, c = 0.5, exact solution known",
        reference_values=refs,
    )


def _radius(x, y, x0: float = 0.0, y0: float = 0.0):
    return np.sqrt((x - x0) ** 2 + (y - y0) ** 2)


def _four_ring_phase(x, y):
    return np.exp((4.0 - _radius(x, y, -3.0, -3.0)) / 0.436)


def _inhomogeneous_phase(x):
    return np.exp((x - 3.5) / 0.954)


@lru_cache(maxsize=1)
def _cases() -> Tuple[BenchmarkCase, ...]:
    line_perturbed = SGProblem(
        domain=Domain(-7.0, 7.0, -7.0, 7.0),
        phi=lambda x, y: 1.0,
        init_u=lambda x, y: 4.0 * np.arctan(
            np.exp(x + 1.0 - 2.0 * _sech(y + 7.0) - 2.0 * _sech(y - 7.0))
        ),
        init_v=lambda x, y: 0.0,
        name='line_perturbed',
    )
    line_inhomogeneous = SGProblem(
        domain=Domain(-7.0, 7.0, -7.0, 7.0),
        phi=lambda x, y: 1.0 + _sech(_radius(x, y)) ** 2,
        init_u=lambda x, y: 4.0 * np.arctan(_inhomogeneous_phase(x)),
        init_v=lambda x, y: 0.629 * _sech(_inhomogeneous_phase(x)),
        name='line_inhomogeneous',
    )
    ring = SGProblem(
        domain=Domain(-14.0, 14.0, -14.0, 14.0),
        phi=lambda x, y: 1.0,
        init_u=lambda x, y: 4.0 * np.arctan(np.exp(3.0 - _radius(x, y))),
        init_v=lambda x, y: 0.0,
        name='ring',
    )
    four_ring = SGProblem(
        domain=Domain(-30.0, 10.0, -30.0, 10.0),
        phi=lambda x, y: 1.0,
        init_u=lambda x, y: 4.0 * np.arctan(_four_ring_phase(x, y)),
        init_v=lambda x, y: 4.13 * _sech(_four_ring_phase(x, y)),
        name='four_ring',
    )
    ring_levels = "t<=15, tau=0.01, N=128"
    return (
        _breather_case(),
        BenchmarkCase(
            name='line_perturbed', problem=line_perturbed, default_t_end=11.0,
            description="Line soliton with two symmetric dents, phi = 1",
        ),
        BenchmarkCase(
            name='line_inhomogeneous', problem=line_inhomogeneous, default_t_end=18.0,
            description="Line soliton through an inhomogeneity, phi = 1 + sech^2(r)",
        ),
        BenchmarkCase(
            name='ring', problem=ring, default_t_end=15.0,
            description="Circular ring soliton, phi = 1",
            reference_values=(
                ReferenceValue('svm max multiplier', 1e-4, ring_levels),
                ReferenceValue('pepm max multiplier', 1e-6, ring_levels),
            ),
        ),
        BenchmarkCase(
            name='four_ring', problem=four_ring, default_t_end=10.0,
            description="Ring centred at (-3, -3) with Neumann walls at x, y = -30 and 10",
        ),
    )


def registry() -> List[BenchmarkCase]:
    """All benchmark cases, in a fixed order."""
    return list(_cases())


def get_case(name: str) -> BenchmarkCase:
    """
    Look up a case by name.

    Raises:
        ConfigurationError: If no case has this name.
    """
    for case in _cases():
        if case.name == name:
            return case
    names = ', '.join(c.name for c in _cases())
    raise ConfigurationError(f"Unknown case '{name}'. Available: {names}", key='case')


def error_norms(numeric: Field, exact_fn: Callable, t: float) -> Tuple[float, float]:
    """
    Discrete L2 and max-norm errors against an exact solution u(x, y, t).

    Returns:
        Tuple[float, float]: (l2, linf).
    """
    exact = sample(lambda x, y: exact_fn(x, y, t), numeric.grid)
    diff = numeric - exact
    return norm(diff), float(np.max(np.abs(diff.data)))


def fitted_order(resolutions: Sequence[float], errors: Sequence[float]) -> float:
    """
    Least-squares slope of log(error) against log(resolution).

    Raises:
        ValidationError: With fewer than two points or non-positive values.
    """
    resolutions = np.asarray(resolutions, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if resolutions.size < 2 or resolutions.size != errors.size:
        raise ValidationError("Need at least two (resolution, error) pairs of equal length")
    if np.any(resolutions <= 0) or np.any(errors <= 0):
        raise ValidationError("Resolutions and errors must be positive to fit an order")
    return float(np.polyfit(np.log(resolutions), np.log(errors), 1)[0])


def _pairwise_orders(resolutions: np.ndarray, errors: np.ndarray) -> np.ndarray:
    orders = np.full(errors.size, np.nan)
    with np.errstate(divide='ignore', invalid='ignore'):
        for i in range(1, errors.size):
            orders[i] = (
                np.log(errors[i - 1] / errors[i])
                / abs(np.log(resolutions[i] / resolutions[i - 1]))
            )
    return orders


@dataclass
class ConvergenceTable:
    """
    Errors per refinement level.

    Attributes:
        frame (pd.DataFrame): Columns resolution, l2, linf, order_l2, order_linf.
        axis (str): 'time' (resolution is tau) or 'space' (resolution is N).
        spectral (bool): Space study whose finest error is below 1e-9.
    """

    frame: pd.DataFrame
    axis: str
    spectral: bool = False

    def to_csv(self, path: Union[str, Path], encoding: str = 'utf-8') -> None:
        """
        Raises:
            OutputError: If the file cannot be written.
        """
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.frame.to_csv(path, index=False, float_format='%.17g', na_rep='', encoding=encoding)
        except OSError as e:
            logging.error(f"Failed to write convergence table {path}: {e}")
            raise OutputError(f"Failed to write convergence table: {e}", path) from e


def _as_case(case: Union[str, BenchmarkCase]) -> BenchmarkCase:
    return get_case(case) if isinstance(case, str) else case


def convergence_study(
    case: Union[str, BenchmarkCase],
    cfg_base: SchemeConfig,
    axis: str,
    levels: Sequence[float],
    nx: int = 256,
    workers: int = 1
) -> ConvergenceTable:
    """
    Refine in time or in space and measure the error at cfg_base.t_end.

    Args:
        case: Case (or its name); it must have an exact solution.
        cfg_base (SchemeConfig): Scheme, family and final time; its tau is
            the fixed step of a space study.
        axis (str): 'time' (levels are steps tau) or 'space' (levels are N).
        levels (Sequence[float]): Refinement levels, coarse to fine.
        nx (int): Fixed N of a time study.
        workers (int): Number of concurrent runs.

    Returns:
        ConvergenceTable: One row per level, in the order given.

    Raises:
        UnsupportedCaseError: If the case has no exact solution.
        ValidationError: If the axis or levels are invalid.
    """
    case = _as_case(case)
    if not case.has_exact:
        raise UnsupportedCaseError(f"Case '{case.name}' has no exact solution")
    if axis not in ('time', 'space'):
        raise ValidationError(f"axis must be 'time' or 'space', got {axis!r}")
    if len(levels) == 0:
        raise ValidationError("At least one refinement level is required")
    if workers < 1:
        raise ValidationError("workers must be at least 1")

    def cell(level) -> Tuple[float, float]:
        if axis == 'time':
            cfg = cfg_base.with_changes(tau=float(level))
            cell_nx, cell_ny = nx, case.default_ny
        else:
            cfg = cfg_base
            cell_nx = int(level)
            cell_ny = 1 if case.default_ny == 1 else int(level)
        state, records = run(case.problem, cfg, cell_nx, cell_ny)
        l2, linf = error_norms(state.u, case.problem.exact, records[-1].time)
        logging.info(f"{case.name} {cfg.label} {axis} level {level}: l2={l2:.3e}, linf={linf:.3e}")
        return l2, linf

    logging.info(f"Convergence study on {case.name} ({axis}) with levels {list(levels)}")
    if workers > 1:
        with ThreadPool(workers) as pool:
            results = pool.map(cell, list(levels))
    else:
        results = [cell(level) for level in levels]

    resolutions = np.asarray(levels, dtype=float)
    l2 = np.array([r[0] for r in results])
    linf = np.array([r[1] for r in results])
    frame = pd.DataFrame({
        'resolution': resolutions,
        'l2': l2,
        'linf': linf,
        'order_l2': _pairwise_orders(resolutions, l2),
        'order_linf': _pairwise_orders(resolutions, linf),
    }, columns=CONVERGENCE_COLUMNS)
    spectral = axis == 'space' and bool(max(l2[-1], linf[-1]) < SPECTRAL_THRESHOLD)
    return ConvergenceTable(frame=frame, axis=axis, spectral=spectral)


@dataclass
class MultiplierStudy:
    """Largest |multiplier| per time step, with the fitted log-log slope."""

    frame: pd.DataFrame
    slope: float


def multiplier_study(
    case: Union[str, BenchmarkCase],
    cfg_base: SchemeConfig,
    taus: Sequence[float],
    nx: int,
    ny: int
) -> MultiplierStudy:
    """
    Measure max |lambda| (projection) or max |beta| (supplementary variable) against tau.

    Raises:
        ValidationError: For the baseline scheme, which has no multiplier.
    """
    case = _as_case(case)
    if cfg_base.scheme is Scheme.PC_CN_BASELINE:
        raise ValidationError("The baseline scheme has no multiplier to study")
    peaks: List[float] = []
    for tau in taus:
        _, records = run(case.problem, cfg_base.with_changes(tau=float(tau)), nx, ny)
        peaks.append(max(abs(r.multiplier) for r in records))
        logging.info(f"{case.name} {cfg_base.label} tau={tau}: max |multiplier| = {peaks[-1]:.3e}")
    frame = pd.DataFrame({'tau': np.asarray(taus, dtype=float), 'max_abs_multiplier': peaks})
    return MultiplierStudy(frame=frame, slope=fitted_order(taus, peaks))


def case_summary() -> pd.DataFrame:
    """Registry as a table for listings."""
    rows: List[Dict[str, object]] = []
    for case in _cases():
        dom = case.problem.domain
        rows.append({
            'name': case.name,
            'domain': f"[{dom.a:g}, {dom.b:g}] x [{dom.c:g}, {dom.d:g}]",
            'grid': f"{case.default_family.value} {case.default_nx}x{case.default_ny}",
            'tau': case.default_tau,
            't_end': case.default_t_end,
            'exact': case.has_exact,
            'description': case.description,
        })
    return pd.DataFrame(rows)
