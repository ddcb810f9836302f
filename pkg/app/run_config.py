########################
# Run Configuration    #
########################

from dataclasses import dataclass, field
import json
import math
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from app.bench import get_case
from app.exceptions import ConfigurationError
from app.expressions import problem_from_spec
from app.grid import Family
from app.integrators import Scheme, SchemeConfig
from app.model import GChoice, SGProblem
from app.solver_config import SolverConfig

CONFIG_KEYS = (
    'case', 'scheme', 'grid', 'g', 'nx', 'ny', 'tau', 't_end', 'tol',
    'snapshot_times', 'out_dir',
)
REQUIRED_KEYS = ('case', 'scheme')
INLINE_DEFAULTS = {'nx': 128, 'ny': 128, 'tau': 0.01, 't_end': 1.0}


@dataclass(frozen=True)
class RunConfig:
    """
    A validated simulation request.

    Attributes:
        case (Union[str, Dict[str, Any]]): Benchmark name or inline problem mapping.
        scheme (Scheme): pepm, svm or baseline.
        grid (Family): mid or regular.
        g (GChoice): Supplementary function for svm.
        nx (int): Intervals along x.
        ny (int): Intervals along y.
        tau (float): Time step.
        t_end (float): Final time.
        tol (float): Newton tolerance on the energy residual.
        snapshot_times (Tuple[float, ...]): Times at which u and v are written.
        out_dir (Path): Output directory.
        max_iter (int): Newton iteration cap (from the solver configuration).
    """

    case: Union[str, Dict[str, Any]]
    scheme: Scheme
    grid: Family = Family.MID_POINT
    g: GChoice = GChoice.G1
    nx: int = 128
    ny: int = 128
    tau: float = 0.01
    t_end: float = 1.0
    tol: float = 1e-14
    snapshot_times: Tuple[float, ...] = ()
    out_dir: Path = field(default_factory=lambda: Path('output'))
    max_iter: int = 50

    @property
    def case_name(self) -> str:
        if isinstance(self.case, str):
            return self.case
        return str(self.case.get('name', 'inline'))

    @property
    def stem(self) -> str:
        """File name stem shared by every output of the run."""
        return f"{self.case_name}_{self.scheme.value}_{self.grid.value}"

    def problem(self) -> SGProblem:
        if isinstance(self.case, str):
            return get_case(self.case).problem
        return problem_from_spec(self.case)

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(
            scheme=self.scheme,
            grid_family=self.grid,
            g_choice=self.g,
            tau=self.tau,
            t_end=self.t_end,
            newton_tol=self.tol,
            newton_max_iter=self.max_iter,
        )


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _positive_int(key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"'{key}' must be an integer, got {value!r}", key=key)
    if value < 1:
        raise ConfigurationError(f"'{key}' must be positive, got {value}", key=key)
    return value


def _positive_float(key: str, value: Any) -> float:
    if not _is_number(value):
        raise ConfigurationError(f"'{key}' must be a number, got {value!r}", key=key)
    if not (math.isfinite(value) and value > 0):
        raise ConfigurationError(f"'{key}' must be positive and finite, got {value}", key=key)
    return float(value)


def _choice(key: str, value: Any, kind):
    options = ', '.join(member.value for member in kind)
    if not isinstance(value, str):
        raise ConfigurationError(f"'{key}' must be one of {options}, got {value!r}", key=key)
    try:
        return kind(value.lower())
    except ValueError as e:
        raise ConfigurationError(f"'{key}' must be one of {options}, got {value!r}", key=key) from e


def _times(key: str, value: Any) -> Tuple[float, ...]:
    if not isinstance(value, list) or not all(_is_number(t) for t in value):
        raise ConfigurationError(f"'{key}' must be a list of numbers", key=key)
    if any(t < 0 or not math.isfinite(t) for t in value):
        raise ConfigurationError(f"'{key}' must hold finite non-negative times", key=key)
    return tuple(float(t) for t in value)


def _case(key: str, value: Any) -> Union[str, Dict[str, Any]]:
    if isinstance(value, str):
        get_case(value)
        return value
    if isinstance(value, dict):
        try:
            problem_from_spec(value)
        except ConfigurationError as e:
            raise ConfigurationError(str(e), key=key) from e
        return dict(value)
    raise ConfigurationError(f"'{key}' must be a case name or an inline problem object", key=key)


def _path(key: str, value: Any) -> Path:
    if not isinstance(value, str) or not value.strip():
        raise ConfigurationError(f"'{key}' must be a non-empty path string", key=key)
    return Path(value)


_VALIDATORS = {
    'case': _case,
    'scheme': lambda key, value: _choice(key, value, Scheme),
    'grid': lambda key, value: _choice(key, value, Family),
    'g': lambda key, value: _choice(key, value, GChoice),
    'nx': _positive_int,
    'ny': _positive_int,
    'tau': _positive_float,
    't_end': _positive_float,
    'tol': _positive_float,
    'snapshot_times': _times,
    'out_dir': _path,
}


def parse_config(
    source: Union[str, Mapping[str, Any]],
    overrides: Optional[Mapping[str, Any]] = None,
    solver_config: Optional[SolverConfig] = None
) -> RunConfig:
    """
    Parse and validate a JSON run configuration.

    Args:
        source (Union[str, Mapping[str, Any]]): JSON text (or an already decoded object).
        overrides (Optional[Mapping[str, Any]]): Values replacing keys of the same name;
            None entries are ignored.
        solver_config (Optional[SolverConfig]): Source of the default tolerance,
            iteration cap and output directory.

    Returns:
        RunConfig: Validated configuration with defaults filled in. Benchmark
        cases supply their own nx, ny, tau and t_end defaults.

    Raises:
        ConfigurationError: Naming the offending key.
    """
    solver_config = solver_config or SolverConfig()
    if isinstance(source, str):
        try:
            data = json.loads(source)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Configuration is not valid JSON: {e}") from e
    else:
        data = source
    if not isinstance(data, Mapping):
        raise ConfigurationError("Configuration must be a JSON object")
    data = dict(data)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    unknown = [key for key in data if key not in CONFIG_KEYS]
    if unknown:
        raise ConfigurationError(f"Unknown configuration key '{unknown[0]}'", key=unknown[0])

    values = {key: _VALIDATORS[key](key, value) for key, value in data.items()}
    for key in REQUIRED_KEYS:
        if key not in values:
            raise ConfigurationError(f"Missing required key '{key}'", key=key)

    if isinstance(values['case'], str):
        case = get_case(values['case'])
        defaults = {
            'nx': case.default_nx, 'ny': case.default_ny,
            'tau': case.default_tau, 't_end': case.default_t_end,
        }
    else:
        defaults = dict(INLINE_DEFAULTS)
    for key, default in defaults.items():
        values.setdefault(key, default)
    values.setdefault('tol', solver_config.newton_tol)
    values.setdefault('out_dir', solver_config.output_dir)

    if values['t_end'] < values['tau']:
        raise ConfigurationError("'t_end' must be at least 'tau'", key='t_end')
    return RunConfig(max_iter=solver_config.newton_max_iter, **values)
