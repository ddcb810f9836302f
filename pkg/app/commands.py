########################
# Command Pattern      #
########################

from abc import ABC, abstractmethod
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from colorama import Fore, Style
import pandas as pd

from app.bench import case_summary, convergence_study
from app.exceptions import OutputError, SolverError, StepFailure
from app.grid import Family
from app.integrators import Scheme, SchemeConfig, StepDiagnostics, run
from app.model import GChoice
from app.observers import LoggingObserver, RecordingObserver, SnapshotObserver
from app.outputs import emit_diagnostics
from app.run_config import RunConfig
from app.solver_config import SolverConfig

COLORS = {
    'header': Fore.CYAN + Style.BRIGHT,
    'success': Fore.GREEN + Style.BRIGHT,
    'error': Fore.RED + Style.BRIGHT,
    'warning': Fore.YELLOW + Style.BRIGHT,
    'result': Fore.YELLOW + Style.BRIGHT,
    'highlight': Fore.MAGENTA + Style.BRIGHT,
    'dim': Fore.WHITE + Style.DIM,
}

DEFAULT_LEVELS = {
    'time': [0.1, 0.05, 0.025, 0.0125],
    'space': [16, 32, 64, 128],
}


class Command(ABC):
    """
    Abstract base class for all sub-commands.

    Each command encapsulates one request of the command line and returns
    its exit code.
    """

    @abstractmethod
    def execute(self) -> int:
        """
        Execute the command.

        Returns:
            int: Exit code (0 on success).
        """
        pass  # pragma: no cover

    @abstractmethod
    def get_description(self) -> str:
        pass  # pragma: no cover

    @abstractmethod
    def get_category(self) -> str:
        pass  # pragma: no cover


class RunCommand(Command):
    """
    Command for a single simulation.

    Writes `<out_dir>/<stem>_diagnostics.csv` and the requested snapshots. A run
    cut short by a failed step, a failed write or an interrupt still leaves the
    records completed so far, ending in an abort note.
    """

    def __init__(self, run_config: RunConfig, solver_config: Optional[SolverConfig] = None):
        self.run_config = run_config
        self.solver_config = solver_config or SolverConfig()

    @property
    def diagnostics_path(self) -> Path:
        return Path(self.run_config.out_dir) / f"{self.run_config.stem}_diagnostics.csv"

    def execute(self) -> int:
        rc = self.run_config
        cfg = rc.scheme_config()
        encoding = self.solver_config.default_encoding
        recorder = RecordingObserver()
        snapshots = SnapshotObserver(rc.snapshot_times, rc.tau, rc.out_dir, rc.stem, encoding)
        observers = [LoggingObserver(), recorder, snapshots]

        try:
            state, records = run(rc.problem(), cfg, rc.nx, rc.ny, observers)
        except (SolverError, KeyboardInterrupt) as e:
            if not recorder.records:
                raise
            step = e.step if isinstance(e, StepFailure) else recorder.last_step
            print(f"{COLORS['error']}Run aborted at step {step}: {e}{Style.RESET_ALL}")
            self._write_partial(recorder.records, step, encoding)
            raise

        emit_diagnostics(records, self.diagnostics_path, encoding=encoding)
        c = COLORS
        drift = max(r.energy_error for r in records)
        peak = max(abs(r.multiplier) for r in records)
        print(f"{c['header']}{rc.case_name} with {cfg.label}: {len(records) - 1} steps to t={records[-1].time:g}")
        print(f"{c['success']}  H0 = {records[0].energy:.15g}")
        print(f"{c['result']}  max |H - H0| = {drift:.3e}, max |multiplier| = {peak:.3e}")
        print(f"{c['dim']}  diagnostics: {self.diagnostics_path}{Style.RESET_ALL}")
        for path in snapshots.written:
            print(f"{c['dim']}  snapshot: {path}{Style.RESET_ALL}")
        logging.info(f"Run command finished for {rc.stem}")
        return 0

    def _write_partial(self, records: List[StepDiagnostics], step: int, encoding: str) -> None:
        try:
            emit_diagnostics(records, self.diagnostics_path, aborted_at=step, encoding=encoding)
        except OutputError as e:
            logging.error(f"Partial diagnostics not written: {e}")
            return
        print(f"{COLORS['dim']}Partial diagnostics: {self.diagnostics_path}{Style.RESET_ALL}")

    def get_description(self) -> str:
        return f"Run {self.run_config.case_name} with {self.run_config.scheme.value}"

    def get_category(self) -> str:
        return "Simulation"


class ConvergenceCommand(Command):
    """
    Command for a refinement study; writes `<out_dir>/<case>_<scheme>_<grid>_<axis>_convergence.csv`.
    """

    def __init__(
        self,
        case: str,
        axis: str,
        scheme: Scheme,
        grid: Family = Family.MID_POINT,
        g: GChoice = GChoice.G1,
        levels: Optional[Sequence[float]] = None,
        out_dir: Optional[Path] = None,
        workers: int = 1,
        tau: Optional[float] = None,
        t_end: float = 1.0,
        nx: int = 256,
        solver_config: Optional[SolverConfig] = None
    ):
        """
        Args:
            case: Case name; it must have an exact solution.
            axis: 'time' or 'space'.
            scheme: Scheme to study.
            grid: Grid family.
            g: Supplementary function (svm only).
            levels: Refinement levels; defaults to four halvings of tau or doublings of N.
            out_dir: Output directory; defaults to the solver configuration's.
            workers: Concurrent runs.
            tau: Fixed step of a space study (default 1e-4).
            t_end: Final time of every run.
            nx: Fixed N of a time study.
            solver_config: Source of tolerance, iteration cap and output paths.
        """
        self.solver_config = solver_config or SolverConfig()
        self.case = case
        self.axis = axis
        self.scheme = Scheme(scheme)
        self.grid = Family(grid)
        self.g = GChoice(g)
        self.levels = list(levels) if levels else list(DEFAULT_LEVELS.get(axis, []))
        self.out_dir = Path(out_dir) if out_dir else self.solver_config.output_dir
        self.workers = workers
        self.tau = tau if tau is not None else 1e-4
        self.t_end = t_end
        self.nx = nx

    @property
    def output_path(self) -> Path:
        return self.out_dir / (
            f"{self.case}_{self.scheme.value}_{self.grid.value}_{self.axis}_convergence.csv"
        )

    def execute(self) -> int:
        tau = self.tau if self.axis == 'space' else min(self.levels or [self.t_end])
        cfg = SchemeConfig(
            scheme=self.scheme,
            grid_family=self.grid,
            g_choice=self.g,
            tau=tau,
            t_end=self.t_end,
            newton_tol=self.solver_config.newton_tol,
            newton_max_iter=self.solver_config.newton_max_iter,
        )
        table = convergence_study(self.case, cfg, self.axis, self.levels, self.nx, self.workers)
        table.to_csv(self.output_path, self.solver_config.default_encoding)

        c = COLORS
        label = 'tau' if self.axis == 'time' else 'N'
        print(f"{c['header']}{self.case} {cfg.label} {self.axis} convergence")
        for row in table.frame.itertuples(index=False):
            order = '' if pd.isna(row.order_linf) else f"  order {row.order_linf:.2f}"
            print(f"{c['result']}  {label}={row.resolution:g}: L2 {row.l2:.3e}, Linf {row.linf:.3e}{order}")
        if table.spectral:
            print(f"{c['success']}  spectral accuracy reached{Style.RESET_ALL}")
        print(f"{c['dim']}  table: {self.output_path}{Style.RESET_ALL}")
        return 0

    def get_description(self) -> str:
        return f"{self.axis.capitalize()} convergence of {self.scheme.value} on {self.case}"

    def get_category(self) -> str:
        return "Studies"


class ListCasesCommand(Command):
    """Command printing the benchmark registry."""

    def execute(self) -> int:
        c = COLORS
        for row in case_summary().itertuples(index=False):
            print(f"{c['highlight']}{row.name}{Style.RESET_ALL}: {row.description}")
            print(
                f"{c['dim']}  domain {row.domain}, grid {row.grid}, "
                f"tau {row.tau:g}, t_end {row.t_end:g}, exact {'yes' if row.exact else 'no'}"
                f"{Style.RESET_ALL}"
            )
        return 0

    def get_description(self) -> str:
        return "List benchmark cases"

    def get_category(self) -> str:
        return "Information"


class CommandRegistry:
    """
    Registry of sub-command metadata, used to build the command-line help.
    """

    def __init__(self):
        self.commands: Dict[str, Dict[str, str]] = {}
        self._register_default_commands()

    def _register_default_commands(self):
        self.register_command_metadata('run', 'Run one simulation from a JSON configuration', 'Simulation')
        self.register_command_metadata(
            'convergence', 'Refinement study in time or space on a case with exact solution', 'Studies'
        )
        self.register_command_metadata('list-cases', 'List the benchmark cases', 'Information')

    def register_command_metadata(self, name: str, description: str, category: str):
        """
        Register command metadata.

        Args:
            name: Sub-command name.
            description: One-line help.
            category: Category name.
        """
        self.commands[name] = {
            'description': description,
            'category': category
        }

    def get_commands_by_category(self) -> Dict[str, List[Dict[str, str]]]:
        categorized: Dict[str, List[Dict[str, str]]] = {}
        for name, metadata in self.commands.items():
            categorized.setdefault(metadata['category'], []).append({
                'name': name,
                'description': metadata['description']
            })
        return categorized

    def get_command_info(self, name: str) -> Optional[Dict[str, str]]:
        return self.commands.get(name)
