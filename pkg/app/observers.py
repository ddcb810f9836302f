########################
# Step Observers       #
########################

from abc import ABC, abstractmethod
import logging
from pathlib import Path
from typing import Iterable, List, Union

from app.grid import State
from app.integrators import StepDiagnostics
from app.outputs import emit_snapshot


class StepObserver(ABC):
    """
    Abstract base class for time-loop observers.

    Observers are notified once for the initial state (step 0) and once after
    every completed step.
    """

    @abstractmethod
    def update(self, record: StepDiagnostics, state: State) -> None:
        """
        Handle a completed step.

        Args:
            record (StepDiagnostics): Diagnostics of the step.
            state (State): The state reached by the step.
        """
        pass  # pragma: no cover


class LoggingObserver(StepObserver):
    """
    Observer that logs every step record at debug level.
    """

    def update(self, record: StepDiagnostics, state: State) -> None:
        if record is None:
            raise AttributeError("Step record cannot be None")
        logging.debug(
            f"Step {record.step}: t={record.time:.6g}, "
            f"energy error={record.energy_error:.3e}, "
            f"multiplier={record.multiplier:.3e}, newton iterations={record.newton_iters}"
        )


class RecordingObserver(StepObserver):
    """
    Observer that keeps every record it sees, in step order.
    """

    def __init__(self):
        self.records: List[StepDiagnostics] = []

    def update(self, record: StepDiagnostics, state: State) -> None:
        if record is None:
            raise AttributeError("Step record cannot be None")
        self.records.append(record)

    @property
    def last_step(self) -> int:
        """Index of the latest record, or 0 before the first one."""
        return self.records[-1].step if self.records else 0


class SnapshotObserver(StepObserver):
    """
    Observer that writes u and v snapshots at requested times.

    A requested time t is written at the first step with |t_step - t| <= tau/2,
    and only once. The paths written so far are kept in `written`.
    """

    def __init__(
        self,
        times: Iterable[float],
        tau: float,
        directory: Union[str, Path],
        prefix: str,
        encoding: str = 'utf-8'
    ):
        """
        Args:
            times (Iterable[float]): Requested snapshot times.
            tau (float): Time step of the run.
            directory (Union[str, Path]): Output directory.
            prefix (str): File name prefix; files end in `_t<time>_u.csv` and `_t<time>_v.csv`.
            encoding (str): Text encoding of the snapshot files.

        Raises:
            ValueError: If tau is not positive.
        """
        if not tau > 0:
            raise ValueError("tau must be positive")
        self.pending: List[float] = sorted(float(t) for t in times)
        self.tau = tau
        self.directory = Path(directory)
        self.prefix = prefix
        self.encoding = encoding
        self.written: List[Path] = []

    def update(self, record: StepDiagnostics, state: State) -> None:
        if record is None:
            raise AttributeError("Step record cannot be None")
        due = [t for t in self.pending if abs(record.time - t) <= self.tau / 2.0]
        for requested in due:
            self.pending.remove(requested)
            self.written.extend(self.write(state, record.time, requested))

    def write(self, state: State, t: float, requested: float) -> List[Path]:
        """
        Write the two snapshot files for one requested time.

        Returns:
            List[Path]: The u and v file paths.
        """
        stem = self.directory / f"{self.prefix}_t{requested:g}"
        paths = emit_snapshot(state, t, stem, self.encoding)
        logging.info(f"Snapshot at t={t:.6g} written to {paths[0]} and {paths[1]}")
        return paths
