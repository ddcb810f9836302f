########################
# Run Outputs          #
########################

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from app.exceptions import OutputError
from app.grid import State, save_field
from app.integrators import StepDiagnostics

DIAGNOSTIC_COLUMNS = ['step', 'time', 'energy', 'energy_error', 'multiplier', 'newton_iters']


def diagnostics_frame(diags: Sequence[StepDiagnostics]) -> pd.DataFrame:
    """Step records as a DataFrame with the diagnostic columns, in order."""
    frame = pd.DataFrame([d.to_dict() for d in diags], columns=DIAGNOSTIC_COLUMNS)
    if frame.empty:
        return frame
    return frame.astype({'step': int, 'newton_iters': int})


def emit_diagnostics(
    diags: Sequence[StepDiagnostics],
    path: Union[str, Path],
    aborted_at: Optional[int] = None,
    encoding: str = 'utf-8'
) -> Path:
    """
    Write step records as CSV with 17 significant digits.

    Args:
        diags (Sequence[StepDiagnostics]): Records to write (may be empty).
        path (Union[str, Path]): Destination file.
        aborted_at (Optional[int]): When set, a trailing `# aborted at step <n>` line is added.
        encoding (str): Text encoding.

    Returns:
        Path: The file written.

    Raises:
        OutputError: If the file cannot be written.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        diagnostics_frame(diags).to_csv(path, index=False, float_format='%.17g', encoding=encoding)
        if aborted_at is not None:
            with open(path, 'a', encoding=encoding) as handle:
                handle.write(f"# aborted at step {aborted_at}\n")
    except OSError as e:
        logging.error(f"Failed to write diagnostics {path}: {e}")
        raise OutputError(f"Failed to write diagnostics: {e}", path) from e
    logging.info(f"Diagnostics ({len(diags)} records) written to {path}")
    return path


def load_diagnostics(path: Union[str, Path], encoding: str = 'utf-8') -> List[StepDiagnostics]:
    """
    Read back a diagnostics file, skipping the abort note if present.

    Raises:
        OutputError: If the file cannot be read.
    """
    try:
        frame = pd.read_csv(path, comment='#', encoding=encoding, float_precision='round_trip')
    except (OSError, pd.errors.ParserError) as e:
        raise OutputError(f"Failed to read diagnostics: {e}", path) from e
    return [StepDiagnostics.from_dict(row) for row in frame.to_dict('records')]


def emit_snapshot(
    state: State,
    t: float,
    path: Union[str, Path],
    encoding: str = 'utf-8'
) -> List[Path]:
    """
    Write u and v as two snapshot files, `<path>_u.csv` and `<path>_v.csv`.

    Returns:
        List[Path]: The u and v file paths.

    Raises:
        OutputError: If a file cannot be written.
    """
    paths = [Path(f"{path}_u.csv"), Path(f"{path}_v.csv")]
    save_field(state.u, t, paths[0], encoding)
    save_field(state.v, t, paths[1], encoding)
    return paths
