########################
# Solver Config        #
########################

from dataclasses import dataclass
import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from app.exceptions import ConfigurationError

# Load environment variables from a .env file into the program's environment
load_dotenv()

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


def get_project_root() -> Path:
    """
    Get the project root directory.

    Returns:
        Path: The directory two levels above this file.
    """
    current_file = Path(__file__)
    return current_file.parent.parent


@dataclass
class SolverConfig:
    """
    Solver configuration settings.

    Holds the environment-level settings of the solver: where logs and
    outputs go, the default Newton tolerance and iteration cap, the log level
    and the file encoding. Values come from constructor arguments first, then
    SG_* environment variables, then built-in defaults.
    """

    def __init__(
        self,
        base_dir: Optional[Path] = None,
        newton_tol: Optional[float] = None,
        newton_max_iter: Optional[int] = None,
        log_level: Optional[str] = None,
        default_encoding: Optional[str] = None
    ):
        """
        Initialize configuration with environment variables and defaults.

        Args:
            base_dir (Optional[Path], optional): Base directory for logs and outputs. Defaults to None.
            newton_tol (Optional[float], optional): Default energy residual tolerance. Defaults to None.
            newton_max_iter (Optional[int], optional): Default Newton iteration cap. Defaults to None.
            log_level (Optional[str], optional): Logging level name. Defaults to None.
            default_encoding (Optional[str], optional): Encoding for text outputs. Defaults to None.
        """
        project_root = get_project_root()
        self.base_dir = base_dir or Path(
            os.getenv('SG_BASE_DIR', str(project_root))
        ).resolve()

        try:
            self.newton_tol = newton_tol if newton_tol is not None else float(
                os.getenv('SG_NEWTON_TOL', '1e-14')
            )
        except ValueError as e:
            raise ConfigurationError(f"SG_NEWTON_TOL is not a number: {e}", key='newton_tol') from e

        try:
            self.newton_max_iter = newton_max_iter if newton_max_iter is not None else int(
                os.getenv('SG_NEWTON_MAX_ITER', '50')
            )
        except ValueError as e:
            raise ConfigurationError(
                f"SG_NEWTON_MAX_ITER is not an integer: {e}", key='newton_max_iter'
            ) from e

        self.log_level = (log_level or os.getenv('SG_LOG_LEVEL', 'INFO')).upper()

        self.default_encoding = default_encoding or os.getenv(
            'SG_DEFAULT_ENCODING', 'utf-8'
        )

    @property
    def log_dir(self) -> Path:
        """
        Get log directory path.

        Returns:
            Path: The log directory path.
        """
        return Path(os.getenv(
            'SG_LOG_DIR',
            str(self.base_dir / "logs")
        )).resolve()

    @property
    def log_file(self) -> Path:
        """
        Get log file path.

        Returns:
            Path: The log file path.
        """
        return Path(os.getenv(
            'SG_LOG_FILE',
            str(self.log_dir / "solver.log")
        )).resolve()

    @property
    def output_dir(self) -> Path:
        """
        Get the default directory for diagnostics, snapshots and tables.

        Returns:
            Path: The output directory path.
        """
        return Path(os.getenv(
            'SG_OUTPUT_DIR',
            str(self.base_dir / "output")
        )).resolve()

    def validate(self) -> None:
        """
        Validate configuration settings.

        Raises:
            ConfigurationError: If any configuration parameter is invalid.
        """
        if not self.newton_tol > 0:
            raise ConfigurationError("newton_tol must be positive", key='newton_tol')
        if self.newton_max_iter < 1:
            raise ConfigurationError("newton_max_iter must be at least 1", key='newton_max_iter')
        if self.log_level not in LOG_LEVELS:
            raise ConfigurationError(
                f"log_level must be one of {', '.join(LOG_LEVELS)}", key='log_level'
            )


def setup_logging(config: SolverConfig) -> None:
    """
    Configure the logging system.

    Sets up logging to the configured file with a fixed format.

    Args:
        config (SolverConfig): Settings providing the log file and level.
    """
    try:
        os.makedirs(config.log_dir, exist_ok=True)
        log_file = config.log_file.resolve()
        logging.basicConfig(
            filename=str(log_file),
            level=getattr(logging, config.log_level),
            format='%(asctime)s - %(levelname)s - %(message)s',
            force=True
        )
        logging.info(f"Logging initialized at: {log_file}")
    except Exception as e:
        print(f"Error setting up logging: {e}")
        raise
