########################
# Command Line         #
########################

import argparse
import logging
from pathlib import Path
from typing import List, Optional

from colorama import Fore, Style, init

from app.commands import (
    COLORS,
    Command,
    CommandRegistry,
    ConvergenceCommand,
    ListCasesCommand,
    RunCommand,
)
from app.exceptions import (
    ConfigurationError,
    NumericalError,
    OutputError,
    SolverError,
    ValidationError,
)
from app.grid import Family
from app.integrators import Scheme
from app.model import GChoice
from app.outputs import emit_diagnostics, emit_snapshot
from app.run_config import RunConfig, parse_config
from app.solver_config import SolverConfig, setup_logging

# Initialize colorama for cross-platform color support
init(autoreset=True)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_OUTPUT = 4

__all__ = [
    'RunConfig', 'parse_config', 'emit_diagnostics', 'emit_snapshot',
    'format_command_overview', 'build_parser', 'build_command', 'main',
]


def format_command_overview(registry: CommandRegistry) -> str:
    """Sub-commands grouped by category, as shown below the usage text."""
    lines = []
    for category, commands in registry.get_commands_by_category().items():
        lines.append(f"{category}:")
        lines.extend(f"  {cmd['name']:<13}{cmd['description']}" for cmd in commands)
    return "\n".join(lines)


def build_parser(registry: Optional[CommandRegistry] = None) -> argparse.ArgumentParser:
    """Argument parser with one sub-command per registry entry."""
    registry = registry or CommandRegistry()
    parser = argparse.ArgumentParser(
        prog='sgsolve',
        description="Energy-preserving pseudo-spectral solver for the sine-Gordon equation",
        epilog=format_command_overview(registry),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help=registry.get_command_info('run')['description'])
    run.add_argument('--config', required=True, type=Path, help="JSON run configuration")
    run.add_argument('--scheme', choices=[s.value for s in Scheme])
    run.add_argument('--grid', choices=[f.value for f in Family])
    run.add_argument('--g', choices=[g.value for g in GChoice])
    run.add_argument('--nx', type=int)
    run.add_argument('--ny', type=int)
    run.add_argument('--tau', type=float)
    run.add_argument('--t-end', dest='t_end', type=float)
    run.add_argument('--tol', type=float)
    run.add_argument('--out-dir', dest='out_dir')

    conv = sub.add_parser('convergence', help=registry.get_command_info('convergence')['description'])
    conv.add_argument('--case', default='breather')
    conv.add_argument('--axis', choices=['time', 'space'], required=True)
    conv.add_argument('--scheme', choices=[s.value for s in Scheme], required=True)
    conv.add_argument('--grid', choices=[f.value for f in Family], default=Family.MID_POINT.value)
    conv.add_argument('--g', choices=[g.value for g in GChoice], default=GChoice.G1.value)
    conv.add_argument('--levels', type=float, nargs='+', help="tau values (time) or N values (space)")
    conv.add_argument('--tau', type=float, help="Fixed time step of a space study")
    conv.add_argument('--t-end', dest='t_end', type=float, default=1.0)
    conv.add_argument('--nx', type=int, default=256, help="Fixed N of a time study")
    conv.add_argument('--workers', type=int, default=1)
    conv.add_argument('--out-dir', dest='out_dir', type=Path)

    sub.add_parser('list-cases', help=registry.get_command_info('list-cases')['description'])
    return parser


def build_command(args: argparse.Namespace, solver_config: SolverConfig) -> Command:
    """
    Turn parsed arguments into a command object.

    Raises:
        ConfigurationError: If the run configuration is invalid or unreadable.
    """
    if args.command == 'run':
        try:
            source = Path(args.config).read_text(encoding=solver_config.default_encoding)
        except OSError as e:
            raise ConfigurationError(f"Cannot read configuration {args.config}: {e}", key='config') from e
        overrides = {
            key: getattr(args, key)
            for key in ('scheme', 'grid', 'g', 'nx', 'ny', 'tau', 't_end', 'tol', 'out_dir')
        }
        return RunCommand(parse_config(source, overrides, solver_config), solver_config)
    if args.command == 'convergence':
        levels = args.levels
        if levels and args.axis == 'space':
            levels = [int(n) for n in levels]
        return ConvergenceCommand(
            case=args.case,
            axis=args.axis,
            scheme=args.scheme,
            grid=args.grid,
            g=args.g,
            levels=levels,
            out_dir=args.out_dir,
            workers=args.workers,
            tau=args.tau,
            t_end=args.t_end,
            nx=args.nx,
            solver_config=solver_config,
        )
    return ListCasesCommand()


def _report(label: str, error: Exception) -> None:
    print(f"{COLORS['error']}{label}: {error}{Style.RESET_ALL}")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command-line entry point.

    Returns:
        int: 0 on success, 2 for configuration errors, 3 for numerical
        failures and 4 for I/O errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG

    try:
        solver_config = SolverConfig()
        solver_config.validate()
        setup_logging(solver_config)
    except ConfigurationError as e:
        _report("Configuration error", e)
        return EXIT_CONFIG
    except OSError as e:
        _report("Cannot set up logging", e)
        return EXIT_OUTPUT

    try:
        command = build_command(args, solver_config)
        logging.info(f"Executing {command.get_category().lower()} command: {command.get_description()}")
        return command.execute()
    except (ConfigurationError, ValidationError) as e:
        logging.error(f"Configuration error: {e}")
        _report("Configuration error", e)
        return EXIT_CONFIG
    except NumericalError as e:
        logging.error(f"Numerical failure: {e}")
        _report("Numerical failure", e)
        return EXIT_NUMERICAL
    except OutputError as e:
        logging.error(f"Output error on {e.path}: {e}")
        _report("Output error", e)
        return EXIT_OUTPUT
    except SolverError as e:
        logging.error(f"Solver error: {e}")
        _report("Error", e)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print(f"\n{Fore.YELLOW}Interrupted{Style.RESET_ALL}")
        return 130
