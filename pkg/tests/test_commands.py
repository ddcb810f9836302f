from unittest.mock import patch

import pandas as pd
import pytest

from app.commands import (
    DEFAULT_LEVELS,
    CommandRegistry,
    ConvergenceCommand,
    ListCasesCommand,
    RunCommand,
)
from app.exceptions import OutputError, SamplingError, StepFailure, UnsupportedCaseError
from app.grid import Family
from app.integrators import Scheme
from app.outputs import load_diagnostics
from app.rootfind import NewtonResult
from app.run_config import parse_config
from app.solver_config import SolverConfig


@pytest.fixture
def solver_config(tmp_path):
    return SolverConfig(base_dir=tmp_path)


def breather_run(tmp_path, solver_config, **changes):
    data = {
        'case': 'breather', 'scheme': 'pepm', 'nx': 16, 'tau': 0.1, 't_end': 0.3,
        'out_dir': str(tmp_path / "out"),
    }
    data.update(changes)
    return parse_config(data, solver_config=solver_config)


class TestRunCommand:
    def test_writes_diagnostics_and_snapshots(self, tmp_path, solver_config, capsys):
        rc = breather_run(tmp_path, solver_config, snapshot_times=[0.1])
        command = RunCommand(rc, solver_config)
        assert command.execute() == 0
        assert command.diagnostics_path == tmp_path / "out" / "breather_pepm_mid_diagnostics.csv"
        records = load_diagnostics(command.diagnostics_path)
        assert [r.step for r in records] == [0, 1, 2, 3]
        assert (tmp_path / "out" / "breather_pepm_mid_t0.1_u.csv").exists()
        assert (tmp_path / "out" / "breather_pepm_mid_t0.1_v.csv").exists()
        output = capsys.readouterr().out
        assert "3 steps" in output
        assert "PEPM-M" in output

    def test_failure_keeps_partial_diagnostics(self, tmp_path, solver_config):
        rc = breather_run(tmp_path, solver_config)
        command = RunCommand(rc, solver_config)
        stuck = NewtonResult(root=0.5, iterations=50, residual=1e-3, converged=False)
        with patch('app.integrators.newton_scalar', return_value=stuck):
            with pytest.raises(StepFailure):
                command.execute()
        lines = command.diagnostics_path.read_text().splitlines()
        assert len(lines) == 3
        assert lines[-1] == "# aborted at step 1"

    def test_snapshot_write_failure_keeps_partial_diagnostics(self, tmp_path, solver_config, capsys):
        rc = breather_run(tmp_path, solver_config, snapshot_times=[0.1])
        (tmp_path / "out" / "breather_pepm_mid_t0.1_u.csv").mkdir(parents=True)
        command = RunCommand(rc, solver_config)
        with pytest.raises(OutputError):
            command.execute()
        records = load_diagnostics(command.diagnostics_path)
        assert [r.step for r in records] == [0, 1]
        assert command.diagnostics_path.read_text().splitlines()[-1] == "# aborted at step 1"
        assert "Run aborted at step 1" in capsys.readouterr().out

    def test_interrupt_keeps_partial_diagnostics(self, tmp_path, solver_config):
        rc = breather_run(tmp_path, solver_config)
        command = RunCommand(rc, solver_config)
        calls = []

        def interrupt_second_step(*args, **kwargs):
            calls.append(1)
            if len(calls) == 2:
                raise KeyboardInterrupt
            return NewtonResult(root=0.0, iterations=0, residual=0.0, converged=True)

        with patch('app.integrators.newton_scalar', side_effect=interrupt_second_step):
            with pytest.raises(KeyboardInterrupt):
                command.execute()
        assert [r.step for r in load_diagnostics(command.diagnostics_path)] == [0, 1]
        assert command.diagnostics_path.read_text().splitlines()[-1] == "# aborted at step 1"

    def test_failure_before_first_record_writes_nothing(self, tmp_path, solver_config):
        command = RunCommand(breather_run(tmp_path, solver_config), solver_config)
        with patch('app.commands.run', side_effect=SamplingError("Non-finite value", index=(0, 0))):
            with pytest.raises(SamplingError):
                command.execute()
        assert not command.diagnostics_path.exists()

    def test_metadata(self, tmp_path, solver_config):
        command = RunCommand(breather_run(tmp_path, solver_config, scheme='svm'), solver_config)
        assert command.get_description() == "Run breather with svm"
        assert command.get_category() == "Simulation"


class TestConvergenceCommand:
    def test_time_study_table(self, tmp_path, solver_config):
        command = ConvergenceCommand(
            case='breather', axis='time', scheme='svm', levels=[0.1, 0.05],
            out_dir=tmp_path, t_end=0.2, nx=32, solver_config=solver_config,
        )
        assert command.execute() == 0
        assert command.output_path.name == "breather_svm_mid_time_convergence.csv"
        table = pd.read_csv(command.output_path)
        assert list(table['resolution']) == [0.1, 0.05]
        assert pd.isna(table.loc[0, 'order_l2'])

    def test_default_levels(self, solver_config):
        command = ConvergenceCommand(case='breather', axis='space', scheme=Scheme.PEPM,
                                     grid=Family.REGULAR, solver_config=solver_config)
        assert command.levels == DEFAULT_LEVELS['space']
        assert command.tau == 1e-4
        assert command.out_dir == solver_config.output_dir
        assert command.get_description() == "Space convergence of pepm on breather"

    def test_case_without_exact_solution(self, tmp_path, solver_config):
        command = ConvergenceCommand(case='ring', axis='time', scheme='pepm',
                                     out_dir=tmp_path, solver_config=solver_config)
        with pytest.raises(UnsupportedCaseError):
            command.execute()


def test_list_cases(capsys):
    assert ListCasesCommand().execute() == 0
    output = capsys.readouterr().out
    for name in ('breather', 'line_perturbed', 'line_inhomogeneous', 'ring', 'four_ring'):
        assert name in output


class TestCommandRegistry:
    def test_default_commands(self):
        registry = CommandRegistry()
        assert set(registry.commands) == {'run', 'convergence', 'list-cases'}
        assert registry.get_command_info('run')['category'] == 'Simulation'
        assert registry.get_command_info('plot') is None

    def test_categories(self):
        registry = CommandRegistry()
        registry.register_command_metadata('plot', 'Plot a snapshot', 'Information')
        categories = registry.get_commands_by_category()
        assert [c['name'] for c in categories['Information']] == ['list-cases', 'plot']
        assert categories['Studies'][0]['name'] == 'convergence'
