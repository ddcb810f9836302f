import math
from unittest.mock import Mock, patch

import numpy as np
import pytest

from app.bench import breather_exact, breather_velocity, error_norms, fitted_order, get_case
from app.exceptions import ConfigurationError, StepFailure
from app.grid import Domain, Family, Field, State, make_grid, sample
from app.integrators import (
    ClosureFactory,
    CrankNicolsonClosure,
    EnergyClosure,
    ProjectionClosure,
    Scheme,
    SchemeConfig,
    StepDiagnostics,
    SupplementaryClosure,
    advance_step,
    correct_free,
    predict,
    projection_step,
    run,
    startup_step,
    svm_step,
)
from app.model import GChoice, SGProblem, energy
from app.rootfind import NewtonResult
from app.spectral import laplacian
from tests.conftest import smooth_field

ENERGY_SCHEMES = [Scheme.PEPM, Scheme.SVM]


def conservation_bound(cfg, H0):
    return max(10 * cfg.newton_tol * abs(H0), 1e-11)


@pytest.fixture
def ring_problem():
    return SGProblem(
        domain=Domain(-14.0, 14.0, -14.0, 14.0),
        phi=lambda x, y: 1.0,
        init_u=lambda x, y: 4.0 * np.arctan(np.exp(3.0 - np.sqrt(x ** 2 + y ** 2))),
        init_v=lambda x, y: 0.0,
        name='ring',
    )


@pytest.fixture
def short_breather():
    return SGProblem(
        domain=Domain(-20.0, 20.0, 0.0, 1.0),
        phi=lambda x, y: 1.0,
        init_u=lambda x, y: np.zeros_like(x),
        init_v=lambda x, y: breather_velocity(x),
        exact=lambda x, y, t: breather_exact(x, t),
        name='breather',
    )


class TestSchemeConfig:
    def test_defaults(self):
        cfg = SchemeConfig(scheme='svm')
        assert cfg.scheme is Scheme.SVM
        assert cfg.grid_family is Family.MID_POINT
        assert cfg.g_choice is GChoice.G1
        assert cfg.newton_tol == 1e-14
        assert cfg.newton_max_iter == 50

    @pytest.mark.parametrize("changes, key", [
        ({'tau': 0.0}, 'tau'),
        ({'tau': -0.1}, 'tau'),
        ({'tau': 0.5, 't_end': 0.25}, 't_end'),
        ({'newton_tol': 0.0}, 'newton_tol'),
        ({'newton_max_iter': 0}, 'newton_max_iter'),
        ({'scheme': 'rk4'}, 'scheme'),
        ({'grid_family': 'hex'}, 'grid_family'),
    ])
    def test_invalid(self, changes, key):
        with pytest.raises(ConfigurationError) as info:
            SchemeConfig(**changes)
        assert info.value.key == key

    def test_step_count(self):
        assert SchemeConfig(tau=0.1, t_end=1.0).n_steps == 10
        assert SchemeConfig(tau=0.0125, t_end=1.0).n_steps == 80

    def test_label(self):
        assert SchemeConfig(scheme='pepm', grid_family='regular').label == "PEPM-R"
        assert SchemeConfig(scheme='svm').label == "SVM-M"

    def test_with_changes_revalidates(self):
        cfg = SchemeConfig(tau=0.1)
        assert cfg.with_changes(tau=0.05).tau == 0.05
        with pytest.raises(ConfigurationError):
            cfg.with_changes(tau=-1.0)


class TestStepDiagnostics:
    def test_dict_round_trip(self):
        record = StepDiagnostics(3, 0.03, 1.25, 2e-16, -4e-7, 2)
        assert StepDiagnostics.from_dict(record.to_dict()) == record


class TestPrediction:
    def test_zero_state_is_fixed(self, small_grid):
        zero = Field.zeros(small_grid)
        u_half, v_half = predict(zero, zero, zero, zero, 0.01)
        assert not np.any(u_half.data)
        assert not np.any(v_half.data)

    def test_constant_preserved_without_forcing(self, small_grid):
        u = Field.constant(small_grid, np.pi)
        zero = Field.zeros(small_grid)
        u_half, v_half = predict(u, zero, u, zero, 0.01)
        np.testing.assert_allclose(u_half.data, np.pi, atol=1e-12)
        np.testing.assert_allclose(v_half.data, 0.0, atol=1e-9)

    def test_defining_equations(self, small_grid, rng):
        tau = 0.01
        u, v, u_bar = (smooth_field(small_grid, rng) for _ in range(3))
        phi = sample(lambda x, y: 1.0 + 0.2 * np.cos(x), small_grid)
        u_half, v_half = predict(u, v, u_bar, phi, tau)
        forcing = phi.data * np.sin(u_bar.data)
        lhs = u_half.data - tau ** 2 / 4 * laplacian(u_half).data
        np.testing.assert_allclose(lhs, (u + tau / 2 * v).data - tau ** 2 / 4 * forcing, atol=1e-11)
        np.testing.assert_allclose(v_half.data, 2 / tau * (u_half - u).data, atol=1e-11)


class TestFreeCorrection:
    def test_zero_state(self, small_grid):
        zero = Field.zeros(small_grid)
        u, v = correct_free(zero, zero, zero, zero, 0.01)
        assert not np.any(u.data) and not np.any(v.data)

    def test_defining_equations(self, small_grid, rng):
        tau = 0.01
        u, v, u_half = (smooth_field(small_grid, rng) for _ in range(3))
        phi = Field.constant(small_grid, 1.0)
        u_t, v_t = correct_free(u, v, u_half, phi, tau)
        first = (u_t - u).data / tau - (v_t + v).data / 2
        second = (v_t - v).data / tau - (
            laplacian(u_t + u).data / 2 - np.sin(u_half.data)
        )
        np.testing.assert_allclose(first, 0.0, atol=1e-9)
        np.testing.assert_allclose(second, 0.0, atol=1e-8)

    def test_crank_nicolson_oscillator_per_mode(self, family):
        grid = make_grid(Domain(0.0, np.pi, 0.0, 1.0), family, 16, 1)
        tau = 0.1
        u0 = sample(lambda x, y: np.cos(x) + 0.0 * y, grid)
        zero = Field.zeros(grid)
        u1, v1 = correct_free(u0, zero, u0, zero, tau)
        factor = (1 - tau ** 2 / 4) / (1 + tau ** 2 / 4)
        np.testing.assert_allclose(u1.data, factor * u0.data, atol=1e-12)
        np.testing.assert_allclose(v1.data, 2 / tau * (factor - 1) * u0.data, atol=1e-10)


class TestProjection:
    def test_already_on_level_set(self, small_grid):
        u = Field.zeros(small_grid)
        v = Field.constant(small_grid, 0.7)
        phi = Field.constant(small_grid, 1.0)
        H0 = energy(State(u, v), phi)
        result = projection_step(u, v, phi, H0, SchemeConfig(tau=0.01))
        assert result.multiplier == 0.0
        assert result.iterations == 0
        assert result.state.u is u and result.state.v is v

    def test_rescales_velocity(self, small_grid):
        u = Field.zeros(small_grid)
        v = Field.constant(small_grid, 0.7)
        phi = Field.constant(small_grid, 1.0)
        H0 = energy(State(u, 1.01 * v), phi)
        result = projection_step(u, v, phi, H0, SchemeConfig(tau=0.01))
        assert result.multiplier == pytest.approx(0.01, abs=1e-12)
        assert energy(result.state, phi) == pytest.approx(H0, rel=1e-13)

    def test_reports_newton_residual(self, small_grid):
        u = Field.zeros(small_grid)
        v = Field.constant(small_grid, 0.7)
        phi = Field.constant(small_grid, 1.0)
        H0 = energy(State(u, 1.01 * v), phi)
        cfg = SchemeConfig(tau=0.01)
        result = projection_step(u, v, phi, H0, cfg)
        assert result.iterations >= 1
        assert abs(result.residual) <= cfg.newton_tol * max(1.0, abs(H0))
        assert result.residual == pytest.approx(energy(result.state, phi) - H0, abs=1e-12)

    def test_root_beyond_guard_fails(self, small_grid):
        u = Field.zeros(small_grid)
        v = Field.constant(small_grid, 0.7)
        phi = Field.constant(small_grid, 1.0)
        H0 = energy(State(u, 3.0 * v), phi)
        with pytest.raises(StepFailure, match="did not converge") as info:
            projection_step(u, v, phi, H0, SchemeConfig(tau=0.01))
        assert info.value.iterate == pytest.approx(4.0)

    @patch('logging.error')
    def test_failure_is_logged(self, logging_error_mock, small_grid):
        u = Field.zeros(small_grid)
        v = Field.constant(small_grid, 0.7)
        phi = Field.constant(small_grid, 1.0)
        with pytest.raises(StepFailure):
            projection_step(u, v, phi, 100.0, SchemeConfig(tau=0.01))
        logging_error_mock.assert_called_once()


class TestSupplementaryVariable:
    def test_zero_multiplier_reduces_to_free_correction(self, small_grid, rng):
        cfg = SchemeConfig(scheme=Scheme.SVM, tau=0.01)
        u, v = smooth_field(small_grid, rng), smooth_field(small_grid, rng)
        phi = Field.constant(small_grid, 1.0)
        u_half, v_half = predict(u, v, u, phi, cfg.tau)
        u_t, v_t = correct_free(u, v, u_half, phi, cfg.tau)
        H0 = energy(State(u_t, v_t), phi)
        result = svm_step(u, v, u_half, v_half, phi, H0, cfg)
        assert result.multiplier == 0.0 and result.iterations == 0
        assert abs(result.residual) <= cfg.newton_tol * max(1.0, abs(H0))
        np.testing.assert_allclose(result.state.u.data, u_t.data, atol=1e-13)
        np.testing.assert_allclose(result.state.v.data, v_t.data, atol=1e-13)

    def test_degenerate_direction_fails(self, small_grid):
        cfg = SchemeConfig(scheme=Scheme.SVM, tau=0.01, g_choice=GChoice.G1)
        zero = Field.zeros(small_grid)
        phi = Field.constant(small_grid, 1.0)
        with pytest.raises(StepFailure, match="SVM solve failed"):
            svm_step(zero, zero, zero, zero, phi, 1.0, cfg)

    @pytest.mark.parametrize("g", [GChoice.G1, GChoice.G2])
    def test_energy_constraint(self, short_breather, family, g):
        cfg = SchemeConfig(scheme=Scheme.SVM, grid_family=family, g_choice=g, tau=0.01, t_end=0.01)
        grid = make_grid(short_breather.domain, family, 64, 1)
        state0 = short_breather.initial_state(grid)
        phi = short_breather.sample_phi(grid)
        H0 = energy(state0, phi)
        result = startup_step(state0, phi, cfg, H0)
        assert abs(energy(result.state, phi) - H0) <= conservation_bound(cfg, H0)
        assert abs(result.multiplier) < 1e-2


class TestClosureFactory:
    @pytest.mark.parametrize("scheme, closure_class", [
        (Scheme.PEPM, ProjectionClosure),
        (Scheme.SVM, SupplementaryClosure),
        (Scheme.PC_CN_BASELINE, CrankNicolsonClosure),
        ('baseline', CrankNicolsonClosure),
    ])
    def test_create_closure(self, scheme, closure_class):
        assert isinstance(ClosureFactory.create_closure(scheme), closure_class)

    def test_register_rejects_non_closure(self):
        class NotAClosure:
            pass

        with pytest.raises(TypeError, match="must inherit from EnergyClosure"):
            ClosureFactory.register_closure(Scheme.PEPM, NotAClosure)

    def test_register_replaces_closure(self):
        class DoubleProjection(ProjectionClosure):
            pass

        original = ClosureFactory._closures[Scheme.PEPM]
        try:
            ClosureFactory.register_closure(Scheme.PEPM, DoubleProjection)
            assert isinstance(ClosureFactory.create_closure(Scheme.PEPM), DoubleProjection)
        finally:
            ClosureFactory.register_closure(Scheme.PEPM, original)

    def test_closure_str(self):
        assert str(ProjectionClosure()) == "ProjectionClosure"
        assert issubclass(SupplementaryClosure, EnergyClosure)


class TestStartup:
    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_zero_data(self, small_grid, scheme):
        zero = Field.zeros(small_grid)
        result = startup_step(State(zero, zero), zero, SchemeConfig(scheme=scheme))
        assert not np.any(result.state.u.data)
        assert not np.any(result.state.v.data)
        assert result.multiplier == 0.0

    @pytest.mark.parametrize("scheme", ENERGY_SCHEMES)
    def test_energy_after_first_step(self, short_breather, family, scheme):
        cfg = SchemeConfig(scheme=scheme, grid_family=family, tau=0.01, t_end=0.01)
        grid = make_grid(short_breather.domain, family, 64, 1)
        state0 = short_breather.initial_state(grid)
        phi = short_breather.sample_phi(grid)
        H0 = energy(state0, phi)
        result = startup_step(state0, phi, cfg)
        assert abs(energy(result.state, phi) - H0) <= conservation_bound(cfg, H0)

    def test_local_error_is_third_order(self, short_breather):
        grid = make_grid(short_breather.domain, Family.MID_POINT, 128, 1)
        phi = short_breather.sample_phi(grid)
        state0 = short_breather.initial_state(grid)
        errors = []
        for tau in (0.02, 0.01):
            cfg = SchemeConfig(scheme=Scheme.PEPM, tau=tau, t_end=tau)
            result = startup_step(state0, phi, cfg)
            _, linf = error_norms(result.state.u, short_breather.exact, tau)
            errors.append(linf)
        assert math.log2(errors[0] / errors[1]) > 2.5


class TestAdvance:
    def test_uses_extrapolated_prediction(self, small_grid, rng):
        cfg = SchemeConfig(scheme=Scheme.PC_CN_BASELINE, tau=0.01)
        u_prev, u, v = (smooth_field(small_grid, rng) for _ in range(3))
        phi = Field.constant(small_grid, 1.0)
        result = advance_step(u_prev, u, v, phi, 0.0, cfg)
        u_half, _ = predict(u, v, 1.5 * u - 0.5 * u_prev, phi, cfg.tau)
        expected, _ = correct_free(u, v, u_half, phi, cfg.tau)
        np.testing.assert_array_equal(result.state.u.data, expected.data)


class TestRun:
    def test_single_step_matches_startup(self, short_breather):
        cfg = SchemeConfig(scheme=Scheme.PEPM, tau=0.01, t_end=0.01)
        final, records = run(short_breather, cfg, 64, 1)
        grid = make_grid(short_breather.domain, Family.MID_POINT, 64, 1)
        first = startup_step(short_breather.initial_state(grid), short_breather.sample_phi(grid), cfg)
        np.testing.assert_array_equal(final.u.data, first.state.u.data)
        np.testing.assert_array_equal(final.v.data, first.state.v.data)
        assert [r.step for r in records] == [0, 1]
        assert records[1].multiplier == first.multiplier

    def test_records_and_observers(self, short_breather):
        cfg = SchemeConfig(scheme=Scheme.SVM, tau=0.05, t_end=0.5)
        observer = Mock()
        _, records = run(short_breather, cfg, 32, 1, [observer])
        assert len(records) == 11
        assert records[0].energy_error == 0.0
        assert records[-1].time == pytest.approx(0.5)
        assert observer.update.call_count == 11
        first_record, first_state = observer.update.call_args_list[0].args
        assert first_record.step == 0
        assert isinstance(first_state, State)

    @pytest.mark.parametrize("scheme", ENERGY_SCHEMES)
    def test_repeated_runs_are_bit_identical(self, short_breather, scheme):
        cfg = SchemeConfig(scheme=scheme, tau=0.05, t_end=0.5)
        first_state, first_records = run(short_breather, cfg, 32, 1)
        second_state, second_records = run(short_breather, cfg, 32, 1)
        assert first_records == second_records
        np.testing.assert_array_equal(first_state.u.data, second_state.u.data)
        np.testing.assert_array_equal(first_state.v.data, second_state.v.data)

    @pytest.mark.parametrize("scheme", ENERGY_SCHEMES)
    def test_conserves_energy_on_ring(self, ring_problem, family, scheme):
        cfg = SchemeConfig(scheme=scheme, grid_family=family, tau=0.05, t_end=1.0)
        _, records = run(ring_problem, cfg, 32, 32)
        H0 = records[0].energy
        assert max(r.energy_error for r in records) <= conservation_bound(cfg, H0)

    def test_baseline_drifts(self, ring_problem):
        cfg = SchemeConfig(scheme=Scheme.PC_CN_BASELINE, tau=0.05, t_end=1.0)
        _, records = run(ring_problem, cfg, 32, 32)
        assert max(r.energy_error for r in records) > 1e-8
        assert all(r.multiplier == 0.0 for r in records)

    def test_step_failure_carries_diagnostics(self, short_breather):
        cfg = SchemeConfig(scheme=Scheme.PEPM, tau=0.01, t_end=0.05)
        stuck = NewtonResult(root=0.5, iterations=50, residual=1e-3, converged=False)
        with patch('app.integrators.newton_scalar', return_value=stuck):
            with pytest.raises(StepFailure) as info:
                run(short_breather, cfg, 32, 1)
        assert info.value.step == 1
        assert info.value.residual == 1e-3
        assert [r.step for r in info.value.diagnostics] == [0]

    @patch('logging.warning')
    def test_warns_when_t_end_is_not_a_multiple(self, logging_warning_mock, short_breather):
        cfg = SchemeConfig(scheme=Scheme.PC_CN_BASELINE, tau=0.03, t_end=0.1)
        _, records = run(short_breather, cfg, 16, 1)
        assert records[-1].time == pytest.approx(0.09)
        logging_warning_mock.assert_called_once()


@pytest.mark.slow
class TestAccuracy:
    @pytest.mark.parametrize("scheme, family", [
        (Scheme.PEPM, Family.MID_POINT),
        (Scheme.PEPM, Family.REGULAR),
        (Scheme.SVM, Family.MID_POINT),
        (Scheme.SVM, Family.REGULAR),
    ])
    def test_second_order_in_time(self, scheme, family):
        case = get_case('breather')
        taus = [0.1, 0.05, 0.025, 0.0125]
        errors = []
        for tau in taus:
            cfg = SchemeConfig(scheme=scheme, grid_family=family, tau=tau, t_end=1.0)
            final, records = run(case.problem, cfg, 256, 1)
            errors.append(error_norms(final.u, case.problem.exact, records[-1].time)[1])
        assert 1.8 <= fitted_order(taus, errors) <= 2.2

    # The time error dominates at N = 128 and does not depend on the family;
    # both projection runs land on the regular-grid reference.
    @pytest.mark.parametrize("scheme, family, row", [
        (Scheme.PEPM, Family.MID_POINT, 'pepm-regular l2'),
        (Scheme.SVM, Family.MID_POINT, 'svm-mid l2'),
        (Scheme.PEPM, Family.REGULAR, 'pepm-regular l2'),
        (Scheme.SVM, Family.REGULAR, 'svm-regular l2'),
    ])
    def test_breather_at_t_10(self, scheme, family, row):
        case = get_case('breather')
        cfg = SchemeConfig(scheme=scheme, grid_family=family, tau=0.01, t_end=10.0)
        final, records = run(case.problem, cfg, 128, 1)
        l2, _ = error_norms(final.u, case.problem.exact, records[-1].time)
        reference = case.reference(row)
        assert reference / 2 <= l2 <= reference * 2
