"""Hybrid-loop tests: optimizer roles, objective modes, accounting."""

from pathlib import Path

import numpy as np
import pytest

from vsqs.evolve import IntegratorConfig, initial_ground_state
from vsqs.operators import exact_ground, expectation
from vsqs.optimize import (
    GRADIENT,
    MODE_ENERGY,
    MODE_NEG_SUCCESS,
    SIMPLEX,
    ObjectiveEvaluator,
    OptimizerConfig,
    initial_params,
    minimize,
    objective,
    run_vsqs,
    spec_for_problem,
    time_accounting,
)
from vsqs.problems import load_problem
from vsqs.schedule import ScheduleSpec

DATA = Path(__file__).resolve().parent.parent / "data"
CHEMICAL_ACCURACY = 1.5936e-3


@pytest.fixture(scope="module")
def h2():
    return load_problem(DATA / "h2_d1.00.ham")


@pytest.fixture(scope="module")
def h2_ground(h2):
    return exact_ground(h2.h_fin).ground_energy


class TestMinimize:
    @pytest.mark.parametrize("method", [GRADIENT, SIMPLEX])
    def test_quadratic_bowl(self, method):
        cfg = OptimizerConfig(
            method=method,
            tolerance=1e-10 if method == GRADIENT else 1e-7,
            bounds=((-1.0, 1.0),),
        )
        run = minimize(lambda x: (x[0] - 0.3) ** 2, np.array([0.9]), cfg)
        assert run.best_params[0] == pytest.approx(0.3, abs=1e-4)
        assert run.converged

    @pytest.mark.parametrize("method", [GRADIENT, SIMPLEX])
    def test_bound_feasibility(self, method):
        # optimum outside the box: every evaluated point must stay inside
        seen = []

        def f(x):
            seen.append(x.copy())
            return float(np.sum((x - 2.0) ** 2))

        cfg = OptimizerConfig(method=method, tolerance=1e-8, bounds=((-1.0, 1.0),) * 2)
        run = minimize(f, np.zeros(2), cfg)
        assert all(np.all(np.abs(x) <= 1.0 + 1e-12) for x in seen)
        np.testing.assert_allclose(run.best_params, [1.0, 1.0], atol=1e-3)

    def test_running_minimum_non_increasing(self):
        rng = np.random.default_rng(0)

        def noisy_bowl(x):
            return float(np.sum(x**2) + 0.01 * rng.normal())

        cfg = OptimizerConfig(
            method=SIMPLEX, tolerance=1e-6, max_iterations=60, bounds=((-2, 2),) * 3
        )
        run = minimize(noisy_bowl, np.array([1.0, -1.5, 0.5]), cfg)
        running = run.running_minimum()
        assert np.all(np.diff(running) <= 0.0 + 1e-15)

    def test_max_iterations_reports_not_converged(self):
        cfg = OptimizerConfig(
            method=SIMPLEX, tolerance=1e-14, max_iterations=5, bounds=((-5, 5),) * 4
        )
        run = minimize(lambda x: float(np.sum(x**2)), np.full(4, 3.0), cfg)
        assert not run.converged
        assert np.isfinite(run.best_objective)  # best-so-far still returned

    def test_initial_point_outside_bounds_rejected(self):
        cfg = OptimizerConfig(bounds=((-1.0, 1.0),))
        with pytest.raises(ValueError, match="bounds"):
            minimize(lambda x: 0.0, np.array([2.0]), cfg)

    def test_gradient_batch_matches_serial(self):
        calls = {"batch": 0}

        def f(x):
            return float((x[0] - 0.4) ** 2 + (x[1] + 0.2) ** 2)

        def batch(xs):
            calls["batch"] += 1
            return [f(x) for x in xs]

        cfg = OptimizerConfig(method=GRADIENT, tolerance=1e-12, bounds=((-1, 1),) * 2)
        run = minimize(f, np.zeros(2), cfg, batch_fn=batch)
        assert calls["batch"] > 0
        np.testing.assert_allclose(run.best_params, [0.4, -0.2], atol=1e-5)


class TestObjective:
    def test_t_zero_returns_initial_energy(self, h2):
        spec = spec_for_problem(
            h2, split_count=2, initial_groups=1, final_groups=1
        )
        psi0 = initial_ground_state(h2)
        expected = expectation(h2.accurate_h_fin, psi0)
        value = objective(h2, spec, np.zeros(spec.n_params), 0.0, mode=MODE_ENERGY)
        assert value == pytest.approx(expected, abs=1e-12)

    def test_asp_shaped_params_match_standard_run(self, h2, h2_ground):
        # knots on the (t/T)^2 curve reproduce the standard-ASP energy
        spec = spec_for_problem(h2, split_count=5, initial_groups=1, final_groups=1)
        s = spec.split_count
        frac = np.arange(1, s) / s
        params = np.concatenate([1.0 - frac**2, frac**2])
        value = objective(h2, spec, params, 20.0, IntegratorConfig(refinement_tolerance=1e-7))
        # piecewise-linear approximation of the quadratic: stays within CA of exact
        assert value - h2_ground <= CHEMICAL_ACCURACY

    def test_neg_success_mode_range(self, h2):
        spec = spec_for_problem(h2, split_count=2, initial_groups=1, final_groups=1)
        value = objective(
            h2, spec, np.array([0.5, 0.5]), 1.0,
            IntegratorConfig(refinement_tolerance=1e-7), mode=MODE_NEG_SUCCESS,
        )
        assert -1.0 <= value <= 0.0

    def test_variational_floor(self, h2, h2_ground):
        spec = spec_for_problem(h2, split_count=3, initial_groups=1, final_groups=1)
        rng = np.random.default_rng(1)
        for _ in range(5):
            value = objective(
                h2, spec, rng.uniform(-2, 2, spec.n_params), 0.7,
                IntegratorConfig(refinement_tolerance=1e-7),
            )
            assert value >= h2_ground - 1e-9


class TestInitialParams:
    def test_warm_start_near_asp(self):
        spec = ScheduleSpec.build(2, 4, split_count=5, initial_groups=1, final_groups=1)
        params = initial_params(spec, seed=3)
        frac = np.arange(1, 5) / 5
        np.testing.assert_allclose(params[:4], 1.0 - frac**2, atol=0.05)
        np.testing.assert_allclose(params[4:], frac**2, atol=0.05)

    def test_navigator_uniform_init_within_unit(self):
        spec = ScheduleSpec.build(
            1, 1, 4, split_count=4, initial_groups=1, final_groups=1,
            navigator_groups=4,
        )
        params = initial_params(spec, seed=5)
        nav = params[2 * 3:]
        assert np.all(np.abs(nav) <= 1.0)

    def test_seeded_determinism(self):
        spec = ScheduleSpec.build(2, 4, split_count=5, initial_groups=2, final_groups=4)
        np.testing.assert_array_equal(initial_params(spec, 9), initial_params(spec, 9))


class TestRunVsqs:
    def test_s1_degenerates_to_single_evaluation(self, h2):
        # S = 1: no free knots -> fixed linear schedule, one evaluation
        spec = spec_for_problem(h2, split_count=1, initial_groups=1, final_groups=1)
        assert spec.n_params == 0
        run, final = run_vsqs(h2, spec, 1.0, integrator_cfg=IntegratorConfig(refinement_tolerance=1e-7))
        assert run.evaluations == 1
        assert run.converged
        assert np.isfinite(final.energy)

    def test_h2_t_half_reaches_chemical_accuracy(self, h2, h2_ground):
        spec = spec_for_problem(
            h2, split_count=5, initial_groups=1, final_groups=1, amplitude_bound=10.0
        )
        ocfg = OptimizerConfig(
            method=GRADIENT, tolerance=1e-6, max_iterations=200,
            finite_difference_step=1e-4,
        )
        run, final = run_vsqs(
            h2, spec, 0.5, ocfg, IntegratorConfig(refinement_tolerance=1e-7),
            seed=7, navigator_init="zero",
        )
        assert final.energy - h2_ground <= CHEMICAL_ACCURACY
        assert final.norm_drift < 1e-7

    def test_initialization_independence(self, h2, h2_ground):
        # two distinct seeds agree within chemical accuracy at T >= 0.3
        spec = spec_for_problem(
            h2, split_count=5, initial_groups=1, final_groups=1, amplitude_bound=10.0
        )
        ocfg = OptimizerConfig(
            method=GRADIENT, tolerance=1e-6, max_iterations=200,
            finite_difference_step=1e-4,
        )
        energies = []
        for seed in (3, 11):
            _, final = run_vsqs(
                h2, spec, 0.4, ocfg, IntegratorConfig(refinement_tolerance=1e-7),
                seed=seed, navigator_init="zero",
            )
            energies.append(final.energy)
        assert abs(energies[0] - energies[1]) <= CHEMICAL_ACCURACY

    def test_bound_feasibility_of_best_params(self, h2):
        spec = spec_for_problem(
            h2, split_count=5, initial_groups=1, final_groups=1, amplitude_bound=1.0
        )
        ocfg = OptimizerConfig(
            method=GRADIENT, tolerance=1e-6, max_iterations=100,
            finite_difference_step=1e-4,
        )
        run, _ = run_vsqs(
            h2, spec, 0.5, ocfg, IntegratorConfig(refinement_tolerance=1e-7), seed=1,
            navigator_init="zero",
        )
        assert np.all(np.abs(run.best_params) <= 1.0 + 1e-12)


class TestTimeAccounting:
    def test_half_to_99(self):
        acc = time_accounting(0.5, 1.0, 0, 1, 0.99)
        assert acc.N_add == 7

    def test_paper_numbers(self):
        # p = 0.759, T = 1.0, N_opt = 24 -> N_add = 4, total = 24M + 4
        for m in (1, 10, 100):
            acc = time_accounting(0.759, 1.0, 24, m, 0.99)
            assert acc.N_add == 4
            assert acc.total_anneal_time == pytest.approx(24 * m + 4)
            assert acc.achieved_probability >= 0.99

    def test_p_above_target(self):
        assert time_accounting(0.999, 2.0, 5, 3, 0.99).N_add == 1

    def test_invariant_achieved_probability(self):
        acc = time_accounting(0.3, 1.5, 10, 2, 0.9)
        assert acc.achieved_probability == pytest.approx(
            1.0 - (1.0 - 0.3) ** acc.N_add
        )
        # minimality
        assert 1.0 - (1.0 - 0.3) ** (acc.N_add - 1) < 0.9

    def test_zero_p_rejected(self):
        with pytest.raises(ValueError, match="p_single"):
            time_accounting(0.0, 1.0, 1, 1, 0.99)


class TestEvaluatorBatch:
    def test_batch_consistency_with_serial(self, h2):
        spec = spec_for_problem(h2, split_count=4, initial_groups=1, final_groups=2)
        ev = ObjectiveEvaluator(
            h2, spec, 1.0, IntegratorConfig(refinement_tolerance=1e-7), MODE_ENERGY
        )
        rng = np.random.default_rng(2)
        probes = [rng.uniform(-1, 1, spec.n_params) for _ in range(4)]
        ev(probes[0])  # freeze step count
        batch = ev.batch(probes)
        serial = [ev(p) for p in probes]
        np.testing.assert_allclose(batch, serial, atol=1e-9)
