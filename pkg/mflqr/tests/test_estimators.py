import math

import numpy as np
import pytest

from mflqr.conf import settings
from mflqr.disturbance import atom
from mflqr.estimators import (
    Problem,
    nominal_risk_offset,
    objective_estimate,
    offset_check,
    optimality_check,
    paired_difference,
    perturb_schedule,
    predictive_variance_check,
    risk_offset,
    z_score,
)
from mflqr.exceptions import ModelException, ShapeException
from mflqr.riccati import solve_mean_field
from mflqr.utils.testing import MfLqrTestCase, benchmark_spec, random_spec


class TestHelpers(MfLqrTestCase):
    def test_z_score(self):
        self.assertEqual(z_score(2.0, 0.5), 4.0)
        self.assertEqual(z_score(0.0, 0.0), 0.0)
        self.assertEqual(z_score(1e-13, 0.0, scale=10.0), 0.0)
        self.assertEqual(z_score(1.0, 0.0), math.inf)
        self.assertEqual(z_score(-1.0, 0.0), -math.inf)

    def test_paired_difference(self):
        estimate = paired_difference([3.0, 5.0, 7.0], [1.0, 2.0, 3.0])
        self.assertAlmostEqual(estimate.mean, 3.0)
        self.assertAlmostEqual(estimate.stderr, 1.0 / math.sqrt(3.0))
        self.assertEqual(paired_difference([1.0], [0.0]).stderr, 0.0)

    def test_offsets(self):
        spec = benchmark_spec(k=10, T=50, lam=0.01)
        self.assertAlmostEqual(nominal_risk_offset(spec), 51 * 10 * 0.01 * -600.0, places=6)
        x0 = np.linspace(8.0, 12.0, 10)
        initial = 0.04 * np.sum(12.0 * x0**2 + 60.0 * x0)
        self.assertAlmostEqual(risk_offset(spec, x0), 50 * 10 * 0.01 * -600.0 - initial, places=6)
        self.assertEqual(risk_offset(spec.with_lambda(0.0), x0), 0.0)

    def test_perturbation(self):
        schedule = solve_mean_field(benchmark_spec(k=3, T=4, lam=0.01))
        perturbed = perturb_schedule(schedule, 0.01, np.random.default_rng(0))
        for K, P in zip(schedule.K + schedule.K_bar + schedule.f, perturbed.K + perturbed.K_bar + perturbed.f):
            ratio = P / K
            self.assertTrue(np.allclose(np.abs(ratio - 1.0), 0.01))
        self.assertIs(perturbed.S, schedule.S)


class TestObjectives(MfLqrTestCase):
    def test_risk_neutral_objectives_coincide(self):
        spec = benchmark_spec(k=6, T=10)
        schedule = solve_mean_field(spec)
        x0 = np.full(6, 10.0)
        a = objective_estimate(spec, schedule, x0, 200, base_seed=4, which=Problem.RISK_AWARE)
        b = objective_estimate(spec, schedule, x0, 200, base_seed=4, which="problem-2")
        self.assertEqual(a, b)

    def test_risk_neutral_offset_is_exact(self):
        spec = benchmark_spec(k=6, T=10)
        report = offset_check(spec, solve_mean_field(spec), np.full(6, 10.0), 100, base_seed=2)
        self.assertEqual(report.difference, 0.0)
        self.assertEqual(report.deviation, 0.0)
        self.assertEqual(report.z, 0.0)
        self.assertTrue(report.passed())

    def test_deterministic_disturbance_offset(self):
        spec = benchmark_spec(k=4, T=5, lam=0.1, disturbance=atom(0.0))
        report = offset_check(spec, solve_mean_field(spec), np.arange(4.0), 20, base_seed=0)
        self.assertEqual(report.expected, 0.0)
        self.assertEqual(report.difference, 0.0)
        self.assertTrue(report.passed())

    def test_offset_within_monte_carlo_error(self):
        spec = benchmark_spec(k=10, T=20, lam=0.01)
        report = offset_check(spec, solve_mean_field(spec), np.full(10, 10.0), 10_000, base_seed=20240101)
        self.assertTrue(report.passed(), msg=f"z={report.z}")
        self.assertNotEqual(report.expected, report.nominal)

    def test_threads_do_not_change_estimates(self):
        spec = benchmark_spec(k=5, T=8, lam=0.1)
        schedule = solve_mean_field(spec)
        a = objective_estimate(spec, schedule, np.ones(5), 600, base_seed=1)
        b = objective_estimate(spec, schedule, np.ones(5), 600, base_seed=1, threads=2)
        self.assertAlmostEqual(a.mean, b.mean, delta=1e-10 * abs(a.mean))

    @pytest.mark.slow
    def test_solved_gains_are_locally_optimal(self):
        spec = benchmark_spec(k=10, T=20, lam=0.01)
        results = optimality_check(spec, solve_mean_field(spec), np.full(10, 10.0), 4000, base_seed=3)
        self.assertEqual(len(results), 8)
        self.assertTrue(all(result.passed for result in results))

    @pytest.mark.slow
    def test_random_specs_are_locally_optimal(self):
        for case in range(20):
            rng = np.random.default_rng(case)
            spec = random_spec(rng)
            x0 = rng.standard_normal((spec.k, spec.n))
            results = optimality_check(
                spec, solve_mean_field(spec), x0, 2000, base_seed=100 + case, rel=0.01, n_perturbations=8
            )
            self.assertEqual(len(results), 8)
            for result in results:
                with self.subTest(case=case, perturbation=result.index):
                    self.assertTrue(result.passed, msg=f"increase={result.increase}, se={result.stderr}")
                    self.assertGreaterEqual(result.increase, -settings.Z_SCORE_LIMIT * result.stderr)


class TestPredictiveVariance(MfLqrTestCase):
    def test_requires_samples(self):
        spec = benchmark_spec(k=2, T=2)
        with self.assertRaises(ModelException) as ctx:
            predictive_variance_check(spec, solve_mean_field(spec), np.ones(2), 9_999)
        self.assertEqual(ctx.exception.type, ModelException.ERRORS.SAMPLES)

    def test_subsystem_range(self):
        spec = benchmark_spec(k=2, T=2)
        with self.assertRaises(ShapeException):
            predictive_variance_check(spec, solve_mean_field(spec), np.ones(2), 10_000, subsystem=2)

    def test_deterministic_disturbance(self):
        spec = benchmark_spec(k=2, T=3, lam=0.1, disturbance=atom(0.0))
        report = predictive_variance_check(spec, solve_mean_field(spec), np.ones(2), 10_000, base_seed=0)
        self.assertEqual(report.times.tolist(), [1, 2, 3])
        self.assertAllClose(report.lhs, np.zeros(3))
        self.assertAllClose(report.rhs, np.zeros(3))
        self.assertEqual(report.max_abs_z, 0.0)
        self.assertTrue(report.passed())

    @pytest.mark.slow
    def test_benchmark_identity(self):
        spec = benchmark_spec(k=10, T=10, lam=0.01)
        report = predictive_variance_check(
            spec, solve_mean_field(spec), np.full(10, 10.0), 100_000, base_seed=20240101, steps=10
        )
        self.assertEqual(report.times.tolist(), list(range(1, 11)))
        self.assertLessEqual(report.max_abs_z, 4.0, msg=f"z={report.z}")
