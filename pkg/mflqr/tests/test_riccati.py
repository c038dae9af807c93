import numpy as np

from mflqr import pbd
from mflqr.disturbance import atom, bernoulli_shifted
from mflqr.exceptions import ModelException, ShapeException
from mflqr.riccati import (
    MeanFieldGainSchedule,
    control,
    control_stacked,
    reconstruct_centralized,
    solve_centralized,
    solve_mean_field,
)
from mflqr.system import SystemSpec
from mflqr.utils.linalg import min_eigenvalue, relative_deviation
from mflqr.utils.testing import MfLqrTestCase, benchmark_spec, random_spec

EQUIVALENCE_CASES = 200


def _scalar_schedule(K, K_bar, f):
    return MeanFieldGainSchedule(
        S=(np.eye(1), np.eye(1)),
        S_bar=(np.eye(1), np.eye(1)),
        g=(np.zeros(1), np.zeros(1)),
        K=(np.array([[K]]),),
        K_bar=(np.array([[K_bar]]),),
        f=(np.array([f]),),
    )


class TestMeanFieldSolver(MfLqrTestCase):
    def test_hand_computed_step(self):
        spec = SystemSpec.create(1, 1, 1.1, 0.3, 0.0, 0.0, 0.8, 1.2, bernoulli_shifted())
        schedule = solve_mean_field(spec)
        self.assertEqual(schedule.T, 1)
        self.assertAllClose(schedule.S[1], [[0.8]])
        self.assertAllClose(schedule.K[0], [[-0.264 / 1.272]])
        self.assertAlmostEqual(float(schedule.K[0][0, 0]), -0.20755, places=5)

    def test_uncoupled_recursions_coincide(self):
        spec = SystemSpec.create(4, 6, 1.1, 0.3, 0.0, 0.0, 0.8, 1.2, bernoulli_shifted(), lam=0.1)
        schedule = solve_mean_field(spec)
        for t in range(spec.T):
            with self.subTest(t=t):
                self.assertAllClose(schedule.K[t], schedule.K_bar[t])
                self.assertAllClose(schedule.S[t], schedule.S_bar[t])

    def test_zero_mean_risk_neutral(self):
        schedule = solve_mean_field(benchmark_spec(k=10, T=8))
        for t in range(8):
            self.assertAllClose(schedule.f[t], [0.0], atol=1e-14)
            self.assertAllClose(schedule.g[t], [0.0], atol=1e-14)

    def test_no_state_cost(self):
        spec = SystemSpec.create(3, 5, 1.1, 0.3, 0.2, 0.0, 0.0, 1.2, bernoulli_shifted())
        schedule = solve_mean_field(spec)
        for K, K_bar in zip(schedule.K, schedule.K_bar):
            self.assertAllClose(K, [[0.0]])
            self.assertAllClose(K_bar, [[0.0]])

    def test_independent_of_k(self):
        spec = benchmark_spec(k=3, T=10, lam=0.01)
        a = solve_mean_field(spec)
        b = solve_mean_field(spec.with_k(250))
        for name in ("S", "S_bar", "g", "K", "K_bar", "f"):
            for x, y in zip(getattr(a, name), getattr(b, name)):
                self.assertTrue(np.array_equal(x, y), msg=name)

    def test_positive_semidefinite(self):
        rng = np.random.default_rng(8)
        for case in range(50):
            spec = random_spec(rng)
            schedule = solve_mean_field(spec)
            with self.subTest(case=case):
                for S in (*schedule.S, *schedule.S_bar):
                    scale = max(1.0, float(np.abs(S).max()))
                    self.assertGreaterEqual(np.linalg.eigvalsh(S).min(), -1e-9 * scale)

    def test_risk_shifts_gains(self):
        neutral = solve_mean_field(benchmark_spec(k=3, T=5))
        averse = solve_mean_field(benchmark_spec(k=3, T=5, lam=0.1))
        self.assertLess(float(averse.K[0][0, 0]), float(neutral.K[0][0, 0]))
        self.assertFalse(np.allclose(averse.f[0], 0.0))

    def test_value_monotone_in_risk(self):
        rng = np.random.default_rng(17)
        for case in range(50):
            spec = random_spec(rng)
            schedules = [solve_mean_field(spec.with_lambda(lam)) for lam in (0.0, 0.01, 0.1)]
            for low, high in zip(schedules, schedules[1:]):
                for name in ("S", "S_bar"):
                    for t, (a, b) in enumerate(zip(getattr(low, name), getattr(high, name))):
                        with self.subTest(case=case, name=name, t=t):
                            scale = max(1.0, float(np.abs(b).max()))
                            self.assertGreaterEqual(min_eigenvalue(b - a), -1e-10 * scale)


class TestCentralizedSolver(MfLqrTestCase):
    def test_hand_computed_step(self):
        spec = SystemSpec.create(1, 1, 1.1, 0.3, 0.0, 0.0, 0.8, 1.2, bernoulli_shifted())
        schedule = solve_centralized(spec)
        self.assertAllClose(schedule.K[0], [[-0.264 / 1.272]])

    def test_zero_mean_risk_neutral(self):
        schedule = solve_centralized(benchmark_spec(k=4, T=6))
        for t in range(6):
            self.assertAllClose(schedule.f[t], np.zeros(4), atol=1e-13)
            self.assertAllClose(schedule.g[t], np.zeros(4), atol=1e-13)

    def test_no_state_cost(self):
        spec = SystemSpec.create(3, 4, 1.1, 0.3, 0.2, 0.0, 0.0, 1.2, bernoulli_shifted())
        for K in solve_centralized(spec).K:
            self.assertAllClose(K, np.zeros((3, 3)))

    def test_dimension_guard(self):
        spec = benchmark_spec(k=65, T=2)
        with self.assertRaises(ShapeException):
            solve_centralized(spec)
        self.assertEqual(solve_centralized(spec, force=True).K[0].shape, (65, 65))


class TestReconstruction(MfLqrTestCase):
    def test_random_equivalence(self):
        rng = np.random.default_rng(2024)
        for case in range(EQUIVALENCE_CASES):
            spec = random_spec(rng, time_varying=bool(case % 2))
            mean_field = reconstruct_centralized(solve_mean_field(spec), spec.k).to_dense()
            centralized = solve_centralized(spec)
            with self.subTest(case=case, k=spec.k, n=spec.n, m=spec.m, T=spec.T, lam=spec.lam):
                for name in ("S", "g", "K", "f"):
                    for x, y in zip(getattr(mean_field, name), getattr(centralized, name)):
                        self.assertLessEqual(relative_deviation(x, y), 1e-8, msg=name)

    def test_benchmark_equivalence(self):
        for lam in (0.0, 0.001, 0.1, 1.0):
            spec = benchmark_spec(k=5, T=50, lam=lam)
            lifted = solve_mean_field(spec).centralized(spec.k).to_dense()
            dense = solve_centralized(spec)
            with self.subTest(lam=lam):
                for x, y in zip(lifted.K + lifted.S, dense.K + dense.S):
                    self.assertLessEqual(relative_deviation(x, y), 1e-8)

    def test_single_subsystem(self):
        schedule = solve_mean_field(benchmark_spec(k=1, T=4, lam=0.01))
        lifted = reconstruct_centralized(schedule, 1).to_dense()
        for S, S_bar in zip(lifted.S, schedule.S_bar):
            self.assertAllClose(S, S_bar)

    def test_uncoupled_is_block_diagonal(self):
        spec = SystemSpec.create(3, 4, 1.1, 0.3, 0.0, 0.0, 0.8, 1.2, bernoulli_shifted(), lam=0.01)
        lifted = reconstruct_centralized(solve_mean_field(spec), 3)
        for X in lifted.K + lifted.S:
            self.assertTrue(pbd.is_block_diagonal(X))

    def test_replicated_affine_terms(self):
        spec = benchmark_spec(k=3, T=3, lam=0.1)
        schedule = solve_mean_field(spec)
        lifted = reconstruct_centralized(schedule, 3)
        self.assertAllClose(lifted.f[0], np.tile(schedule.f[0], 3))
        self.assertAllClose(lifted.g[2], np.tile(schedule.g[2], 3))


class TestControl(MfLqrTestCase):
    def test_scalar_example(self):
        schedule = _scalar_schedule(-0.2, -0.3, 0.1)
        self.assertAllClose(control(schedule, 0, [2.0], [1.0]), [-0.4])
        self.assertAllClose(schedule.control(0, 2.0, 1.0), [-0.4])

    def test_replicated_states(self):
        schedule = _scalar_schedule(-0.2, -0.3, 0.1)
        self.assertAllClose(control(schedule, 0, [1.5], [1.5]), [-0.3 * 1.5 + 0.1])

    def test_uncoupled_gains(self):
        schedule = _scalar_schedule(-0.2, -0.2, 0.0)
        self.assertAllClose(control(schedule, 0, [2.0], [100.0]), [-0.4])

    def test_time_out_of_range(self):
        schedule = _scalar_schedule(-0.2, -0.3, 0.1)
        for t in (-1, 1):
            with self.subTest(t=t), self.assertRaises(ModelException) as ctx:
                control(schedule, t, [1.0], [1.0])
            self.assertEqual(ctx.exception.type, ModelException.ERRORS.TIME_OUT_OF_RANGE)

    def test_stacked_matches_per_subsystem(self):
        rng = np.random.default_rng(11)
        spec = random_spec(rng, k=5, n=3, m=2, T=4, lam=0.01)
        schedule = solve_mean_field(spec)
        xs = rng.standard_normal((7, 5, 3))
        for t in range(spec.T):
            inputs = control_stacked(schedule, t, xs)
            self.assertEqual(inputs.shape, (7, 5, 2))
            for r in range(7):
                xbar = xs[r].mean(axis=0)
                for i in range(5):
                    self.assertAllClose(inputs[r, i], control(schedule, t, xs[r, i], xbar), atol=1e-12)

    def test_matches_centralized_feedback(self):
        spec = SystemSpec.create(4, 3, 1.1, 0.3, 0.2, 0.4, 0.8, 1.2, atom(0.5), lam=0.0)
        schedule = solve_mean_field(spec)
        dense = solve_centralized(spec)
        xs = np.array([[1.0], [-2.0], [0.5], [3.0]])
        for t in range(spec.T):
            stacked = dense.K[t] @ xs.ravel() + dense.f[t]
            self.assertAllClose(control_stacked(schedule, t, xs).ravel(), stacked, atol=1e-10)
