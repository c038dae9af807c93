import numpy as np

from mflqr.disturbance import atom
from mflqr.exceptions import ModelException
from mflqr.metrics import STATISTICS, EnergyMetricCollector
from mflqr.riccati import solve_mean_field
from mflqr.simulation import ensemble
from mflqr.utils.testing import MfLqrTestCase, benchmark_spec


class TestEnsembleStats(MfLqrTestCase):
    def test_single_run_bands_collapse(self):
        spec = benchmark_spec(k=5, T=6, lam=0.01)
        stats = ensemble(spec, solve_mean_field(spec), np.full(5, 10.0), n_runs=1, base_seed=3)
        self.assertEqual(stats.n_runs, 1)
        for name in STATISTICS:
            with self.subTest(name=name):
                band = stats.per_time[name]
                self.assertAllClose(band.lower, band.mean)
                self.assertAllClose(band.upper, band.mean)
                self.assertAlmostEqual(stats.time_average[name].lower, stats.time_average[name].mean)

    def test_deterministic_runs_have_zero_width(self):
        spec = benchmark_spec(k=4, T=5, disturbance=atom(0.0))
        stats = ensemble(spec, solve_mean_field(spec), np.arange(4.0), n_runs=17, base_seed=0)
        for name in STATISTICS:
            band = stats.per_time[name]
            self.assertAllClose(band.upper - band.lower, np.zeros_like(band.mean), atol=1e-12)

    def test_fixed_seed_determinism(self):
        spec = benchmark_spec(k=6, T=8, lam=0.1)
        schedule = solve_mean_field(spec)
        a = ensemble(spec, schedule, np.full(6, 10.0), n_runs=40, base_seed=99)
        b = ensemble(spec, schedule, np.full(6, 10.0), n_runs=40, base_seed=99)
        for name in STATISTICS:
            self.assertTrue(np.array_equal(a.per_time[name].mean, b.per_time[name].mean))
            self.assertTrue(np.array_equal(a.per_time[name].upper, b.per_time[name].upper))
            self.assertTrue(np.array_equal(a.samples[name], b.samples[name]))

    def test_shapes_and_ordering(self):
        spec = benchmark_spec(k=8, T=7)
        stats = ensemble(spec, solve_mean_field(spec), np.full(8, 10.0), n_runs=30, base_seed=1, quantiles=(0.1, 0.9))
        self.assertEqual(stats.quantiles, (0.1, 0.9))
        self.assertEqual(stats.per_time["x_avg"].mean.shape, (8,))
        self.assertEqual(stats.per_time["u_max"].mean.shape, (7,))
        self.assertEqual(stats.samples["x_max"].shape, (30,))
        self.assertTrue(np.all(stats.per_time["x_max"].mean >= stats.per_time["x_avg"].mean))
        self.assertTrue(np.all(stats.per_time["u_max"].mean >= stats.per_time["u_avg"].mean))
        for name in STATISTICS:
            band = stats.per_time[name]
            self.assertTrue(np.all(band.lower <= band.upper))

    def test_empty_collector(self):
        with self.assertRaises(ModelException):
            EnergyMetricCollector().make_report()
