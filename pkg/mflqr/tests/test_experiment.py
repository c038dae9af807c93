from pathlib import Path

import numpy as np

from mflqr.conf import settings
from mflqr.disturbance import bernoulli_shifted
from mflqr.exceptions import ConfigException
from mflqr.experiment import loads_config, parse_config
from mflqr.utils.testing import MfLqrTestCase

CONFIGS = Path(__file__).resolve().parents[2] / "configs"

SYSTEM = """\
[system]
k = 3
T = 4
A = 1.1
B = 0.3
C = 0.2
P = 0.4
Q = 0.8
R = 1.2
"""

DISTURBANCE = """
[disturbance]
kind = "bernoulli_shifted"
scale = 10.0
p = 0.25
"""


class TestShippedConfigs(MfLqrTestCase):
    def test_benchmark(self):
        config = parse_config(CONFIGS / "benchmark.toml")
        self.assertEqual((config.k, config.T), (250, 50))
        self.assertEqual(config.name, "benchmark")
        self.assertEqual(config.base_spec.disturbance, bernoulli_shifted(10.0, 0.25))
        self.assertEqual(config.lambda_grid, (0.0, 0.001, 0.01, 0.1, 1.0))
        self.assertEqual(config.n_runs, 10_000)
        self.assertEqual(config.x0().shape, (250, 1))

    def test_reduced_benchmark(self):
        config = parse_config(CONFIGS / "benchmark_reduced.toml")
        self.assertEqual((config.k, config.T), (50, 50))
        self.assertEqual(config.output_dir, Path("results/benchmark_reduced"))


class TestParsing(MfLqrTestCase):
    def test_defaults(self):
        config = loads_config(SYSTEM + DISTURBANCE)
        self.assertEqual(config.lambda_grid, tuple(settings.DEFAULT_LAMBDA_GRID))
        self.assertEqual(config.n_runs, settings.DEFAULT_N_RUNS)
        self.assertEqual(config.base_seed, settings.DEFAULT_SEED)
        self.assertEqual(config.quantiles, tuple(settings.QUANTILES))
        self.assertEqual(config.threads, 1)
        self.assertEqual(config.name, "experiment")
        self.assertEqual(config.spec(0.1).lam, 0.1)
        self.assertEqual(config.base_spec.lam, 0.0)

    def test_discrete_disturbance_and_matrices(self):
        text = """\
[system]
k = 2
T = 2
A = [[1.0, 0.1], [0.0, 1.0]]
B = [[0.0], [1.0]]
C = {per_step = [[[0.1, 0.0], [0.0, 0.1]], [[0.2, 0.0], [0.0, 0.2]]]}
P = [[0.0, 0.0], [0.0, 0.0]]
Q = [[1.0, 0.0], [0.0, 1.0]]
R = 1.0

[disturbance]
support = [[1.0, 0.0], [-1.0, 0.0]]
probs = [0.5, 0.5]
"""
        spec = loads_config(text).base_spec
        self.assertEqual((spec.n, spec.m), (2, 1))
        self.assertAllClose(spec.C[1], 0.2 * np.eye(2))
        self.assertAllClose(spec.P[0], np.zeros((2, 2)))

    def test_probabilities_must_sum_to_one(self):
        text = SYSTEM + '\n[disturbance]\nkind = "discrete"\nsupport = [1.0, -1.0]\nprobs = [0.5, 0.4]\n'
        with self.assertRaises(ConfigException) as ctx:
            loads_config(text)
        self.assertEqual(ctx.exception.key, "disturbance.probs")
        self.assertEqual(ctx.exception.line, text.splitlines().index("probs = [0.5, 0.4]") + 1)
        self.assertIn("tolerance", str(ctx.exception))

    def test_missing_key(self):
        text = SYSTEM.replace("R = 1.2\n", "") + DISTURBANCE
        with self.assertRaises(ConfigException) as ctx:
            loads_config(text)
        self.assertEqual(ctx.exception.type, ConfigException.ERRORS.MISSING_KEY)
        self.assertEqual(ctx.exception.key, "system.R")
        self.assertEqual(ctx.exception.line, 1)

    def test_missing_section(self):
        with self.assertRaises(ConfigException) as ctx:
            loads_config(SYSTEM)
        self.assertEqual(ctx.exception.key, "disturbance")

    def test_malformed_number(self):
        text = SYSTEM.replace("B = 0.3", 'B = "0.3x"') + DISTURBANCE
        with self.assertRaises(ConfigException) as ctx:
            loads_config(text)
        self.assertEqual(ctx.exception.type, ConfigException.ERRORS.MALFORMED_NUMBER)
        self.assertEqual(ctx.exception.key, "system.B")
        self.assertEqual(ctx.exception.line, 5)
        self.assertIn("line 5", str(ctx.exception))

    def test_unknown_key(self):
        with self.assertRaises(ConfigException) as ctx:
            loads_config(SYSTEM + "D = 1.0\n" + DISTURBANCE)
        self.assertEqual(ctx.exception.type, ConfigException.ERRORS.UNKNOWN_KEY)
        self.assertEqual(ctx.exception.key, "system.D")
        self.assertEqual(ctx.exception.line, 10)
        with self.assertRaises(ConfigException):
            loads_config(SYSTEM + DISTURBANCE + "\n[plots]\nshow = true\n")

    def test_syntax_error(self):
        with self.assertRaises(ConfigException) as ctx:
            loads_config("[system]\nk = 3\nT = = 4\n")
        self.assertEqual(ctx.exception.type, ConfigException.ERRORS.SYNTAX)
        self.assertEqual(ctx.exception.line, 3)

    def test_invariant_violations(self):
        cases = {
            "system.R": SYSTEM.replace("R = 1.2", "R = -1.0") + DISTURBANCE,
            "system.k": SYSTEM.replace("k = 3", "k = 0") + DISTURBANCE,
            "disturbance.p": SYSTEM + DISTURBANCE.replace("p = 0.25", "p = 1.5"),
            "risk.lambda_grid": SYSTEM + DISTURBANCE + "\n[risk]\nlambda_grid = [0.1, 0.0]\n",
            "simulation.quantiles": SYSTEM + DISTURBANCE + "\n[simulation]\nquantiles = [0.9, 0.1]\n",
            "initial_state.mode": SYSTEM + DISTURBANCE + '\n[initial_state]\nmode = "uniform"\n',
        }
        for key, text in cases.items():
            with self.subTest(key=key), self.assertRaises(ConfigException) as ctx:
                loads_config(text)
            self.assertEqual(ctx.exception.key, key)
        with self.assertRaises(ConfigException):
            loads_config(SYSTEM + DISTURBANCE + "\n[risk]\nlambda_grid = [-0.1, 0.0]\n")


class TestInitialStates(MfLqrTestCase):
    def test_normal_draws(self):
        config = loads_config(SYSTEM + DISTURBANCE)
        expected = 10.0 + np.sqrt(2.0) * np.random.default_rng(7).standard_normal((3, 1))
        self.assertAllClose(config.x0(), expected)
        self.assertTrue(np.array_equal(config.x0(), config.x0()))

    def test_standard_deviation_flag(self):
        config = loads_config(SYSTEM + DISTURBANCE + "\n[initial_state]\nvariance = 2.0\nvariance_is_std = true\n")
        expected = 10.0 + 2.0 * np.random.default_rng(7).standard_normal((3, 1))
        self.assertAllClose(config.x0(), expected)

    def test_explicit(self):
        config = loads_config(SYSTEM + DISTURBANCE + '\n[initial_state]\nmode = "explicit"\nvalues = [1.0, 2.0, 3.0]\n')
        self.assertAllClose(config.x0(), [[1.0], [2.0], [3.0]])
        with self.assertRaises(ConfigException) as ctx:
            loads_config(SYSTEM + DISTURBANCE + '\n[initial_state]\nmode = "explicit"\nvalues = [1.0, 2.0]\n')
        self.assertEqual(ctx.exception.key, "initial_state.values")


class TestOverrides(MfLqrTestCase):
    def test_overrides(self):
        config = loads_config(SYSTEM + DISTURBANCE)
        updated = config.override(seed=5, runs=12, out="elsewhere", threads=2, k=7)
        self.assertEqual((updated.base_seed, updated.n_runs, updated.threads, updated.k), (5, 12, 2, 7))
        self.assertEqual(updated.output_dir, Path("elsewhere"))
        self.assertEqual(updated.x0().shape, (7, 1))
        self.assertEqual(config.k, 3)
        self.assertEqual(config.document["system"]["k"], 3)

    def test_no_override_keeps_config(self):
        config = loads_config(SYSTEM + DISTURBANCE)
        self.assertEqual(config.override().fingerprint(), config.fingerprint())

    def test_fingerprint(self):
        a = loads_config(SYSTEM + DISTURBANCE)
        b = loads_config(SYSTEM + DISTURBANCE)
        self.assertEqual(a.fingerprint(), b.fingerprint())
        self.assertEqual(len(a.fingerprint()), 16)
        self.assertNotEqual(a.override(seed=1).fingerprint(), a.fingerprint())

    def test_invalid_overrides(self):
        config = loads_config(SYSTEM + DISTURBANCE)
        with self.assertRaises(ConfigException):
            config.override(runs=0)
        with self.assertRaises(ConfigException):
            config.override(k=0)
