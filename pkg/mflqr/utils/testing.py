import unittest

import numpy as np

from mflqr.disturbance import DiscreteDisturbance, bernoulli_shifted
from mflqr.logger import LogLevels, disable_logger, enable_logger, set_log_level
from mflqr.pbd import PseudoBlockMatrix, phi
from mflqr.system import SystemSpec


class MfLqrTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        set_log_level(LogLevels.DEBUG)
        enable_logger()

    @classmethod
    def tearDownClass(cls):
        set_log_level(LogLevels.INFO)
        disable_logger()

    def assertAllClose(self, actual, expected, rtol=1e-10, atol=1e-12, msg=None):
        np.testing.assert_allclose(np.asarray(actual), np.asarray(expected), rtol=rtol, atol=atol, err_msg=msg or "")


def benchmark_spec(k: int = 250, T: int = 50, lam: float = 0.0, disturbance: DiscreteDisturbance | None = None):
    """Scalar benchmark: A=1.1, B=0.3, C=0.2, P=0.4, Q=0.8, R=1.2 with ``10(Bernoulli(0.25) − 0.25)`` noise."""
    return SystemSpec.create(
        k, T, 1.1, 0.3, 0.2, 0.4, 0.8, 1.2, disturbance if disturbance is not None else bernoulli_shifted(), lam=lam
    )


def random_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols))


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    L = rng.standard_normal((n, rank or n))
    return L @ L.T / n


def random_pd(rng: np.random.Generator, n: int) -> np.ndarray:
    return random_psd(rng, n) + 0.5 * np.eye(n)


def random_pbm(rng: np.random.Generator, k: int, rows: int, cols: int) -> PseudoBlockMatrix:
    return phi(k, random_matrix(rng, rows, cols), random_matrix(rng, rows, cols))


def random_disturbance(rng: np.random.Generator, n: int, atoms: int | None = None) -> DiscreteDisturbance:
    atoms = atoms or int(rng.integers(2, 5))
    probs = rng.uniform(0.1, 1.0, atoms)
    return DiscreteDisturbance(rng.standard_normal((atoms, n)), probs / probs.sum())


def random_spec(
    rng: np.random.Generator,
    k: int | None = None,
    n: int | None = None,
    m: int | None = None,
    T: int | None = None,
    lam: float | None = None,
    time_varying: bool = False,
) -> SystemSpec:
    """
    Random small problem: ``n ≤ 3``, ``m ≤ 2``, ``k ∈ {1, 2, 3, 5}``, ``T ≤ 10``,
    ``λ ∈ {0, 0.01, 0.1}`` and a 2 to 4 atom disturbance.
    """
    k = k or int(rng.choice((1, 2, 3, 5)))
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 3))
    T = T or int(rng.integers(1, 11))
    lam = float(rng.choice((0.0, 0.01, 0.1))) if lam is None else lam
    steps = T if time_varying else 1

    def series(make, count):
        values = [make() for _ in range(count)]
        return np.array(values) if time_varying else values[0]

    return SystemSpec.create(
        k,
        T,
        A=series(lambda: 0.5 * random_matrix(rng, n, n), steps),
        B=series(lambda: random_matrix(rng, n, m), steps),
        C=series(lambda: 0.3 * random_matrix(rng, n, n), steps),
        P=series(lambda: random_psd(rng, n), steps + 1 if time_varying else 1),
        Q=series(lambda: random_psd(rng, n), steps + 1 if time_varying else 1),
        R=series(lambda: random_pd(rng, m), steps),
        disturbance=random_disturbance(rng, n),
        lam=lam,
    )
