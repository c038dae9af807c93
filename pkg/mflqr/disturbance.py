"""
Finite discrete disturbance models.

Disturbances are i.i.d. across subsystems and time, so a single
:class:`DiscreteDisturbance` describes every ``wᵢₜ``. Its moments are exact
finite sums over the support:

* ``μ = E(w)`` and ``Σ = E(d dᵀ)`` with the centered disturbance ``d = w − μ``,
* ``γ(Q) = E(d dᵀ Q d)``, the skew vector seen through the weight ``Q``,
* ``δ(Q) = E((dᵀ Q d − tr(ΣQ))²)``, the variance of the quadratic form.

Basic usage:

>>> w = bernoulli_shifted(10.0, 0.25)
>>> float(w.covariance()[0, 0])
18.75
>>> w.moments([[0.8]]).delta
300.0

Sampling always goes through a caller owned :class:`numpy.random.Generator`.
"""

import threading
from dataclasses import dataclass, field

import numpy as np

from mflqr.conf import settings
from mflqr.exceptions import ModelException, ShapeException
from mflqr.utils.linalg import as_matrix, as_vector, symmetrize


@dataclass(frozen=True)
class MomentSet:
    """
    Exact moments of a disturbance for one weight matrix ``Q``.

    :ivar mu: Mean ``μ``.
    :ivar sigma: Covariance ``Σ``.
    :ivar gamma: Skew vector ``γ(Q)``.
    :ivar delta: Variance ``δ(Q)`` of ``dᵀQd``.
    :ivar trace_sigma_q: ``tr(ΣQ)``.
    :ivar trace_sigma_q_sq: ``tr((ΣQ)²)``.
    """

    mu: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray
    delta: float
    trace_sigma_q: float
    trace_sigma_q_sq: float

    @property
    def ell(self) -> float:
        """Constant ``δ − 4 tr((ΣQ)²)`` of the predictive variance."""
        return self.delta - 4.0 * self.trace_sigma_q_sq


@dataclass(frozen=True, eq=False)
class DiscreteDisturbance:
    """
    Distribution taking the value ``support[j]`` with probability ``probs[j]``.

    :param support: ``J`` points of ``R^n``; scalars are read as points of ``R^1``.
    :param probs: ``J`` nonnegative probabilities. A sum within
        ``settings.PROBABILITY_SUM_ATOL`` of one is renormalized, anything
        further off is rejected.
    :raises ModelException: On an empty support, ragged points, negative
        probabilities or probabilities that do not sum to one.
    """

    support: np.ndarray
    probs: np.ndarray
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            support = np.array(self.support, dtype=np.float64)
        except ValueError as e:
            raise ModelException(ModelException.ERRORS.SUPPORT_DIMENSION, str(e)) from e
        if support.size == 0:
            raise ModelException(ModelException.ERRORS.EMPTY_SUPPORT)
        if support.ndim == 1:
            support = support.reshape(-1, 1)
        if support.ndim != 2:
            raise ModelException(ModelException.ERRORS.SUPPORT_DIMENSION, f"Got shape {support.shape}.")

        probs = as_vector(self.probs, "probs")
        if probs.shape[0] != support.shape[0]:
            raise ModelException(
                ModelException.ERRORS.SUPPORT_DIMENSION,
                f"{support.shape[0]} support points but {probs.shape[0]} probabilities.",
            )
        if np.any(probs < 0.0):
            raise ModelException(ModelException.ERRORS.NEGATIVE_PROBABILITY)
        total = float(probs.sum())
        if abs(total - 1.0) > settings.PROBABILITY_SUM_ATOL:
            raise ModelException(
                ModelException.ERRORS.PROBABILITY_SUM,
                f"Sum is {total!r}, tolerance {settings.PROBABILITY_SUM_ATOL:g}.",
            )
        probs = probs / total

        support.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.support.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DiscreteDisturbance):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(self.probs, other.probs)

    __hash__ = None

    def mean(self) -> np.ndarray:
        return self.probs @ self.support

    def _centered(self) -> np.ndarray:
        return self.support - self.mean()

    def covariance(self) -> np.ndarray:
        d = self._centered()
        return symmetrize((d * self.probs[:, None]).T @ d)

    def _weight(self, Q) -> np.ndarray:
        Q = as_matrix(Q, "Q")
        if Q.shape != (self.dim, self.dim):
            raise ShapeException(
                ShapeException.ERRORS.DIMENSION_MISMATCH,
                f"Weight of shape {Q.shape} for disturbances in R^{self.dim}.",
            )
        return Q

    def _quadratic_forms(self, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self._centered()
        return d, np.einsum("ji,ik,jk->j", d, Q, d)

    def gamma(self, Q) -> np.ndarray:
        """Skew vector ``E(d dᵀ Q d)``."""
        d, q = self._quadratic_forms(self._weight(Q))
        return (self.probs * q) @ d

    def delta(self, Q) -> float:
        """Variance ``E((dᵀ Q d − tr(ΣQ))²)`` of the quadratic form."""
        Q = self._weight(Q)
        _, q = self._quadratic_forms(Q)
        trace = float(np.trace(self.covariance() @ Q))
        return float(self.probs @ (q - trace) ** 2)

    def moments(self, Q) -> MomentSet:
        """
        All moments for weight ``Q``. Results are cached per distinct ``Q``; concurrent callers
        with the same ``Q`` all receive the first stored :class:`MomentSet`.
        """
        Q = self._weight(Q)
        key = Q.tobytes()
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        sigma = self.covariance()
        sigma_q = sigma @ Q
        moments = MomentSet(
            mu=self.mean(),
            sigma=sigma,
            gamma=self.gamma(Q),
            delta=self.delta(Q),
            trace_sigma_q=float(np.trace(sigma_q)),
            trace_sigma_q_sq=float(np.trace(sigma_q @ sigma_q)),
        )
        with self._lock:
            return self._cache.setdefault(key, moments)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One draw. Same generator state, same sequence."""
        return self.draw(rng, ())

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        """
        Array of i.i.d. draws with shape ``shape + (n,)``.

        :param rng: Generator consumed by the draws.
        :param shape: Leading shape, e.g. ``(T, k)`` for one rollout.
        """
        index = rng.choice(self.n_atoms, size=shape, p=self.probs)
        return self.support[index]

    def scaled(self, c: float) -> "DiscreteDisturbance":
        return DiscreteDisturbance(c * self.support, self.probs)

    def shifted(self, offset) -> "DiscreteDisturbance":
        return DiscreteDisturbance(self.support + as_vector(offset, "offset"), self.probs)


def atom(value) -> DiscreteDisturbance:
    """Degenerate disturbance equal to ``value`` with probability one."""
    return DiscreteDisturbance([as_vector(value, "value")], [1.0])


def bernoulli_shifted(scale: float = 10.0, p: float = 0.25) -> DiscreteDisturbance:
    """
    Scalar disturbance ``scale · (Bernoulli(p) − p)``, zero mean with nonzero skew.
    """
    if not 0.0 < p < 1.0:
        raise ModelException(ModelException.ERRORS.NEGATIVE_PROBABILITY, f"Bernoulli parameter {p!r}.")
    return DiscreteDisturbance([[scale * (1.0 - p)], [-scale * p]], [p, 1.0 - p])
