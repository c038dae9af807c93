"""
Problem data of the risk-aware mean-field coupled LQR problem and its centralized form.

Each of the ``k`` identical subsystems evolves as

    xᵢₜ₊₁ = Aₜ xᵢₜ + Bₜ uᵢₜ + Cₜ x̄ₜ + wᵢₜ₊₁

and pays ``x̄ᵀPₜx̄ + xᵢᵀQₜxᵢ`` per state, ``uᵢᵀRₜuᵢ`` per input, and ``λΔ²``
for its state-energy prediction error. Stacking the subsystems gives a single
LQR problem with an affine state cost whose matrices are pseudo-block diagonal
(see :mod:`mflqr.pbd`).
"""

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from mflqr import pbd
from mflqr.conf import settings
from mflqr.disturbance import DiscreteDisturbance
from mflqr.exceptions import ModelException, ShapeException
from mflqr.pbd import PseudoBlockMatrix
from mflqr.utils.linalg import as_matrix, check_pd, check_psd, symmetrize


def _frozen_series(values, count: int, name: str) -> tuple[np.ndarray, ...]:
    """
    Expand a constant matrix or a per-step sequence into ``count`` read-only matrices.

    A value is per-step when it is a 3-D array, or a list/tuple of ``count``
    matrices given with the ``per_step`` wrapper of :func:`per_step`.
    """
    if isinstance(values, PerStep):
        series = [as_matrix(v, f"{name}[{t}]") for t, v in enumerate(values.values)]
    else:
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 3:
            series = [as_matrix(v, f"{name}[{t}]") for t, v in enumerate(arr)]
        else:
            series = [as_matrix(arr, name)] * count
    if len(series) != count:
        raise ShapeException(
            ShapeException.ERRORS.DIMENSION_MISMATCH, f"'{name}' has {len(series)} steps, expected {count}."
        )
    frozen = []
    for matrix in series:
        matrix = np.array(matrix)
        matrix.flags.writeable = False
        frozen.append(matrix)
    return tuple(frozen)


@dataclass(frozen=True)
class PerStep:
    """Marks a sequence of per-step matrices (scalars allowed) for :class:`SystemSpec`."""

    values: Sequence


def per_step(values: Sequence) -> PerStep:
    return PerStep(tuple(values))


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """
    Time-varying data of the problem.

    Matrices are stored as tuples indexed by time: ``A``, ``B``, ``C`` and
    ``R`` for ``t = 0..T-1``; ``P`` and ``Q`` for ``t = 0..T``. Use
    :meth:`create` to build a spec from constant matrices or scalars.

    :ivar k: Number of subsystems.
    :ivar T: Horizon length.
    :ivar lam: Risk parameter ``λ >= 0``.
    :ivar disturbance: Common distribution of every ``wᵢₜ``.
    """

    k: int
    T: int
    A: tuple
    B: tuple
    C: tuple
    P: tuple
    Q: tuple
    R: tuple
    lam: float
    disturbance: DiscreteDisturbance

    def __post_init__(self):
        if isinstance(self.T, bool) or not isinstance(self.T, (int, np.integer)) or self.T < 1:
            raise ModelException(ModelException.ERRORS.HORIZON, f"Got T={self.T!r}.")
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ShapeException(ShapeException.ERRORS.REPLICATION_COUNT, f"Got k={self.k!r}.")
        if not self.lam >= 0.0:
            raise ModelException(ModelException.ERRORS.NEGATIVE_LAMBDA, f"Got λ={self.lam!r}.")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "lam", float(self.lam))

        T = self.T
        for name, count in (("A", T), ("B", T), ("C", T), ("P", T + 1), ("Q", T + 1), ("R", T)):
            object.__setattr__(self, name, _frozen_series(getattr(self, name), count, name))

        n, m = self.B[0].shape
        atol = settings.PSD_ATOL
        for t in range(T):
            if self.A[t].shape != (n, n) or self.C[t].shape != (n, n):
                raise ShapeException(ShapeException.ERRORS.DIMENSION_MISMATCH, f"A or C at t={t} is not {n}×{n}.")
            if self.B[t].shape != (n, m):
                raise ShapeException(ShapeException.ERRORS.DIMENSION_MISMATCH, f"B at t={t} is not {n}×{m}.")
            if self.R[t].shape != (m, m):
                raise ShapeException(ShapeException.ERRORS.DIMENSION_MISMATCH, f"R at t={t} is not {m}×{m}.")
            check_pd(self.R[t], f"R[{t}]", atol)
        for t in range(T + 1):
            if self.P[t].shape != (n, n) or self.Q[t].shape != (n, n):
                raise ShapeException(ShapeException.ERRORS.DIMENSION_MISMATCH, f"P or Q at t={t} is not {n}×{n}.")
            check_psd(self.P[t], f"P[{t}]", atol)
            check_psd(self.Q[t], f"Q[{t}]", atol)
        if self.disturbance.dim != n:
            raise ShapeException(
                ShapeException.ERRORS.DIMENSION_MISMATCH,
                f"Disturbance lives in R^{self.disturbance.dim}, states in R^{n}.",
            )

    @classmethod
    def create(cls, k, T, A, B, C, P, Q, R, disturbance, lam=0.0) -> "SystemSpec":
        """
        Build a spec. Each matrix may be a scalar (1×1 shorthand), a constant
        matrix used at every step, or per-step data wrapped with :func:`per_step`.

        >>> spec = SystemSpec.create(250, 50, 1.1, 0.3, 0.2, 0.4, 0.8, 1.2, bernoulli_shifted())
        """
        return cls(k=k, T=T, A=A, B=B, C=C, P=P, Q=Q, R=R, lam=lam, disturbance=disturbance)

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def m(self) -> int:
        return self.B[0].shape[1]

    def A_bar(self, t: int) -> np.ndarray:
        """Mean-field state matrix ``Āₜ = Aₜ + Cₜ``."""
        return self.A[t] + self.C[t]

    def Q_bar(self, t: int) -> np.ndarray:
        """Mean-field state weight ``Q̄ₜ = Pₜ + Qₜ``."""
        return self.P[t] + self.Q[t]

    def with_lambda(self, lam: float) -> "SystemSpec":
        return replace(self, lam=lam)

    def with_k(self, k: int) -> "SystemSpec":
        return replace(self, k=k)


@dataclass(frozen=True)
class RiskAugmentation:
    """
    Risk terms added to the state cost, for ``t = 0..T``.

    :ivar Q_lam: ``Qλₜ = 4λ Qₜ Σ Qₜ``.
    :ivar b_lam: ``bλₜ = 4λ Qₜ γₜ``.
    """

    Q_lam: tuple
    b_lam: tuple


def risk_augmentation(spec: SystemSpec) -> RiskAugmentation:
    """Compute ``Qλₜ`` and ``bλₜ`` from the disturbance moments at every step."""
    Q_lam, b_lam = [], []
    for t in range(spec.T + 1):
        Q = spec.Q[t]
        moments = spec.disturbance.moments(Q)
        Q_lam.append(symmetrize(4.0 * spec.lam * Q @ moments.sigma @ Q))
        b_lam.append(4.0 * spec.lam * Q @ moments.gamma)
    return RiskAugmentation(tuple(Q_lam), tuple(b_lam))


@dataclass(frozen=True)
class CentralizedSystem:
    """
    Stacked problem over the (nk)-dimensional state, in pseudo-block form.

    :ivar A: ``Ãₜ = φ_k(Aₜ, Āₜ)``.
    :ivar B: ``B̃ₜ = φ_k(Bₜ, Bₜ)``.
    :ivar Q_lam: ``Q̃λₜ = φ_k(Qₜ + Qλₜ, Q̄ₜ + Qλₜ)``.
    :ivar R: ``R̃ₜ = φ_k(Rₜ, Rₜ)``.
    :ivar b_lam: Common block ``bλₜ`` of the replicated ``1_k ⊗ bλₜ``.
    :ivar mu: Common block ``μ`` of the replicated disturbance mean.
    """

    k: int
    A: tuple[PseudoBlockMatrix, ...]
    B: tuple[PseudoBlockMatrix, ...]
    Q_lam: tuple[PseudoBlockMatrix, ...]
    R: tuple[PseudoBlockMatrix, ...]
    b_lam: tuple[np.ndarray, ...]
    mu: np.ndarray

    def stacked_b_lam(self, t: int) -> np.ndarray:
        return np.tile(self.b_lam[t], self.k)

    def stacked_mu(self) -> np.ndarray:
        return np.tile(self.mu, self.k)


def build_centralized(spec: SystemSpec, risk: RiskAugmentation | None = None) -> CentralizedSystem:
    """
    Express the stacked dynamics and costs through :func:`mflqr.pbd.phi`.
    """
    risk = risk or risk_augmentation(spec)
    k, T = spec.k, spec.T
    return CentralizedSystem(
        k=k,
        A=tuple(pbd.phi(k, spec.A[t], spec.A_bar(t)) for t in range(T)),
        B=tuple(pbd.phi(k, spec.B[t], spec.B[t]) for t in range(T)),
        Q_lam=tuple(pbd.phi(k, spec.Q[t] + risk.Q_lam[t], spec.Q_bar(t) + risk.Q_lam[t]) for t in range(T + 1)),
        R=tuple(pbd.phi(k, spec.R[t], spec.R[t]) for t in range(T)),
        b_lam=risk.b_lam,
        mu=spec.disturbance.mean(),
    )
