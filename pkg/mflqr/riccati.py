"""
Backward Riccati recursions for the risk-aware mean-field coupled LQR problem.

Two solvers produce the same optimal control:

* :func:`solve_centralized` runs the classic recursion with an affine term on
  the dense (nk)-dimensional stacked problem. It is quadratic in ``k`` and is
  kept as an independent oracle.
* :func:`solve_mean_field` runs two n-dimensional recursions, one for the
  deviation of a subsystem from the mean field (``A``, ``Q + Qλ``) and one for
  the mean field itself (``Ā``, ``Q̄ + Qλ``), plus the affine term. Its cost
  does not depend on ``k``.

:func:`reconstruct_centralized` maps the second solution onto the first
through ``S̃ₜ = φ_k(Sₜ, S̄ₜ)``, ``K̃ₜ = φ_k(Kₜ, K̄ₜ)``, ``g̃ₜ = 1_k ⊗ gₜ`` and
``f̃ₜ = 1_k ⊗ fₜ``. The resulting control of subsystem ``i`` is

    uᵢₜ = Kₜ xᵢₜ + (K̄ₜ − Kₜ) x̄ₜ + fₜ.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from mflqr import pbd
from mflqr.conf import settings
from mflqr.exceptions import LinAlgErrorMsg, ModelException, NumericalException, ShapeException
from mflqr.logger import logger
from mflqr.pbd import PseudoBlockMatrix
from mflqr.system import SystemSpec, build_centralized, risk_augmentation
from mflqr.utils.linalg import as_vector, min_eigenvalue, symmetrize


@dataclass(frozen=True)
class MeanFieldGainSchedule:
    """
    Solution of the decoupled recursion.

    ``S``, ``S_bar`` and ``g`` have ``T + 1`` entries; ``K``, ``K_bar`` and
    ``f`` have ``T``.
    """

    S: tuple
    S_bar: tuple
    g: tuple
    K: tuple
    K_bar: tuple
    f: tuple

    @property
    def T(self) -> int:
        return len(self.K)

    def control(self, t: int, x_i, xbar) -> np.ndarray:
        return control(self, t, x_i, xbar)

    def centralized(self, k: int) -> "CentralizedGainSchedule":
        return reconstruct_centralized(self, k)


@dataclass(frozen=True)
class CentralizedGainSchedule:
    """
    Solution of the stacked recursion.

    ``S`` and ``K`` entries are dense arrays when produced by
    :func:`solve_centralized` and :class:`~mflqr.pbd.PseudoBlockMatrix`
    instances when produced by :func:`reconstruct_centralized`; ``g`` and ``f``
    are always stacked vectors.
    """

    k: int
    S: tuple
    g: tuple
    K: tuple
    f: tuple

    @property
    def T(self) -> int:
        return len(self.K)

    def to_dense(self) -> "CentralizedGainSchedule":
        def dense(x):
            return pbd.to_dense(x) if isinstance(x, PseudoBlockMatrix) else np.asarray(x)

        return CentralizedGainSchedule(
            k=self.k,
            S=tuple(dense(s) for s in self.S),
            g=self.g,
            K=tuple(dense(K) for K in self.K),
            f=self.f,
        )


def _factor(gram: np.ndarray, t: int):
    try:
        return scipy.linalg.cho_factor(symmetrize(gram))
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error("Riccati step t={} could not factor R + BᵀSB.", t)
        raise NumericalException(LinAlgErrorMsg.FACTORIZATION, f"t={t}: {e}") from e


def _riccati_step(A, B, R, S_next, Q, t):
    """
    One step of ``S = AᵀSA − AᵀSB(R + BᵀSB)⁻¹BᵀSA + Q``.

    :return: Gain ``K``, the new ``S`` and the Cholesky factor of ``R + BᵀSB``.
    """
    SB = S_next @ B
    factor = _factor(R + B.T @ SB, t)
    K = -scipy.linalg.cho_solve(factor, SB.T @ A)
    S = symmetrize(A.T @ S_next @ A + A.T @ SB @ K + Q)
    return K, S, factor


def _warn_if_indefinite(S: np.ndarray, name: str, t: int):
    tol = settings.SCHEDULE_PSD_ATOL * max(1.0, float(np.max(np.abs(S))))
    if min_eigenvalue(S) < -tol:
        logger.warning("{} at t={} lost positive semidefiniteness.", name, t)


def solve_mean_field(spec: SystemSpec) -> MeanFieldGainSchedule:
    """
    Solve the decoupled recursion.

    Terminal values are ``S_T = Q_T + Qλ_T``, ``S̄_T = Q̄_T + Qλ_T`` and
    ``g_T = bλ_T``. For ``t < T``

    * ``Kₜ``, ``Sₜ`` from the Riccati step on ``(Aₜ, Bₜ, Rₜ, Qₜ + Qλₜ)``,
    * ``K̄ₜ``, ``S̄ₜ`` from the Riccati step on ``(Āₜ, Bₜ, Rₜ, Q̄ₜ + Qλₜ)``,
    * ``fₜ = −(Rₜ + BₜᵀS̄ₜ₊₁Bₜ)⁻¹Bₜᵀ(S̄ₜ₊₁μ + gₜ₊₁/2)``,
    * ``gₜ = (Āₜ + BₜK̄ₜ)ᵀ(2S̄ₜ₊₁μ + gₜ₊₁) + bλₜ``.

    The result does not depend on ``spec.k``.

    :raises NumericalException: If ``R + BᵀSB`` cannot be factored.
    """
    risk = risk_augmentation(spec)
    mu = spec.disturbance.mean()
    T = spec.T

    S = [None] * (T + 1)
    S_bar = [None] * (T + 1)
    g = [None] * (T + 1)
    K = [None] * T
    K_bar = [None] * T
    f = [None] * T

    S[T] = symmetrize(spec.Q[T] + risk.Q_lam[T])
    S_bar[T] = symmetrize(spec.Q_bar(T) + risk.Q_lam[T])
    g[T] = np.array(risk.b_lam[T])

    for t in range(T - 1, -1, -1):
        B, R = spec.B[t], spec.R[t]
        A_bar = spec.A_bar(t)
        K[t], S[t], _ = _riccati_step(spec.A[t], B, R, S[t + 1], spec.Q[t] + risk.Q_lam[t], t)
        K_bar[t], S_bar[t], factor = _riccati_step(A_bar, B, R, S_bar[t + 1], spec.Q_bar(t) + risk.Q_lam[t], t)
        f[t] = -scipy.linalg.cho_solve(factor, B.T @ (S_bar[t + 1] @ mu + 0.5 * g[t + 1]))
        g[t] = (A_bar + B @ K_bar[t]).T @ (2.0 * S_bar[t + 1] @ mu + g[t + 1]) + risk.b_lam[t]
        _warn_if_indefinite(S[t], "S", t)
        _warn_if_indefinite(S_bar[t], "S̄", t)
        logger.trace("Mean-field step t={}: |K|={:.3g}, |K̄|={:.3g}", t, np.abs(K[t]).max(), np.abs(K_bar[t]).max())

    logger.debug("Solved mean-field recursion: T={}, n={}, m={}, λ={}", T, spec.n, spec.m, spec.lam)
    return MeanFieldGainSchedule(S=tuple(S), S_bar=tuple(S_bar), g=tuple(g), K=tuple(K), K_bar=tuple(K_bar), f=tuple(f))


def solve_centralized(spec: SystemSpec, force: bool = False) -> CentralizedGainSchedule:
    """
    Solve the stacked recursion on dense (nk)×(nk) matrices.

    Terminal values are ``S̃_T = Q̃λ_T`` and ``g̃_T = 1_k ⊗ bλ_T``. For ``t < T``

    * ``K̃ₜ = −(R̃ₜ + B̃ₜᵀS̃ₜ₊₁B̃ₜ)⁻¹B̃ₜᵀS̃ₜ₊₁Ãₜ``,
    * ``f̃ₜ = −(R̃ₜ + B̃ₜᵀS̃ₜ₊₁B̃ₜ)⁻¹B̃ₜᵀ(S̃ₜ₊₁μ̃ + g̃ₜ₊₁/2)``,
    * ``S̃ₜ = ÃₜᵀS̃ₜ₊₁Ãₜ + ÃₜᵀS̃ₜ₊₁B̃ₜK̃ₜ + Q̃λₜ``,
    * ``g̃ₜ = (Ãₜ + B̃ₜK̃ₜ)ᵀ(2S̃ₜ₊₁μ̃ + g̃ₜ₊₁) + 1_k ⊗ bλₜ``.

    :param force: Skip the ``settings.DENSE_ORACLE_MAX_DIM`` guard on ``nk``.
    :raises ShapeException: If ``nk`` exceeds the guard.
    :raises NumericalException: If ``R̃ + B̃ᵀS̃B̃`` cannot be factored.
    """
    if not force and spec.n * spec.k > settings.DENSE_ORACLE_MAX_DIM:
        raise ShapeException(
            ShapeException.ERRORS.DIMENSION_MISMATCH,
            f"nk={spec.n * spec.k} exceeds DENSE_ORACLE_MAX_DIM={settings.DENSE_ORACLE_MAX_DIM}.",
        )
    system = build_centralized(spec)
    mu = system.stacked_mu()
    T = spec.T

    S = [None] * (T + 1)
    g = [None] * (T + 1)
    K = [None] * T
    f = [None] * T

    S[T] = symmetrize(pbd.to_dense(system.Q_lam[T]))
    g[T] = system.stacked_b_lam(T)

    for t in range(T - 1, -1, -1):
        A = pbd.to_dense(system.A[t])
        B = pbd.to_dense(system.B[t])
        R = pbd.to_dense(system.R[t])
        K[t], S[t], factor = _riccati_step(A, B, R, S[t + 1], pbd.to_dense(system.Q_lam[t]), t)
        f[t] = -scipy.linalg.cho_solve(factor, B.T @ (S[t + 1] @ mu + 0.5 * g[t + 1]))
        g[t] = (A + B @ K[t]).T @ (2.0 * S[t + 1] @ mu + g[t + 1]) + system.stacked_b_lam(t)
        _warn_if_indefinite(S[t], "S̃", t)

    logger.debug("Solved centralized recursion: T={}, nk={}, λ={}", T, spec.n * spec.k, spec.lam)
    return CentralizedGainSchedule(k=spec.k, S=tuple(S), g=tuple(g), K=tuple(K), f=tuple(f))


def reconstruct_centralized(schedule: MeanFieldGainSchedule, k: int) -> CentralizedGainSchedule:
    """Lift a mean-field schedule to the stacked problem with ``k`` subsystems."""
    return CentralizedGainSchedule(
        k=k,
        S=tuple(pbd.phi(k, S, S_bar) for S, S_bar in zip(schedule.S, schedule.S_bar)),
        g=tuple(np.tile(g, k) for g in schedule.g),
        K=tuple(pbd.phi(k, K, K_bar) for K, K_bar in zip(schedule.K, schedule.K_bar)),
        f=tuple(np.tile(f, k) for f in schedule.f),
    )


def _check_time(schedule: MeanFieldGainSchedule, t: int):
    if not 0 <= t < schedule.T:
        raise ModelException(ModelException.ERRORS.TIME_OUT_OF_RANGE, f"t={t}, horizon T={schedule.T}.")


def control(schedule: MeanFieldGainSchedule, t: int, x_i, xbar) -> np.ndarray:
    """
    Optimal input of one subsystem: ``Kₜ xᵢ + (K̄ₜ − Kₜ) x̄ + fₜ``.

    Needs only the subsystem's own state and the mean field.

    :raises ModelException: If ``t`` is outside ``0..T-1``.
    """
    _check_time(schedule, t)
    K, K_bar = schedule.K[t], schedule.K_bar[t]
    return K @ as_vector(x_i, "x_i") + (K_bar - K) @ as_vector(xbar, "xbar") + schedule.f[t]


def control_stacked(schedule: MeanFieldGainSchedule, t: int, xs: np.ndarray) -> np.ndarray:
    """
    :func:`control` applied to every subsystem at once.

    :param xs: States with subsystems on the second to last axis, ``(..., k, n)``.
    :return: Inputs of shape ``(..., k, m)``.
    """
    _check_time(schedule, t)
    K, K_bar = schedule.K[t], schedule.K_bar[t]
    xbar = xs.mean(axis=-2, keepdims=True)
    return xs @ K.T + xbar @ (K_bar - K).T + schedule.f[t]
