"""
Monte Carlo estimators over closed-loop ensembles.

Every estimator runs a :class:`~mflqr.simulation.Simulation` with a sample
collecting observer. Comparisons between two arms (solved vs perturbed gains,
risk-aware vs centralized objective) reuse the same ``base_seed``, so both
arms see identical disturbances and are compared run by run.
"""

import math
from dataclasses import dataclass, replace
from enum import StrEnum
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from mflqr.conf import settings
from mflqr.exceptions import ModelException, ShapeException
from mflqr.logger import logger
from mflqr.observers import SimulationObserver
from mflqr.riccati import MeanFieldGainSchedule
from mflqr.simulation import Simulation, initial_states
from mflqr.system import SystemSpec

if TYPE_CHECKING:
    from mflqr.simulation import RolloutBatch


class Problem(StrEnum):
    """Objective estimated by :func:`objective_estimate`."""

    #: ``E(J)``, the risk-aware objective.
    RISK_AWARE = "problem-1"
    #: ``E(Σ cλₜ + cᵘₜ)``, the centralized objective with the affine state cost.
    CENTRALIZED = "problem-2"


class ObjectiveEstimate(NamedTuple):
    mean: float
    stderr: float


def _standard_error(samples: np.ndarray) -> float:
    if samples.shape[0] < 2:
        return 0.0
    return float(np.std(samples, ddof=1) / math.sqrt(samples.shape[0]))


def paired_difference(a: np.ndarray, b: np.ndarray) -> ObjectiveEstimate:
    """Mean and standard error of ``a − b`` for samples paired run by run."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return ObjectiveEstimate(float(np.mean(diff)), _standard_error(diff))


def z_score(deviation: float, stderr: float, scale: float = 1.0) -> float:
    """
    ``deviation / stderr``. A zero standard error gives ``0`` for a deviation
    that is zero up to rounding and ``±inf`` otherwise.
    """
    if stderr > 0.0:
        return deviation / stderr
    if abs(deviation) <= 1e-12 * max(1.0, abs(scale)):
        return 0.0
    return math.copysign(math.inf, deviation)


class CostSampleCollector(SimulationObserver):
    """Keeps the realized risk-aware and centralized objectives of every run."""

    def __init__(self):
        self.risk_aware = np.empty(0)
        self.centralized = np.empty(0)

    def on_simulation_started(self, simulation: "Simulation") -> None:
        self.risk_aware = np.full(simulation.n_runs, np.nan)
        self.centralized = np.full(simulation.n_runs, np.nan)

    def on_batch_finished(self, simulation: "Simulation", first_run: int, batch: "RolloutBatch") -> None:
        rows = slice(first_run, first_run + len(batch))
        self.risk_aware[rows] = batch.total_cost
        self.centralized[rows] = batch.centralized_objective

    def samples(self, which: Problem) -> np.ndarray:
        return self.risk_aware if Problem(which) is Problem.RISK_AWARE else self.centralized


class PredictionErrorCollector(SimulationObserver):
    """
    Keeps, for one subsystem ``i`` and every run and time, the squared
    prediction error ``Δᵢₜ²`` and the quadratic part ``xᵢₜᵀQₜΣQₜxᵢₜ + xᵢₜᵀQₜγₜ``
    of its predicted value.
    """

    def __init__(self, subsystem: int = 0):
        self.subsystem = subsystem
        self.squared_errors = np.empty((0, 0))
        self.quadratic = np.empty((0, 0))
        self._weights = ()

    def on_simulation_started(self, simulation: "Simulation") -> None:
        spec = simulation.spec
        if not 0 <= self.subsystem < spec.k:
            raise ShapeException(ShapeException.ERRORS.BLOCK_COUNT, f"Subsystem {self.subsystem}, k={spec.k}.")
        shape = (simulation.n_runs, spec.T + 1)
        self.squared_errors = np.full(shape, np.nan)
        self.quadratic = np.full(shape, np.nan)
        weights = []
        for Q in spec.Q:
            moments = spec.disturbance.moments(Q)
            weights.append((Q @ moments.sigma @ Q, Q @ moments.gamma))
        self._weights = tuple(weights)

    def on_batch_finished(self, simulation: "Simulation", first_run: int, batch: "RolloutBatch") -> None:
        rows = slice(first_run, first_run + len(batch))
        self.squared_errors[rows] = batch.prediction_errors[:, :, self.subsystem] ** 2
        x = batch.states[:, :, self.subsystem]
        for t, (W, v) in enumerate(self._weights):
            self.quadratic[rows, t] = np.einsum("ri,ij,rj->r", x[:, t], W, x[:, t]) + x[:, t] @ v


@dataclass(frozen=True)
class PredictiveVarianceReport:
    """
    Both sides of ``E(Δₜ²) = 4E(xₜᵀQₜΣQₜxₜ + xₜᵀQₜγₜ) + ℓₜ`` for ``t = 1..``.

    :ivar times: Checked time steps.
    :ivar lhs: Empirical mean of ``Δₜ²``.
    :ivar rhs: Empirical right-hand side.
    :ivar stderr: Standard error of the per-run difference of both sides.
    :ivar z: ``(lhs − rhs) / stderr``.
    """

    subsystem: int
    n_samples: int
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    stderr: np.ndarray
    z: np.ndarray

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z))) if self.z.size else 0.0

    def passed(self, limit: float | None = None) -> bool:
        return self.max_abs_z <= (settings.Z_SCORE_LIMIT if limit is None else limit)


def predictive_variance_check(
    spec: SystemSpec,
    schedule: MeanFieldGainSchedule,
    x0,
    n_samples: int,
    base_seed: int | None = None,
    subsystem: int = 0,
    steps: int | None = None,
    threads: int = 1,
) -> PredictiveVarianceReport:
    """
    Compare the empirical second moment of the prediction error of one
    subsystem with its closed form, for ``t = 1..steps`` (all of ``1..T`` by
    default). ``t = 0`` is skipped: the initial state is deterministic, so
    ``Δ₀ = 0`` and the identity does not apply.

    :raises ModelException: If ``n_samples`` is below ``settings.MIN_VARIANCE_SAMPLES``.
    """
    if n_samples < settings.MIN_VARIANCE_SAMPLES:
        raise ModelException(
            ModelException.ERRORS.SAMPLES, f"n_samples={n_samples} < {settings.MIN_VARIANCE_SAMPLES}."
        )
    last = spec.T if steps is None else min(int(steps), spec.T)
    collector = PredictionErrorCollector(subsystem)
    simulation = Simulation(spec, schedule, x0, n_samples, base_seed, threads)
    simulation.add_observers(collector)
    simulation.run()

    times = np.arange(1, last + 1)
    lhs, rhs, stderr, z = (np.empty(times.shape[0]) for _ in range(4))
    for j, t in enumerate(times):
        ell = spec.disturbance.moments(spec.Q[t]).ell
        squared = collector.squared_errors[:, t]
        predicted = 4.0 * collector.quadratic[:, t] + ell
        lhs[j] = np.mean(squared)
        rhs[j] = np.mean(predicted)
        stderr[j] = _standard_error(squared - predicted)
        z[j] = z_score(lhs[j] - rhs[j], stderr[j], rhs[j])
        logger.debug("Predictive variance t={}: lhs={:.6g}, rhs={:.6g}, z={:.3f}", t, lhs[j], rhs[j], z[j])

    return PredictiveVarianceReport(
        subsystem=subsystem, n_samples=n_samples, times=times, lhs=lhs, rhs=rhs, stderr=stderr, z=z
    )


def _cost_samples(spec, schedule, x0, n_runs, base_seed, threads) -> CostSampleCollector:
    collector = CostSampleCollector()
    simulation = Simulation(spec, schedule, x0, n_runs, base_seed, threads)
    simulation.add_observers(collector)
    simulation.run()
    return collector


def objective_estimate(
    spec: SystemSpec,
    schedule: MeanFieldGainSchedule,
    x0,
    n_runs: int,
    base_seed: int | None = None,
    which: Problem | str = Problem.RISK_AWARE,
    threads: int = 1,
) -> ObjectiveEstimate:
    """Monte Carlo estimate of the risk-aware (``"problem-1"``) or centralized (``"problem-2"``) objective."""
    samples = _cost_samples(spec, schedule, x0, n_runs, base_seed, threads).samples(Problem(which))
    return ObjectiveEstimate(float(np.mean(samples)), _standard_error(samples))


def nominal_risk_offset(spec: SystemSpec) -> float:
    """``Σₜ kλ(δₜ − 4tr((ΣQₜ)²))`` over ``t = 0..T``."""
    return float(sum(spec.k * spec.lam * spec.disturbance.moments(Q).ell for Q in spec.Q))


def risk_offset(spec: SystemSpec, x0) -> float:
    """
    Exact ``E(J) − E(Σ cλₜ + cᵘₜ)`` for the deterministic initial states ``x0``.

    Steps ``t ≥ 1`` contribute ``kλℓₜ``. At ``t = 0`` the prediction error
    vanishes while the centralized cost still charges
    ``x0ᵢᵀQλ₀x0ᵢ + x0ᵢᵀbλ₀``, so that term is subtracted instead of ``kλℓ₀``.
    """
    x0 = initial_states(spec, x0)
    later = sum(spec.k * spec.lam * spec.disturbance.moments(Q).ell for Q in spec.Q[1:])
    Q = spec.Q[0]
    moments = spec.disturbance.moments(Q)
    quadratic = np.einsum("ki,ij,kj->", x0, Q @ moments.sigma @ Q, x0) + np.sum(x0 @ (Q @ moments.gamma))
    initial = 4.0 * spec.lam * quadratic
    return float(later - initial)


@dataclass(frozen=True)
class OffsetReport:
    """
    Paired comparison of both objectives against :func:`risk_offset`.

    :ivar difference: Mean over runs of ``J − (Σ cλₜ + cᵘₜ)``.
    :ivar expected: Exact offset.
    :ivar nominal: :func:`nominal_risk_offset`.
    """

    risk_aware: ObjectiveEstimate
    centralized: ObjectiveEstimate
    difference: float
    stderr: float
    expected: float
    nominal: float
    z: float

    @property
    def deviation(self) -> float:
        return self.difference - self.expected

    def passed(self, limit: float | None = None) -> bool:
        return abs(self.z) <= (settings.Z_SCORE_LIMIT if limit is None else limit)


def offset_check(
    spec: SystemSpec,
    schedule: MeanFieldGainSchedule,
    x0,
    n_runs: int,
    base_seed: int | None = None,
    threads: int = 1,
) -> OffsetReport:
    """Estimate both objectives on the same runs and compare their difference with :func:`risk_offset`."""
    collector = _cost_samples(spec, schedule, x0, n_runs, base_seed, threads)
    paired = paired_difference(collector.risk_aware, collector.centralized)
    expected = risk_offset(spec, x0)
    report = OffsetReport(
        risk_aware=ObjectiveEstimate(float(np.mean(collector.risk_aware)), _standard_error(collector.risk_aware)),
        centralized=ObjectiveEstimate(float(np.mean(collector.centralized)), _standard_error(collector.centralized)),
        difference=paired.mean,
        stderr=paired.stderr,
        expected=expected,
        nominal=nominal_risk_offset(spec),
        z=z_score(paired.mean - expected, paired.stderr, expected),
    )
    logger.debug(
        "Offset check λ={}: difference={:.6g}, expected={:.6g}, z={:.3f}", spec.lam, paired.mean, expected, report.z
    )
    return report


def perturb_schedule(schedule: MeanFieldGainSchedule, rel: float, rng: np.random.Generator) -> MeanFieldGainSchedule:
    """Scale every entry of ``K``, ``K̄`` and ``f`` by ``1 ± rel`` with random signs."""

    def perturbed(values: tuple) -> tuple:
        return tuple(v * (1.0 + rel * rng.choice((-1.0, 1.0), size=np.shape(v))) for v in values)

    return replace(schedule, K=perturbed(schedule.K), K_bar=perturbed(schedule.K_bar), f=perturbed(schedule.f))


@dataclass(frozen=True)
class PerturbationResult:
    """
    :ivar increase: Paired mean of ``J(perturbed) − J(solved)``.
    :ivar passed: ``increase ≥ −Z_SCORE_LIMIT · stderr``.
    """

    index: int
    increase: float
    stderr: float
    passed: bool


def optimality_check(
    spec: SystemSpec,
    schedule: MeanFieldGainSchedule,
    x0,
    n_runs: int,
    base_seed: int | None = None,
    rel: float = 0.01,
    n_perturbations: int = 8,
    perturbation_seed: int = 0,
    threads: int = 1,
) -> list[PerturbationResult]:
    """
    Local optimality of ``schedule``: compare ``E(J)`` under the solved gains
    with ``n_perturbations`` entrywise perturbations of relative size ``rel``,
    on the same disturbances.
    """
    baseline = _cost_samples(spec, schedule, x0, n_runs, base_seed, threads).risk_aware
    rng = np.random.default_rng(perturbation_seed)
    results = []
    for index in range(n_perturbations):
        candidate = perturb_schedule(schedule, rel, rng)
        samples = _cost_samples(spec, candidate, x0, n_runs, base_seed, threads).risk_aware
        paired = paired_difference(samples, baseline)
        passed = paired.mean >= -settings.Z_SCORE_LIMIT * paired.stderr
        if not passed:
            logger.warning(
                "Perturbation {} lowers the objective by {:.6g} (se {:.3g}).", index, -paired.mean, paired.stderr
            )
        results.append(PerturbationResult(index, paired.mean, paired.stderr, passed))
    return results
