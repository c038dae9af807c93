"""
Closed-loop Monte Carlo simulation of ``k`` mean-field coupled subsystems.

A rollout draws the disturbances ``wᵢₜ₊₁`` i.i.d. across subsystems and time
and steps every subsystem through

    xᵢₜ₊₁ = Aₜ xᵢₜ + Bₜ uᵢₜ + Cₜ x̄ₜ + wᵢₜ₊₁.

Along the way it records the realized state-energy prediction errors

    Δᵢₜ = xᵢₜᵀQₜxᵢₜ − (x̂ᵢₜᵀQₜx̂ᵢₜ + tr(QₜΣ)),   x̂ᵢₜ = Aₜ₋₁xᵢₜ₋₁ + Bₜ₋₁uᵢₜ₋₁ + Cₜ₋₁x̄ₜ₋₁ + μ,

which is exact because the one-step prediction given the history is
``x̂ + (w − μ)``. The initial state is deterministic, so ``Δᵢ₀ = 0``.

Many rollouts are simulated together: every array carries a leading run axis
in :class:`RolloutBatch`. :class:`Simulation` splits an ensemble into chunks,
seeds run ``r`` with ``SeedSequence(base_seed, spawn_key=(r,))`` and hands
finished chunks to its observers in run order, so results do not depend on
chunk size or thread count.
"""

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from mflqr import pbd
from mflqr.conf import settings
from mflqr.disturbance import DiscreteDisturbance
from mflqr.exceptions import ModelException, ShapeException
from mflqr.logger import logger
from mflqr.observers import ObservableEvents, ObserverManagerMixin
from mflqr.riccati import CentralizedGainSchedule, MeanFieldGainSchedule, control_stacked
from mflqr.system import RiskAugmentation, SystemSpec, risk_augmentation

Policy = Callable[[int, np.ndarray], np.ndarray]


def _quad(x: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """``xᵀQx`` over the last axis."""
    return np.einsum("...i,ij,...j->...", x, Q, x)


@dataclass(frozen=True)
class _RolloutArrays:
    """
    :ivar states: ``xᵢₜ``, shape ``(..., T+1, k, n)``.
    :ivar controls: ``uᵢₜ``, shape ``(..., T, k, m)``.
    :ivar prediction_errors: ``Δᵢₜ``, shape ``(..., T+1, k)``.
    :ivar state_energy: ``xᵢₜᵀQₜxᵢₜ``, shape ``(..., T+1, k)``.
    :ivar control_energy: ``uᵢₜᵀRₜuᵢₜ``, shape ``(..., T, k)``.
    :ivar state_cost: ``cˣₜ = Σᵢ x̄ₜᵀPₜx̄ₜ + xᵢₜᵀQₜxᵢₜ``.
    :ivar control_cost: ``cᵘₜ = Σᵢ uᵢₜᵀRₜuᵢₜ``.
    :ivar risk_cost: ``cᐞₜ = λ Σᵢ Δᵢₜ²``.
    :ivar centralized_cost: ``cλₜ = x̃ₜᵀQ̃λₜx̃ₜ + x̃ₜᵀb̃λₜ``, state cost of the stacked problem.
    """

    states: np.ndarray
    controls: np.ndarray
    prediction_errors: np.ndarray
    state_energy: np.ndarray
    control_energy: np.ndarray
    state_cost: np.ndarray
    control_cost: np.ndarray
    risk_cost: np.ndarray
    centralized_cost: np.ndarray

    @property
    def total_cost(self):
        """Realized ``J``: state, risk and control costs summed over the horizon."""
        return np.sum(self.state_cost + self.risk_cost, axis=-1) + np.sum(self.control_cost, axis=-1)

    @property
    def centralized_objective(self):
        """Realized cost of the stacked problem: ``Σ cλₜ + Σ cᵘₜ``."""
        return np.sum(self.centralized_cost, axis=-1) + np.sum(self.control_cost, axis=-1)

    @property
    def state_energy_avg(self):
        return self.state_energy.mean(axis=-1)

    @property
    def state_energy_max(self):
        return self.state_energy.max(axis=-1)

    @property
    def control_energy_avg(self):
        return self.control_energy.mean(axis=-1)

    @property
    def control_energy_max(self):
        return self.control_energy.max(axis=-1)


@dataclass(frozen=True)
class Trajectory(_RolloutArrays):
    """One closed-loop rollout."""


@dataclass(frozen=True)
class RolloutBatch(_RolloutArrays):
    """Rollouts stacked along a leading run axis."""

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, run: int) -> Trajectory:
        return Trajectory(
            states=self.states[run],
            controls=self.controls[run],
            prediction_errors=self.prediction_errors[run],
            state_energy=self.state_energy[run],
            control_energy=self.control_energy[run],
            state_cost=self.state_cost[run],
            control_cost=self.control_cost[run],
            risk_cost=self.risk_cost[run],
            centralized_cost=self.centralized_cost[run],
        )


def initial_states(spec: SystemSpec, x0) -> np.ndarray:
    """
    Normalize initial states to a ``(k, n)`` array.

    Accepts ``k`` blocks, a flat stacked vector of length ``kn``, or (when
    ``n = 1``) ``k`` scalars.
    """
    arr = np.asarray(x0, dtype=np.float64)
    if arr.ndim == 1 and arr.shape[0] == spec.k * spec.n:
        arr = arr.reshape(spec.k, spec.n)
    if arr.shape != (spec.k, spec.n):
        raise ShapeException(
            ShapeException.ERRORS.BLOCK_COUNT, f"Initial states of shape {arr.shape}, expected ({spec.k}, {spec.n})."
        )
    return arr


def run_seed(base_seed: int, run: int) -> np.random.SeedSequence:
    """Seed of run ``run`` of an ensemble: ``SeedSequence(base_seed, spawn_key=(run,))``."""
    return np.random.SeedSequence(base_seed, spawn_key=(run,))


def draw_noise(disturbance: DiscreteDisturbance, T: int, k: int, base_seed: int, runs: range) -> np.ndarray:
    """
    Disturbances of the given runs, shape ``(len(runs), T, k, n)``.

    Entry ``[r, t]`` holds ``wₜ₊₁`` of run ``runs[r]``. Each run has its own
    generator so the draws of a run never depend on the other runs.
    """
    noise = np.empty((len(runs), T, k, disturbance.dim))
    for i, run in enumerate(runs):
        noise[i] = disturbance.draw(np.random.default_rng(run_seed(base_seed, run)), (T, k))
    return noise


def mean_field_policy(schedule: MeanFieldGainSchedule) -> Policy:
    """Per-subsystem law ``uᵢ = Kxᵢ + (K̄ − K)x̄ + f``."""

    def policy(t: int, x: np.ndarray) -> np.ndarray:
        return control_stacked(schedule, t, x)

    return policy


def centralized_policy(schedule: CentralizedGainSchedule, dense: bool = True) -> Policy:
    """
    Stacked law ``ũ = K̃x̃ + f̃``.

    :param dense: Multiply by the dense ``K̃``; otherwise pseudo-block gains are
        applied block-wise with :func:`mflqr.pbd.apply_stacked`.
    """
    if dense:
        schedule = schedule.to_dense()

    def policy(t: int, x: np.ndarray) -> np.ndarray:
        runs, k, n = x.shape
        K, f = schedule.K[t], schedule.f[t]
        if isinstance(K, pbd.PseudoBlockMatrix):
            u = np.stack([pbd.apply_stacked(K, x[r].reshape(-1)) for r in range(runs)]) + f
        else:
            u = x.reshape(runs, k * n) @ K.T + f
        return u.reshape(runs, k, -1)

    return policy


def simulate(
    spec: SystemSpec,
    policy: Policy,
    x0,
    noise: np.ndarray,
    risk: RiskAugmentation | None = None,
) -> RolloutBatch:
    """
    Roll out ``policy`` once per leading entry of ``noise``.

    :param spec: Problem data.
    :param policy: Maps ``(t, states of shape (runs, k, n))`` to inputs ``(runs, k, m)``.
    :param x0: Initial states, see :func:`initial_states`.
    :param noise: Disturbances ``(runs, T, k, n)``; a single ``(T, k, n)`` array is one run.
    :param risk: Precomputed :func:`~mflqr.system.risk_augmentation` of ``spec``.
    """
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim == 3:
        noise = noise[None]
    T, k, n, m = spec.T, spec.k, spec.n, spec.m
    if noise.ndim != 4 or noise.shape[1:] != (T, k, n):
        raise ShapeException(
            ShapeException.ERRORS.DIMENSION_MISMATCH, f"Noise of shape {noise.shape}, expected (runs, {T}, {k}, {n})."
        )
    x0 = initial_states(spec, x0)
    risk = risk or risk_augmentation(spec)
    mu = spec.disturbance.mean()
    runs = noise.shape[0]

    states = np.empty((runs, T + 1, k, n))
    controls = np.empty((runs, T, k, m))
    errors = np.zeros((runs, T + 1, k))
    states[:, 0] = x0

    for t in range(T):
        x = states[:, t]
        u = policy(t, x)
        xbar = x.mean(axis=1, keepdims=True)
        drift = x @ spec.A[t].T + u @ spec.B[t].T + xbar @ spec.C[t].T
        states[:, t + 1] = drift + noise[:, t]
        controls[:, t] = u
        Q = spec.Q[t + 1]
        expected_energy = _quad(drift + mu, Q) + spec.disturbance.moments(Q).trace_sigma_q
        errors[:, t + 1] = _quad(states[:, t + 1], Q) - expected_energy

    state_energy = np.empty((runs, T + 1, k))
    mean_field_energy = np.empty((runs, T + 1))
    risk_quadratic = np.empty((runs, T + 1))
    control_energy = np.empty((runs, T, k))
    xbar = states.mean(axis=2)
    for t in range(T + 1):
        x = states[:, t]
        state_energy[:, t] = _quad(x, spec.Q[t])
        mean_field_energy[:, t] = k * _quad(xbar[:, t], spec.P[t])
        risk_quadratic[:, t] = np.sum(_quad(x, risk.Q_lam[t]) + x @ risk.b_lam[t], axis=-1)
        if t < T:
            control_energy[:, t] = _quad(controls[:, t], spec.R[t])

    state_cost = state_energy.sum(axis=-1) + mean_field_energy
    return RolloutBatch(
        states=states,
        controls=controls,
        prediction_errors=errors,
        state_energy=state_energy,
        control_energy=control_energy,
        state_cost=state_cost,
        control_cost=control_energy.sum(axis=-1),
        risk_cost=spec.lam * np.sum(errors**2, axis=-1),
        centralized_cost=state_cost + risk_quadratic,
    )


def rollout_with_noise(spec: SystemSpec, schedule: MeanFieldGainSchedule, x0, noise: np.ndarray) -> Trajectory:
    """Rollout under the mean-field law with given disturbances ``(T, k, n)``."""
    return simulate(spec, mean_field_policy(schedule), x0, noise)[0]


def rollout(spec: SystemSpec, schedule: MeanFieldGainSchedule, x0, rng: np.random.Generator) -> Trajectory:
    """
    One closed-loop rollout under the mean-field law.

    :param rng: Generator the disturbances ``(T, k, n)`` are drawn from.
    """
    noise = spec.disturbance.draw(rng, (spec.T, spec.k))
    return rollout_with_noise(spec, schedule, x0, noise)


def rollout_centralized(
    spec: SystemSpec, schedule: CentralizedGainSchedule, x0, noise: np.ndarray, dense: bool = True
) -> Trajectory:
    """Rollout under the stacked law ``ũ = K̃x̃ + f̃`` with given disturbances ``(T, k, n)``."""
    return simulate(spec, centralized_policy(schedule, dense), x0, noise)[0]


class Simulation(ObserverManagerMixin):
    """
    Runs an ensemble of independent rollouts of one spec under one schedule.

    Observers (see :class:`~mflqr.observers.SimulationObserver`) receive every
    finished chunk of runs, in run order.
    """

    def __init__(
        self,
        spec: SystemSpec,
        schedule: MeanFieldGainSchedule,
        x0,
        n_runs: int,
        base_seed: int | None = None,
        threads: int = 1,
        chunk_size: int | None = None,
    ):
        """
        :param spec: Problem data.
        :param schedule: Gains applied by every subsystem.
        :param x0: Initial states shared by all runs.
        :param n_runs: Ensemble size, at least one.
        :param base_seed: Seed the per-run seeds are split from; ``settings.DEFAULT_SEED`` if omitted.
        :param threads: Worker threads simulating chunks concurrently.
        :param chunk_size: Runs per chunk; ``settings.ROLLOUT_CHUNK`` if omitted.
        """
        super().__init__()
        if n_runs < 1:
            raise ModelException(ModelException.ERRORS.SAMPLES, f"n_runs={n_runs}.")
        self.spec = spec
        self.schedule = schedule
        self.x0 = initial_states(spec, x0)
        self.n_runs = int(n_runs)
        self.base_seed = settings.DEFAULT_SEED if base_seed is None else int(base_seed)
        self.threads = max(1, int(threads))
        self.chunk_size = int(chunk_size or settings.ROLLOUT_CHUNK)
        self._risk = risk_augmentation(spec)
        self._policy = mean_field_policy(schedule)

    def _chunks(self) -> list[range]:
        return [range(s, min(s + self.chunk_size, self.n_runs)) for s in range(0, self.n_runs, self.chunk_size)]

    def _simulate_chunk(self, runs: range) -> RolloutBatch:
        noise = draw_noise(self.spec.disturbance, self.spec.T, self.spec.k, self.base_seed, runs)
        return simulate(self.spec, self._policy, self.x0, noise, self._risk)

    def run(self):
        logger.info(
            "Simulating {} runs (k={}, T={}, λ={}) from seed {}.",
            self.n_runs,
            self.spec.k,
            self.spec.T,
            self.spec.lam,
            self.base_seed,
        )
        self.notify_observers(ObservableEvents.simulation_started, self)
        chunks = self._chunks()
        if self.threads == 1:
            for runs in chunks:
                self.notify_observers(ObservableEvents.batch_finished, self, runs.start, self._simulate_chunk(runs))
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                for wave in range(0, len(chunks), self.threads):
                    todo = chunks[wave : wave + self.threads]
                    for runs, batch in zip(todo, executor.map(self._simulate_chunk, todo)):
                        self.notify_observers(ObservableEvents.batch_finished, self, runs.start, batch)
        self.notify_observers(ObservableEvents.simulation_finished, self)
        logger.info("Simulation of {} runs finished.", self.n_runs)


def ensemble(
    spec: SystemSpec,
    schedule: MeanFieldGainSchedule,
    x0,
    n_runs: int,
    base_seed: int | None = None,
    quantiles: tuple[float, float] | None = None,
    threads: int = 1,
):
    """
    Ensemble statistics of the state energy and control effort.

    :return: :class:`~mflqr.metrics.EnsembleStats` with means and quantile
        bands (``settings.QUANTILES`` by default) per time and time-averaged.
    """
    from mflqr.metrics import EnergyMetricCollector

    collector = EnergyMetricCollector()
    simulation = Simulation(spec, schedule, x0, n_runs, base_seed, threads)
    simulation.add_observers(collector)
    simulation.run()
    return collector.make_report(quantiles)
