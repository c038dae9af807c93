from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from mflqr.conf import settings
from mflqr.exceptions import ModelException
from mflqr.observers import SimulationObserver

if TYPE_CHECKING:
    from mflqr.simulation import RolloutBatch, Simulation


#: Statistics tracked per run and time step. ``x_*`` are defined for ``t = 0..T``, ``u_*`` for ``t = 0..T-1``.
STATISTICS = ("x_avg", "x_max", "u_avg", "u_max")


@dataclass(frozen=True)
class Band:
    """Ensemble mean with lower and upper empirical quantiles."""

    mean: np.ndarray | float
    lower: np.ndarray | float
    upper: np.ndarray | float


@dataclass(frozen=True)
class EnsembleStats:
    """
    Summary of an ensemble of rollouts.

    :ivar n_runs: Ensemble size.
    :ivar quantiles: Lower and upper quantile levels of every :class:`Band`.
    :ivar per_time: Band over runs at each time, per statistic.
    :ivar time_average: Band over runs of the per-run time average, per statistic.
    :ivar samples: Per-run time averages, per statistic.
    """

    n_runs: int
    quantiles: tuple[float, float]
    per_time: dict[str, Band]
    time_average: dict[str, Band]
    samples: dict[str, np.ndarray]


class EnergyMetricCollector(SimulationObserver):
    """
    Observer collecting, for every run and time step, the average and maximum
    over subsystems of the state energy ``xᵢᵀQxᵢ`` and the control effort
    ``uᵢᵀRuᵢ``.

    Only these reductions are kept, never the trajectories, so memory grows
    with ``n_runs × T`` and not with ``k``.
    """

    def __init__(self):
        self.data: dict[str, np.ndarray] = {}
        self.n_runs = 0

    def on_simulation_started(self, simulation: "Simulation") -> None:
        T = simulation.spec.T
        self.n_runs = simulation.n_runs
        self.data = {
            "x_avg": np.full((self.n_runs, T + 1), np.nan),
            "x_max": np.full((self.n_runs, T + 1), np.nan),
            "u_avg": np.full((self.n_runs, T), np.nan),
            "u_max": np.full((self.n_runs, T), np.nan),
        }

    def on_batch_finished(self, simulation: "Simulation", first_run: int, batch: "RolloutBatch") -> None:
        rows = slice(first_run, first_run + len(batch))
        self.data["x_avg"][rows] = batch.state_energy_avg
        self.data["x_max"][rows] = batch.state_energy_max
        self.data["u_avg"][rows] = batch.control_energy_avg
        self.data["u_max"][rows] = batch.control_energy_max

    def make_report(self, quantiles: tuple[float, float] | None = None) -> EnsembleStats:
        """
        Reduce the collected data to an :class:`EnsembleStats`.

        :param quantiles: Band levels; ``settings.QUANTILES`` if omitted.
        :raises ModelException: If no run was collected.
        """
        if not self.data or self.n_runs < 1:
            raise ModelException(ModelException.ERRORS.SAMPLES, "No simulation was observed.")
        lower, upper = quantiles or settings.QUANTILES

        def band(values: np.ndarray) -> Band:
            q = np.quantile(values, (lower, upper), axis=0)
            return Band(mean=np.mean(values, axis=0), lower=q[0], upper=q[1])

        per_time, time_average, samples = {}, {}, {}
        for name in STATISTICS:
            values = self.data[name]
            per_time[name] = band(values)
            samples[name] = values.mean(axis=1)
            averaged = band(samples[name])
            time_average[name] = Band(float(averaged.mean), float(averaged.lower), float(averaged.upper))

        return EnsembleStats(
            n_runs=self.n_runs,
            quantiles=(float(lower), float(upper)),
            per_time=per_time,
            time_average=time_average,
            samples=samples,
        )
