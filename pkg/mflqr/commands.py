"""
Subcommands of the ``mflqr`` tool.

Each command takes a validated :class:`~mflqr.experiment.ExperimentConfig`
and writes :class:`~mflqr.results.ResultTable` files under its output
directory. Every λ of the grid reuses the experiment's ``base_seed``, so the
ensembles of a sweep share their disturbances.
"""

from pathlib import Path

import numpy as np

from mflqr.conf import settings
from mflqr.exceptions import ConfigException
from mflqr.experiment import ExperimentConfig
from mflqr.logger import logger
from mflqr.metrics import STATISTICS, EnsembleStats
from mflqr.results import ResultTable, write_table
from mflqr.riccati import MeanFieldGainSchedule, solve_mean_field
from mflqr.simulation import ensemble
from mflqr.verification import CheckResult, algebra_check, equivalence_check, offset_identity_check, variance_check


def lambda_label(lam: float) -> str:
    return f"{lam:.6g}"


def _metadata(config: ExperimentConfig, command: str, **extra) -> dict:
    metadata = {
        "config_hash": config.fingerprint(),
        "seed": config.base_seed,
        "version": settings.FORMAT_VERSION,
        "command": command,
        "experiment": config.name,
        "k": config.k,
        "T": config.T,
    }
    metadata.update(extra)
    return metadata


def _flatten(prefix: str, matrices, columns: dict):
    """Add one column per entry of the per-step ``matrices``, row-major."""
    stacked = np.array(matrices, dtype=np.float64)
    if stacked.ndim == 2:
        for i in range(stacked.shape[1]):
            columns[f"{prefix}_{i}"] = stacked[:, i]
    else:
        for i in range(stacked.shape[1]):
            for j in range(stacked.shape[2]):
                columns[f"{prefix}_{i}_{j}"] = stacked[:, i, j]


def gains_table(schedule: MeanFieldGainSchedule, metadata: dict) -> ResultTable:
    """
    One row per ``t = 0..T-1`` with ``Kₜ``, ``K̄ₜ``, ``fₜ``, ``Sₜ``, ``S̄ₜ`` and ``gₜ``.

    The terminal ``S_T``, ``S̄_T`` and ``g_T`` are fixed by the cost data and not written.
    """
    T = schedule.T
    columns = {"t": np.arange(T, dtype=np.float64)}
    _flatten("K", schedule.K, columns)
    _flatten("K_bar", schedule.K_bar, columns)
    _flatten("f", schedule.f, columns)
    _flatten("S", schedule.S[:T], columns)
    _flatten("S_bar", schedule.S_bar[:T], columns)
    _flatten("g", schedule.g[:T], columns)
    return ResultTable.from_columns(columns, metadata)


def timeseries_table(stats: EnsembleStats, T: int, metadata: dict) -> ResultTable:
    """
    One row per ``t = 0..T`` with mean, lower and upper band of every statistic.

    Control statistics are undefined at ``t = T`` and written as ``nan``.
    """
    columns = {"t": np.arange(T + 1, dtype=np.float64)}
    for name in STATISTICS:
        band = stats.per_time[name]
        for part in ("mean", "lower", "upper"):
            values = np.asarray(getattr(band, part), dtype=np.float64)
            if values.shape[0] == T:
                values = np.append(values, np.nan)
            columns[f"{name}_{part}"] = values
    return ResultTable.from_columns(columns, metadata)


def sweep_table(grid, reports: list[EnsembleStats], metadata: dict) -> ResultTable:
    """One row per λ with mean, lower and upper band of the time-averaged statistics."""
    columns = {"lambda": np.asarray(grid, dtype=np.float64)}
    for name in STATISTICS:
        for part in ("mean", "lower", "upper"):
            columns[f"{name}_{part}"] = np.array([getattr(r.time_average[name], part) for r in reports])
    return ResultTable.from_columns(columns, metadata)


def cmd_solve(config: ExperimentConfig) -> list[Path]:
    """Write the gain schedule of every λ of the grid."""
    paths = []
    for lam in config.lambda_grid:
        schedule = solve_mean_field(config.spec(lam))
        path = config.output_dir / f"gains_lambda_{lambda_label(lam)}.csv"
        write_table(gains_table(schedule, _metadata(config, "solve", **{"lambda": lambda_label(lam)})), path)
        paths.append(path)
    return paths


def _ensemble(config: ExperimentConfig, lam: float) -> EnsembleStats:
    spec = config.spec(lam)
    return ensemble(
        spec,
        solve_mean_field(spec),
        config.x0(),
        config.n_runs,
        base_seed=config.base_seed,
        quantiles=config.quantiles,
        threads=config.threads,
    )


def cmd_simulate(config: ExperimentConfig) -> list[Path]:
    """Write the per-time ensemble statistics of every λ of the grid."""
    paths = []
    for lam in config.lambda_grid:
        stats = _ensemble(config, lam)
        metadata = _metadata(config, "simulate", **{"lambda": lambda_label(lam), "n_runs": config.n_runs})
        path = config.output_dir / f"timeseries_lambda_{lambda_label(lam)}.csv"
        write_table(timeseries_table(stats, config.T, metadata), path)
        paths.append(path)
    return paths


def cmd_sweep(config: ExperimentConfig) -> list[Path]:
    """
    Write the time-averaged statistics against λ.

    :raises ConfigException: If the grid has fewer than two values.
    """
    if len(config.lambda_grid) < 2:
        raise ConfigException(
            ConfigException.ERRORS.INVALID_VALUE, key="risk.lambda_grid", detail="A sweep needs at least two values."
        )
    reports = []
    for lam in config.lambda_grid:
        logger.info("Sweep: λ={}", lam)
        reports.append(_ensemble(config, lam))
    path = config.output_dir / "sweep.csv"
    write_table(sweep_table(config.lambda_grid, reports, _metadata(config, "sweep", n_runs=config.n_runs)), path)
    return [path]


def cmd_verify(config: ExperimentConfig) -> list[CheckResult]:
    """
    Run every check on the experiment: schedule equivalence and objective
    offset for each λ, the pseudo-block algebra once, and the predictive
    variance at the largest λ.

    :raises ConfigException: If ``nk`` is too large for the dense recursion.
    """
    spec = config.base_spec
    if spec.n * spec.k > settings.DENSE_ORACLE_MAX_DIM:
        raise ConfigException(
            ConfigException.ERRORS.INVALID_VALUE,
            key="system.k",
            detail=f"verify needs nk <= {settings.DENSE_ORACLE_MAX_DIM}, got {spec.n * spec.k}; lower k with --k.",
        )
    x0 = config.x0()
    results = algebra_check(spec)
    for lam in config.lambda_grid:
        lam_spec = config.spec(lam)
        schedule = solve_mean_field(lam_spec)
        results.append(equivalence_check(lam_spec, schedule))
        results.append(
            offset_identity_check(lam_spec, schedule, x0, base_seed=config.base_seed, threads=config.threads)
        )
    top = config.spec(max(config.lambda_grid))
    logger.info("Predictive variance checked at λ={} only, the largest value of the grid.", top.lam)
    results.append(
        variance_check(top, solve_mean_field(top), x0, base_seed=config.base_seed, threads=config.threads)
    )
    return results
