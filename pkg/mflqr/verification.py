"""
Self checks run by ``mflqr verify``.

Each check returns a :class:`CheckResult` with the largest deviation it
observed and the tolerance that deviation is held to:

* the decoupled and the dense centralized recursions give the same schedule,
* the pseudo-block algebra agrees with dense Kronecker products on the
  experiment's own matrices,
* the second moment of the prediction error matches its closed form,
* the risk-aware and centralized objectives differ by the known offset.
"""

from dataclasses import dataclass

import numpy as np

from mflqr import pbd
from mflqr.conf import settings
from mflqr.estimators import offset_check, predictive_variance_check
from mflqr.exceptions import SingularMatrixException
from mflqr.logger import logger
from mflqr.riccati import MeanFieldGainSchedule, reconstruct_centralized, solve_centralized, solve_mean_field
from mflqr.system import SystemSpec
from mflqr.utils.linalg import min_eigenvalue, relative_deviation


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    deviation: float
    tolerance: float
    detail: str = ""

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: max deviation {self.deviation:.3e} (tolerance {self.tolerance:.1e})"
        return f"{text}; {self.detail}" if self.detail else text


def _log(result: CheckResult) -> CheckResult:
    if result.passed:
        logger.info("{}", result)
    else:
        logger.error("{}", result)
    return result


def equivalence_check(spec: SystemSpec, schedule: MeanFieldGainSchedule | None = None) -> CheckResult:
    """
    Compare the lifted decoupled schedule with the dense centralized one.

    :param schedule: Decoupled schedule to check; solved from ``spec`` if omitted.
    """
    dense = solve_centralized(spec)
    schedule = schedule or solve_mean_field(spec)
    lifted = reconstruct_centralized(schedule, spec.k).to_dense()

    worst, where = 0.0, "none"
    compared = (
        ("S̃", lifted.S, dense.S),
        ("g̃", lifted.g, dense.g),
        ("K̃", lifted.K, dense.K),
        ("f̃", lifted.f, dense.f),
    )
    for name, ours, theirs in compared:
        for t, (actual, expected) in enumerate(zip(ours, theirs)):
            deviation = relative_deviation(actual, expected)
            if deviation > worst:
                worst, where = deviation, f"{name} at t={t}"
    return _log(
        CheckResult(
            name=f"riccati equivalence (λ={spec.lam:g})",
            passed=worst <= settings.EQUIVALENCE_RTOL,
            deviation=worst,
            tolerance=settings.EQUIVALENCE_RTOL,
            detail=f"worst {where}",
        )
    )


def _pairs(spec: SystemSpec):
    for t in range(spec.T):
        yield t, pbd.phi(spec.k, spec.A[t], spec.A_bar(t)), pbd.phi(spec.k, spec.Q[t], spec.Q_bar(t))


def algebra_check(spec: SystemSpec, seed: int = 0) -> list[CheckResult]:
    """
    Pseudo-block identities on ``φ_k(Aₜ, Āₜ)`` and ``φ_k(Qₜ, Q̄ₜ)`` against dense products.

    Returns one result for the algebra and one for inverse round trips; factors
    that are singular are skipped by the latter.
    """
    rng = np.random.default_rng(seed)
    k, n = spec.k, spec.n
    algebra, inverse, skipped = 0.0, 0.0, 0

    E = pbd.e_matrix(k)
    ones = np.ones(k)
    algebra = max(
        relative_deviation(E @ E, E),
        relative_deviation(E.T, E),
        relative_deviation(E @ ones, ones),
        max(0.0, -min_eigenvalue(E)),
    )
    if k > 1:
        # E_k has the eigenvalue 0 with multiplicity k - 1.
        algebra = max(algebra, abs(min_eigenvalue(E)))

    for t, X, Y in _pairs(spec):
        dX, dY = X.to_dense(), Y.to_dense()
        v = rng.standard_normal(n)
        xs = rng.standard_normal(k * n)
        algebra = max(
            algebra,
            relative_deviation(pbd.to_dense(pbd.transpose(X)), dX.T),
            relative_deviation(pbd.to_dense(pbd.add(X, Y)), dX + dY),
            relative_deviation(pbd.to_dense(pbd.scale(2.5, X)), 2.5 * dX),
            relative_deviation(pbd.to_dense(pbd.matmul(X, Y)), dX @ dY),
            relative_deviation(np.tile(pbd.apply_replicated(X, v), k), dX @ np.tile(v, k)),
            relative_deviation(pbd.apply_stacked(X, xs), dX @ xs),
        )
        try:
            inv = pbd.to_dense(pbd.inverse(X))
        except SingularMatrixException as e:
            logger.debug("Skipping inverse at t={}: {}", t, e)
            skipped += 1
            continue
        inverse = max(inverse, relative_deviation(inv @ dX, np.eye(k * n)))

    return [
        _log(
            CheckResult(
                name="pbd algebra",
                passed=algebra <= settings.ALGEBRA_ATOL,
                deviation=algebra,
                tolerance=settings.ALGEBRA_ATOL,
                detail=f"{spec.T} matrix pairs, k={k}",
            )
        ),
        _log(
            CheckResult(
                name="pbd inverse",
                passed=inverse <= settings.INVERSE_ATOL,
                deviation=inverse,
                tolerance=settings.INVERSE_ATOL,
                detail=f"{skipped} singular factors skipped",
            )
        ),
    ]


def variance_check(
    spec: SystemSpec,
    schedule: MeanFieldGainSchedule,
    x0,
    n_samples: int | None = None,
    base_seed: int | None = None,
    steps: int | None = None,
    threads: int = 1,
) -> CheckResult:
    report = predictive_variance_check(
        spec,
        schedule,
        x0,
        n_samples or settings.VERIFY_VARIANCE_SAMPLES,
        base_seed=base_seed,
        steps=steps or settings.VERIFY_VARIANCE_STEPS,
        threads=threads,
    )
    worst = int(np.argmax(np.abs(report.z))) if report.z.size else 0
    return _log(
        CheckResult(
            name=f"predictive variance (λ={spec.lam:g})",
            passed=report.passed(),
            deviation=report.max_abs_z,
            tolerance=settings.Z_SCORE_LIMIT,
            detail=f"|z| over t=1..{report.times[-1]}, worst at t={report.times[worst]}, {report.n_samples} runs",
        )
    )


def offset_identity_check(
    spec: SystemSpec,
    schedule: MeanFieldGainSchedule,
    x0,
    n_runs: int | None = None,
    base_seed: int | None = None,
    threads: int = 1,
) -> CheckResult:
    report = offset_check(spec, schedule, x0, n_runs or settings.VERIFY_OFFSET_SAMPLES, base_seed, threads)
    return _log(
        CheckResult(
            name=f"objective offset (λ={spec.lam:g})",
            passed=report.passed(),
            deviation=abs(report.z),
            tolerance=settings.Z_SCORE_LIMIT,
            detail=(
                f"|z| of difference {report.difference:.6g} vs expected {report.expected:.6g}"
                f" (se {report.stderr:.3g})"
            ),
        )
    )
