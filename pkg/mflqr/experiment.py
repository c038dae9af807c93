"""
Experiment configuration files.

An experiment is a TOML document with the sections ``[system]``,
``[disturbance]``, ``[risk]``, ``[simulation]``, ``[initial_state]`` and
``[output]``; only ``[system]`` and ``[disturbance]`` are required. See
``docs/reference/config.rst`` for the full grammar. A minimal file::

    [system]
    k = 250
    T = 50
    A = 1.1
    B = 0.3
    C = 0.2
    P = 0.4
    Q = 0.8
    R = 1.2

    [disturbance]
    kind = "bernoulli_shifted"
    scale = 10.0
    p = 0.25

Matrices are numbers (1×1 shorthand), nested lists, or ``{per_step = [...]}``
tables with one entry per time step.
"""

import copy
import hashlib
import json
import math
import re
import tomllib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from mflqr.conf import settings
from mflqr.disturbance import DiscreteDisturbance, bernoulli_shifted
from mflqr.exceptions import ConfigException, MfLqrException
from mflqr.logger import logger
from mflqr.system import SystemSpec, per_step

SECTIONS = {
    "name": None,
    "system": {"k", "T", "A", "B", "C", "P", "Q", "R"},
    "disturbance": {"kind", "support", "probs", "scale", "p"},
    "risk": {"lambda_grid"},
    "simulation": {"n_runs", "base_seed", "quantiles", "threads"},
    "initial_state": {"mode", "values", "mean", "variance", "variance_is_std", "seed"},
    "output": {"directory"},
}

DEFAULT_OUTPUT_DIRECTORY = "results"


def _line_of(text: str, key: str) -> int | None:
    """1-based line where ``section.name`` is assigned, or where ``section`` starts."""
    section, _, name = key.partition(".")
    lines = text.splitlines()
    start = None
    for number, line in enumerate(lines, 1):
        if re.match(rf"^\s*\[\s*{re.escape(section)}\s*\]", line):
            start = number
            break
    if start is None:
        return None
    if not name:
        return start
    head = name.split(".")[0]
    for number in range(start + 1, len(lines) + 1):
        line = lines[number - 1]
        if re.match(r"^\s*\[", line):
            break
        if re.match(rf"^\s*{re.escape(head)}\s*=", line):
            return number
    return start


class _Reader:
    """Typed access to a parsed document that reports errors with key and line."""

    def __init__(self, document: dict, text: str):
        self.document = document
        self.text = text

    def error(self, type_, key: str, detail: str | None = None) -> ConfigException:
        return ConfigException(type_, key=key, line=_line_of(self.text, key), detail=detail)

    def section(self, name: str, required: bool = False) -> dict:
        if name not in self.document:
            if required:
                raise ConfigException(ConfigException.ERRORS.MISSING_KEY, key=name)
            return {}
        value = self.document[name]
        if not isinstance(value, dict):
            raise self.error(ConfigException.ERRORS.INVALID_VALUE, name, "Expected a table.")
        unknown = sorted(set(value) - SECTIONS[name])
        if unknown:
            raise self.error(ConfigException.ERRORS.UNKNOWN_KEY, f"{name}.{unknown[0]}")
        return value

    def require(self, section: str, name: str):
        table = self.section(section)
        if name not in table:
            raise self.error(ConfigException.ERRORS.MISSING_KEY, f"{section}.{name}")
        return table[name]

    def number(self, section: str, name: str, default=None, required: bool = False) -> float:
        key = f"{section}.{name}"
        table = self.section(section)
        if name not in table:
            if required:
                raise self.error(ConfigException.ERRORS.MISSING_KEY, key)
            return default
        value = table[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise self.error(ConfigException.ERRORS.MALFORMED_NUMBER, key, f"Got {value!r}.")
        return float(value)

    def integer(self, section: str, name: str, default=None, required: bool = False, minimum: int = 0) -> int:
        key = f"{section}.{name}"
        table = self.section(section)
        if name not in table:
            if required:
                raise self.error(ConfigException.ERRORS.MISSING_KEY, key)
            return default
        value = table[name]
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(ConfigException.ERRORS.MALFORMED_NUMBER, key, f"Expected an integer, got {value!r}.")
        if value < minimum:
            raise self.error(ConfigException.ERRORS.INVALID_VALUE, key, f"Must be at least {minimum}, got {value}.")
        return value

    def numbers(self, key: str, value):
        """Validate a number or nested list of numbers and return it as floats."""
        if isinstance(value, bool) or isinstance(value, str) or isinstance(value, dict):
            raise self.error(ConfigException.ERRORS.MALFORMED_NUMBER, key, f"Got {value!r}.")
        if isinstance(value, list):
            return [self.numbers(key, v) for v in value]
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise self.error(ConfigException.ERRORS.MALFORMED_NUMBER, key, f"Got {value!r}.")
        return float(value)

    def matrix(self, section: str, name: str):
        key = f"{section}.{name}"
        value = self.require(section, name)
        if isinstance(value, dict):
            if set(value) != {"per_step"} or not isinstance(value["per_step"], list):
                raise self.error(ConfigException.ERRORS.INVALID_VALUE, key, "Expected {per_step = [...]}.")
            return per_step(self.numbers(key, v) for v in value["per_step"])
        return self.numbers(key, value)


@dataclass(frozen=True)
class InitialStateConfig:
    """
    How the deterministic initial states are produced.

    ``mode = "explicit"`` takes ``values`` as given. ``mode = "normal"`` draws
    them once from ``N(mean, variance)`` with ``default_rng(seed)``; with
    ``variance_is_std`` the second parameter is read as a standard deviation.
    """

    mode: str = "normal"
    values: tuple | None = None
    mean: float = 10.0
    variance: float = 2.0
    variance_is_std: bool = False
    seed: int = 7

    def states(self, k: int, n: int) -> np.ndarray:
        if self.mode == "explicit":
            values = np.asarray(self.values, dtype=np.float64)
            if values.ndim == 1 and values.shape[0] == k * n:
                values = values.reshape(k, n)
            if values.shape != (k, n):
                raise ConfigException(
                    ConfigException.ERRORS.INVALID_VALUE,
                    key="initial_state.values",
                    detail=f"Expected {k} states of dimension {n}, got shape {values.shape}.",
                )
            return values
        std = self.variance if self.variance_is_std else math.sqrt(self.variance)
        rng = np.random.default_rng(self.seed)
        return self.mean + std * rng.standard_normal((k, n))


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A validated experiment.

    :ivar base_spec: Problem data with ``λ = 0``; see :meth:`spec`.
    :ivar document: Parsed document with command line overrides applied; it is
        what :meth:`fingerprint` hashes.
    """

    name: str
    source: Path | None
    base_spec: SystemSpec
    lambda_grid: tuple[float, ...]
    n_runs: int
    base_seed: int
    quantiles: tuple[float, float]
    threads: int
    initial_state: InitialStateConfig
    output_dir: Path
    document: dict

    @property
    def k(self) -> int:
        return self.base_spec.k

    @property
    def T(self) -> int:
        return self.base_spec.T

    def spec(self, lam: float) -> SystemSpec:
        return self.base_spec.with_lambda(lam)

    def x0(self) -> np.ndarray:
        return self.initial_state.states(self.base_spec.k, self.base_spec.n)

    def fingerprint(self) -> str:
        """Short SHA-256 of the effective document."""
        canonical = json.dumps(self.document, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def override(
        self,
        seed: int | None = None,
        runs: int | None = None,
        out: str | Path | None = None,
        threads: int | None = None,
        k: int | None = None,
    ) -> "ExperimentConfig":
        """Copy with command line overrides; each override is also recorded in :attr:`document`."""
        document = copy.deepcopy(self.document)
        changes = {}
        for section, key, value, field in (
            ("simulation", "base_seed", seed, "base_seed"),
            ("simulation", "n_runs", runs, "n_runs"),
            ("simulation", "threads", threads, "threads"),
        ):
            if value is not None:
                document.setdefault(section, {})[key] = int(value)
                changes[field] = int(value)
        if out is not None:
            document.setdefault("output", {})["directory"] = str(out)
            changes["output_dir"] = Path(out)
        if k is not None:
            if k < 1:
                raise ConfigException(ConfigException.ERRORS.INVALID_VALUE, key="system.k", detail=f"k={k}.")
            document["system"]["k"] = int(k)
            changes["base_spec"] = self.base_spec.with_k(int(k))
        if changes.get("n_runs", 1) < 1:
            raise ConfigException(ConfigException.ERRORS.INVALID_VALUE, key="simulation.n_runs", detail="Must be >= 1.")
        updated = replace(self, document=document, **changes)
        updated.x0()
        return updated


def _disturbance(reader: _Reader) -> DiscreteDisturbance:
    table = reader.section("disturbance", required=True)
    kind = table.get("kind", "discrete")
    try:
        if kind == "bernoulli_shifted":
            return bernoulli_shifted(
                reader.number("disturbance", "scale", default=10.0), reader.number("disturbance", "p", default=0.25)
            )
        if kind == "discrete":
            support = reader.numbers("disturbance.support", reader.require("disturbance", "support"))
            probs = reader.numbers("disturbance.probs", reader.require("disturbance", "probs"))
            return DiscreteDisturbance(support, probs)
    except ConfigException:
        raise
    except MfLqrException as e:
        if kind == "bernoulli_shifted":
            key = "disturbance.p"
        elif "probabilit" in e.message.lower():
            key = "disturbance.probs"
        else:
            key = "disturbance.support"
        raise reader.error(ConfigException.ERRORS.INVALID_VALUE, key, str(e)) from e
    raise reader.error(ConfigException.ERRORS.INVALID_VALUE, "disturbance.kind", f"Unknown kind {kind!r}.")


def _system(reader: _Reader, disturbance: DiscreteDisturbance) -> SystemSpec:
    reader.section("system", required=True)
    k = reader.integer("system", "k", required=True, minimum=1)
    T = reader.integer("system", "T", required=True, minimum=1)
    matrices = {name: reader.matrix("system", name) for name in ("A", "B", "C", "P", "Q", "R")}
    try:
        return SystemSpec.create(k, T, disturbance=disturbance, **matrices)
    except MfLqrException as e:
        detail = str(e)
        if detail.startswith("Disturbance") or "Disturbance lives" in detail:
            key = "disturbance"
        else:
            culprit = next((name for name in matrices if re.search(rf"\b{name}\b", detail)), None)
            key = f"system.{culprit}" if culprit else "system"
        raise reader.error(ConfigException.ERRORS.INVALID_VALUE, key, detail) from e


def _lambda_grid(reader: _Reader) -> tuple[float, ...]:
    table = reader.section("risk")
    if "lambda_grid" not in table:
        return tuple(settings.DEFAULT_LAMBDA_GRID)
    grid = reader.numbers("risk.lambda_grid", table["lambda_grid"])
    if not isinstance(grid, list) or not grid or any(isinstance(v, list) for v in grid):
        raise reader.error(ConfigException.ERRORS.INVALID_VALUE, "risk.lambda_grid", "Expected a nonempty list.")
    if any(v < 0.0 for v in grid):
        raise reader.error(ConfigException.ERRORS.INVALID_VALUE, "risk.lambda_grid", "λ must be nonnegative.")
    if any(a >= b for a, b in zip(grid, grid[1:])):
        raise reader.error(ConfigException.ERRORS.INVALID_VALUE, "risk.lambda_grid", "Must be strictly ascending.")
    return tuple(grid)


def _quantiles(reader: _Reader) -> tuple[float, float]:
    table = reader.section("simulation")
    if "quantiles" not in table:
        return tuple(settings.QUANTILES)
    levels = reader.numbers("simulation.quantiles", table["quantiles"])
    if not isinstance(levels, list) or len(levels) != 2 or not 0.0 <= levels[0] <= levels[1] <= 1.0:
        raise reader.error(
            ConfigException.ERRORS.INVALID_VALUE, "simulation.quantiles", "Expected [lower, upper] within [0, 1]."
        )
    return levels[0], levels[1]


def _initial_state(reader: _Reader) -> InitialStateConfig:
    table = reader.section("initial_state")
    mode = table.get("mode", "normal")
    if mode not in ("normal", "explicit"):
        raise reader.error(ConfigException.ERRORS.INVALID_VALUE, "initial_state.mode", f"Unknown mode {mode!r}.")
    if mode == "explicit":
        values = reader.numbers("initial_state.values", reader.require("initial_state", "values"))
        return InitialStateConfig(mode=mode, values=values)
    variance = reader.number("initial_state", "variance", default=2.0)
    if variance < 0.0:
        raise reader.error(ConfigException.ERRORS.INVALID_VALUE, "initial_state.variance", "Must be nonnegative.")
    variance_is_std = table.get("variance_is_std", False)
    if not isinstance(variance_is_std, bool):
        raise reader.error(ConfigException.ERRORS.INVALID_VALUE, "initial_state.variance_is_std", "Expected a boolean.")
    return InitialStateConfig(
        mode=mode,
        mean=reader.number("initial_state", "mean", default=10.0),
        variance=variance,
        variance_is_std=variance_is_std,
        seed=reader.integer("initial_state", "seed", default=settings.INITIAL_STATE_SEED),
    )


def loads_config(text: str, source: Path | None = None) -> ExperimentConfig:
    """
    Parse and validate an experiment from TOML text.

    :raises ConfigException: On syntax errors, missing or unknown keys,
        malformed numbers and values violating the problem invariants.
    """
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = re.search(r"line (\d+)", str(e))
        raise ConfigException(
            ConfigException.ERRORS.SYNTAX, line=int(match.group(1)) if match else None, detail=str(e)
        ) from e

    reader = _Reader(document, text)
    for name in document:
        if name not in SECTIONS:
            raise reader.error(ConfigException.ERRORS.UNKNOWN_KEY, name)
    name = document.get("name", source.stem if source else "experiment")
    if not isinstance(name, str):
        raise reader.error(ConfigException.ERRORS.INVALID_VALUE, "name", "Expected a string.")

    disturbance = _disturbance(reader)
    base_spec = _system(reader, disturbance)
    initial_state = _initial_state(reader)
    output = reader.section("output").get("directory", DEFAULT_OUTPUT_DIRECTORY)
    if not isinstance(output, str):
        raise reader.error(ConfigException.ERRORS.INVALID_VALUE, "output.directory", "Expected a string.")

    config = ExperimentConfig(
        name=name,
        source=source,
        base_spec=base_spec,
        lambda_grid=_lambda_grid(reader),
        n_runs=reader.integer("simulation", "n_runs", default=settings.DEFAULT_N_RUNS, minimum=1),
        base_seed=reader.integer("simulation", "base_seed", default=settings.DEFAULT_SEED),
        quantiles=_quantiles(reader),
        threads=reader.integer("simulation", "threads", default=1, minimum=1),
        initial_state=initial_state,
        output_dir=Path(output),
        document=document,
    )
    config.x0()
    logger.info(
        "Loaded experiment '{}': k={}, T={}, n={}, m={}, {} λ values, {} runs.",
        config.name,
        config.k,
        config.T,
        base_spec.n,
        base_spec.m,
        len(config.lambda_grid),
        config.n_runs,
    )
    return config


def parse_config(path: str | Path) -> ExperimentConfig:
    """
    Read an experiment file.

    :raises OSError: If the file cannot be read.
    :raises ConfigException: See :func:`loads_config`.
    """
    path = Path(path)
    return loads_config(path.read_text(encoding="utf-8"), source=path)
