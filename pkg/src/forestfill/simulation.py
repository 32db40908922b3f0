"""Scenario definitions and the study pipeline.

One replicate is: generate a complete dataset, ampute it, impute the
same (data, mask) once per strategy, and measure against the complete
data and closed-form truth.  All strategies inside a replicate share
one seed path, so structurally equivalent strategies stay bitwise
comparable, and replicates are independent jobs safe to run in any
order on any number of workers.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .amputation import PatternKind, ampute, scenario_patterns
from .dataset import MISSING_SENTINEL, DataMatrix, MissingMask
from .errors import ForestfillError, InvalidInput, StudyFailure
from .forest import ForestParams
from .imputer import (
    ImputationResult,
    ImputationStrategy,
    ImputerParams,
    ParallelForests,
    ParallelVariables,
    Sequential,
    impute,
    strategy_label,
)
from .metrics import (
    MetricsRecord,
    ScenarioKind,
    coef_relative_bias,
    nrmse,
    ols_fit,
    pearson,
    relative_bias_mean,
    relative_bias_sd,
    scenario_truth,
)
from .stochastic import MvnSpec, SeedSpec, sample_mvn

DEFAULT_MASTER_SEED = 1729

COLUMN_NAMES = ("Y", "X1", "X2")

_SCENARIO_MVN = {
    ScenarioKind.UNCORRELATED: MvnSpec(
        mean=np.array([2.0, 1.0, 1.0]),
        cov=np.array(
            [
                [21.0, 10.0, 10.0],
                [10.0, 10.0, 0.0],
                [10.0, 0.0, 10.0],
            ]
        ),
    ),
    ScenarioKind.WEAK: MvnSpec(
        mean=np.array([1.0, 1.0, 1.0]),
        cov=np.where(np.eye(3, dtype=bool), 10.0, 10.0 * 0.25),
    ),
    ScenarioKind.STRONG: MvnSpec(
        mean=np.array([1.0, 1.0, 1.0]),
        cov=np.where(np.eye(3, dtype=bool), 10.0, 10.0 * 0.75),
    ),
}

# Stable integer codes used in seed paths (enum values are strings).
_SCENARIO_CODE = {
    ScenarioKind.UNCORRELATED: 0,
    ScenarioKind.WEAK: 1,
    ScenarioKind.STRONG: 2,
}
_PATTERN_CODE = {PatternKind.TWO_CELLS: 0, PatternKind.ONE_CELL: 1}


def scenario_mvn(kind: ScenarioKind) -> MvnSpec:
    """Generating distribution of one scenario, columns (Y, X1, X2)."""
    return _SCENARIO_MVN[kind]


def generate_scenario(kind: ScenarioKind, n: int, seed: SeedSpec) -> DataMatrix:
    """Draw one complete dataset for a scenario."""
    return sample_mvn(scenario_mvn(kind), n, seed, COLUMN_NAMES)


DEFAULT_STRATEGIES: tuple[ImputationStrategy, ...] = (
    Sequential(),
    ParallelForests(chunks=3),
    ParallelVariables(workers=3),
)


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation cell: scenario × pattern, plus run parameters."""

    scenario: ScenarioKind
    pattern: PatternKind
    strategies: tuple[ImputationStrategy, ...] = DEFAULT_STRATEGIES
    n_obs: int = 200
    n_replicates: int = 500
    n_trees: int = 100
    mtry: int | None = None
    min_node_size: int = 5
    max_depth: int | None = None
    max_iterations: int = 10
    master_seed: int = DEFAULT_MASTER_SEED

    def __post_init__(self) -> None:
        if self.n_obs < 10:
            raise InvalidInput(f"n_obs must be >= 10, got {self.n_obs}")
        if self.n_replicates < 1:
            raise InvalidInput(f"n_replicates must be >= 1, got {self.n_replicates}")
        if not self.strategies:
            raise InvalidInput("at least one strategy is required")


@dataclass(frozen=True)
class ReplicateBundle:
    """Everything one replicate produced, strategies in config order."""

    complete: DataMatrix
    mask: MissingMask
    results: tuple[ImputationResult, ...]
    records: tuple[MetricsRecord, ...]


def _replicate_seed(config: ScenarioConfig, replicate_id: int) -> SeedSpec:
    return SeedSpec(config.master_seed).child(
        _SCENARIO_CODE[config.scenario], _PATTERN_CODE[config.pattern], replicate_id
    )


def _imputer_params(config: ScenarioConfig, replicate_id: int) -> ImputerParams:
    forest = ForestParams(
        n_trees=config.n_trees,
        mtry=config.mtry,
        min_node_size=config.min_node_size,
        max_depth=config.max_depth,
    )
    # Sub-stream 2 of the replicate seed; 0 and 1 belong to data
    # generation and amputation.  The path carries no strategy label.
    return ImputerParams(
        forest=forest,
        max_iterations=config.max_iterations,
        seed=_replicate_seed(config, replicate_id).child(2),
    )


def run_replicate(config: ScenarioConfig, replicate_id: int) -> ReplicateBundle:
    """Generate, ampute, impute under every strategy, and measure."""
    rep_seed = _replicate_seed(config, replicate_id)
    complete = generate_scenario(config.scenario, config.n_obs, rep_seed.child(0))
    outcome = ampute(complete, scenario_patterns(config.pattern), rep_seed.child(1))
    mask = outcome.mask

    # Blank the masked cells so no stage can accidentally read the truth.
    amputed_values = complete.values.copy()
    amputed_values[mask.mask] = MISSING_SENTINEL
    amputed = complete.with_values(amputed_values)

    truth = scenario_truth(config.scenario)
    params = _imputer_params(config, replicate_id)

    results = []
    records = []
    for strategy in config.strategies:
        t0 = time.perf_counter()
        result = impute(amputed, mask, params, strategy)
        elapsed_ms = (time.perf_counter() - t0) * 1000.0
        imp = result.imputed.values
        design = np.column_stack([np.ones(config.n_obs), imp[:, 1], imp[:, 2]])
        fit = ols_fit(design, imp[:, 0])
        biases = coef_relative_bias(fit.coef, truth.true_coefs)
        records.append(
            MetricsRecord(
                replicate=replicate_id,
                scenario=config.scenario.value,
                pattern=config.pattern.value,
                strategy=strategy_label(strategy),
                iterations=result.iterations_performed,
                stopped_by=result.stopped_by.value,
                rel_bias_mean_x1=relative_bias_mean(imp[:, 1], complete.values[:, 1]),
                rel_bias_mean_x2=relative_bias_mean(imp[:, 2], complete.values[:, 2]),
                rel_bias_sd_x1=relative_bias_sd(imp[:, 1], complete.values[:, 1]),
                rel_bias_sd_x2=relative_bias_sd(imp[:, 2], complete.values[:, 2]),
                coef_bias_intercept=biases[0].value,
                coef_bias_intercept_kind=biases[0].kind.value,
                coef_bias_x1=biases[1].value,
                coef_bias_x2=biases[2].value,
                nrmse_true=nrmse(complete, result.imputed, mask),
                nrmse_oob=result.oob_nrmse_final,
                corr_x1x2=pearson(imp[:, 1], imp[:, 2]),
                elapsed_ms=elapsed_ms,
            )
        )
        results.append(result)
    return ReplicateBundle(complete, mask, tuple(results), tuple(records))


@dataclass(frozen=True)
class ReplicateFailure:
    """A replicate that aborted; the study records it and continues."""

    scenario: str
    pattern: str
    replicate: int
    error: str


@dataclass(frozen=True)
class StudyResult:
    records: tuple[MetricsRecord, ...]
    failures: tuple[ReplicateFailure, ...]

    @property
    def n_replicates(self) -> int:
        seen = {(r.scenario, r.pattern, r.replicate) for r in self.records}
        return len(seen) + len(self.failures)


# Fraction of failed replicates above which the whole study is rejected.
FAILURE_RATE_LIMIT = 0.01


def _replicate_job(args: tuple[ScenarioConfig, int]):
    config, replicate_id = args
    try:
        bundle = run_replicate(config, replicate_id)
        return bundle.records
    except ForestfillError as exc:
        return ReplicateFailure(
            config.scenario.value, config.pattern.value, replicate_id, str(exc)
        )


def run_study(
    configs: list[ScenarioConfig],
    threads: int = 1,
    progress=None,
) -> StudyResult:
    """Run every replicate of every config.

    Rows come back in (config, replicate, strategy) order no matter how
    execution was scheduled.  Raises :class:`StudyFailure` (carrying the
    partial result in ``.result``) when more than 1% of replicates fail.
    """
    jobs = [
        (config, replicate_id)
        for config in configs
        for replicate_id in range(config.n_replicates)
    ]
    records: list[MetricsRecord] = []
    failures: list[ReplicateFailure] = []

    def consume(outcome, done: int) -> None:
        if isinstance(outcome, ReplicateFailure):
            failures.append(outcome)
        else:
            records.extend(outcome)
        if progress is not None:
            progress(done, len(jobs))

    if threads > 1 and len(jobs) > 1:
        chunksize = max(1, len(jobs) // (threads * 8))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for done, outcome in enumerate(
                pool.map(_replicate_job, jobs, chunksize=chunksize), start=1
            ):
                consume(outcome, done)
    else:
        for done, job in enumerate(jobs, start=1):
            consume(_replicate_job(job), done)

    result = StudyResult(tuple(records), tuple(failures))
    if jobs and len(failures) > FAILURE_RATE_LIMIT * len(jobs):
        error = StudyFailure(len(failures), len(jobs))
        error.result = result
        raise error
    return result
