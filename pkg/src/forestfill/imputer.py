"""Iterative random-forest imputation under three execution strategies.

All three strategies run the same outer loop: initialize missing cells
with column means, then cycle over the incomplete columns, fitting a
forest per column on its observed rows and predicting its masked rows,
until the normalized difference between successive cycles increases or
an iteration cap is reached.  They differ only in scheduling:

* ``Sequential``: columns visited one after another; each forest sees
  the values written earlier in the same cycle.
* ``ParallelForests``: identical data flow, but each column's ensemble
  is partitioned into chunks grown under chunk-indexed seed paths and
  recombined with ``merge_forests`` before predicting.
* ``ParallelVariables``: every column is fitted and predicted against
  a snapshot taken at the start of the cycle; predictions are written
  back only at the cycle barrier, so no column sees another's update
  from the current cycle.

Seed paths are keyed by (cycle, column, chunk, tree) and never by
strategy or thread, which makes results independent of physical
parallelism and lets structurally equivalent strategies produce
bit-identical output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .dataset import DataMatrix, MissingMask, imputation_order, initialize_missing
from .errors import DegenerateDiff, ImputationFailure, InvalidInput, ShapeError
from .forest import Forest, ForestParams, fit_forest, merge_forests, oob_nrmse, predict
from .stochastic import SeedSpec


@dataclass(frozen=True)
class Sequential:
    """Impute columns in order, each seeing the latest written values."""


@dataclass(frozen=True)
class ParallelForests:
    """Sequential data flow with each ensemble grown in tree chunks."""

    chunks: int = 3

    def __post_init__(self) -> None:
        if self.chunks < 1:
            raise InvalidInput(f"chunks must be >= 1, got {self.chunks}")


@dataclass(frozen=True)
class ParallelVariables:
    """Impute all columns from a shared cycle-start snapshot."""

    workers: int = 3

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise InvalidInput(f"workers must be >= 1, got {self.workers}")


ImputationStrategy = Sequential | ParallelForests | ParallelVariables


def strategy_label(strategy: ImputationStrategy) -> str:
    """Short name used in CSV rows and on the command line."""
    if isinstance(strategy, Sequential):
        return "sequential"
    if isinstance(strategy, ParallelForests):
        return "forests"
    if isinstance(strategy, ParallelVariables):
        return "variables"
    raise InvalidInput(f"unknown strategy {strategy!r}")


def parse_strategy(label: str, chunks: int = 3, workers: int = 3) -> ImputationStrategy:
    """Inverse of :func:`strategy_label`, with decomposition widths."""
    if label == "sequential":
        return Sequential()
    if label == "forests":
        return ParallelForests(chunks)
    if label == "variables":
        return ParallelVariables(workers)
    raise InvalidInput(f"unknown strategy label {label!r}")


class StopReason(Enum):
    DIFFERENCE_INCREASED = "difference_increased"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class ImputerParams:
    forest: ForestParams = ForestParams()
    max_iterations: int = 10
    seed: SeedSpec = SeedSpec(0)

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise InvalidInput(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass(frozen=True)
class ImputationResult:
    """Outcome of one imputation run.

    ``oob_nrmse_final`` is the unweighted mean of the per-column OOB
    NRMSE values from the cycle whose matrix is returned (NaN when
    nothing was imputed).
    """

    imputed: DataMatrix
    iterations_performed: int
    stopped_by: StopReason
    diff_trace: tuple[float, ...]
    oob_nrmse_final: float


def chunk_sizes(n_trees: int, chunks: int) -> list[int]:
    """Partition a tree count into contiguous chunks, larger first.

    Sizes differ by at most one; zero-size chunks (more chunks than
    trees) are dropped.
    """
    if n_trees < 1:
        raise InvalidInput(f"n_trees must be >= 1, got {n_trees}")
    if chunks < 1:
        raise InvalidInput(f"chunks must be >= 1, got {chunks}")
    base, rem = divmod(n_trees, chunks)
    sizes = [base + 1] * rem + [base] * (chunks - rem)
    return [s for s in sizes if s > 0]


def iteration_diff(new: DataMatrix, old: DataMatrix, columns) -> float:
    """Normalized change between successive cycles.

    Sum of squared cell differences over the listed columns (entire
    columns; observed cells contribute zero) divided by the sum of
    squared new values over the same cells.
    """
    if new.values.shape != old.values.shape:
        raise ShapeError(
            f"matrices must share a shape, got {new.values.shape} and {old.values.shape}"
        )
    cols = list(columns)
    a = new.values[:, cols]
    b = old.values[:, cols]
    denom = float((a * a).sum())
    if denom == 0.0:
        raise DegenerateDiff("sum of squared imputed-column values is zero")
    return float(((a - b) ** 2).sum() / denom)


def _fit_target_forest(
    X: np.ndarray,
    y: np.ndarray,
    base: ForestParams,
    seed: SeedSpec,
    chunks: int,
    threads: int,
) -> Forest:
    """Grow one column's ensemble as chunked sub-forests and recombine.

    Chunk ``c`` of size ``s`` runs under ``seed.child(c)``, so the
    result depends only on the chunk layout, never on scheduling.
    """
    sizes = chunk_sizes(base.n_trees, chunks)

    def build(c: int) -> Forest:
        part_params = replace(base, n_trees=sizes[c], seed=seed.child(c))
        return fit_forest(X, y, part_params)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(sizes))) as pool:
            parts = list(pool.map(build, range(len(sizes))))
    else:
        parts = [build(c) for c in range(len(sizes))]
    return merge_forests(parts)


def impute(
    data: DataMatrix,
    mask: MissingMask,
    params: ImputerParams,
    strategy: ImputationStrategy,
    threads: int = 1,
) -> ImputationResult:
    """Run the iterative imputation loop under the given strategy.

    Stops when the cycle-to-cycle difference first increases (returning
    the previous cycle's matrix) or after ``params.max_iterations``
    cycles (returning the last).  ``threads`` caps physical parallelism
    only; results are identical for any value.
    """
    if data.n_cols < 2:
        raise InvalidInput(f"imputation needs at least 2 columns, got {data.n_cols}")
    if data.values.shape != mask.mask.shape:
        raise ShapeError(
            f"matrix shape {data.values.shape} does not match mask shape {mask.mask.shape}"
        )
    order = imputation_order(mask)
    if not order:
        return ImputationResult(data, 0, StopReason.DIFFERENCE_INCREASED, (), float("nan"))

    working = initialize_missing(data, mask).values.copy()
    obs_rows = {j: ~mask.mask[:, j] for j in order}
    mis_rows = {j: mask.mask[:, j] for j in order}
    pred_cols = {j: [c for c in range(data.n_cols) if c != j] for j in order}

    chunks = strategy.chunks if isinstance(strategy, ParallelForests) else 1

    def fit_and_predict(source: np.ndarray, j: int, cycle: int) -> tuple[np.ndarray, float]:
        X = source[obs_rows[j]][:, pred_cols[j]]
        y = source[obs_rows[j], j]
        forest = _fit_target_forest(
            X, y, params.forest, params.seed.child(cycle, j), chunks, threads
        )
        preds = predict(forest, source[mis_rows[j]][:, pred_cols[j]])
        return preds, oob_nrmse(forest, y)

    prev_vals = working.copy()
    prev_diff: float | None = None
    prev_oob = float("nan")
    trace: list[float] = []

    try:
        for cycle in range(1, params.max_iterations + 1):
            col_oob: list[float] = []
            if isinstance(strategy, ParallelVariables):
                snapshot = working.copy()
                task_threads = min(threads, strategy.workers)
                if task_threads > 1 and len(order) > 1:
                    with ThreadPoolExecutor(max_workers=min(task_threads, len(order))) as pool:
                        outcomes = list(
                            pool.map(lambda j: fit_and_predict(snapshot, j, cycle), order)
                        )
                else:
                    outcomes = [fit_and_predict(snapshot, j, cycle) for j in order]
                # cycle barrier: write-back happens only after every column finished
                for j, (preds, oob) in zip(order, outcomes):
                    working[mis_rows[j], j] = preds
                    col_oob.append(oob)
            else:
                for j in order:
                    preds, oob = fit_and_predict(working, j, cycle)
                    working[mis_rows[j], j] = preds
                    col_oob.append(oob)

            current_vals = working.copy()
            diff = iteration_diff(
                data.with_values(current_vals), data.with_values(prev_vals), order
            )
            trace.append(diff)
            cycle_oob = float(np.mean(col_oob))

            if prev_diff is not None and diff > prev_diff:
                return ImputationResult(
                    data.with_values(prev_vals),
                    cycle,
                    StopReason.DIFFERENCE_INCREASED,
                    tuple(trace),
                    prev_oob,
                )
            prev_vals = current_vals
            prev_diff = diff
            prev_oob = cycle_oob
    except DegenerateDiff as exc:
        raise ImputationFailure(str(exc)) from exc

    return ImputationResult(
        data.with_values(prev_vals),
        params.max_iterations,
        StopReason.MAX_ITERATIONS,
        tuple(trace),
        prev_oob,
    )
