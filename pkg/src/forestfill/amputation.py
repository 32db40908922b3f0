"""MAR missingness generation driven by an always-observed weight column.

Rows are first assigned to a missingness pattern (which columns vanish
together), then masked by a Bernoulli draw whose probability is a
right-tailed logistic function of the standardized weight column,
shifted so the average missingness probability hits the requested
proportion.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .dataset import DataMatrix, MissingMask
from .errors import AmputationFailure, InvalidInput
from .stochastic import SeedSpec, as_generator

# Bisection bracket and tolerance for the logistic shift.
SHIFT_LO = -50.0
SHIFT_HI = 50.0
SHIFT_TOL = 1e-6
SHIFT_MAX_STEPS = 200


class Mechanism(Enum):
    RIGHT_TAIL_LOGISTIC = "right_tail_logistic"


class PatternKind(Enum):
    TWO_CELLS = "two_cells"
    ONE_CELL = "one_cell"


@dataclass(frozen=True)
class AmputationSpec:
    """Which columns go missing together, how often, and driven by what."""

    patterns: tuple[frozenset[int], ...]
    pattern_freq: tuple[float, ...]
    weight_column: int = 0
    prop: float = 0.5
    mechanism: Mechanism = Mechanism.RIGHT_TAIL_LOGISTIC

    def __post_init__(self) -> None:
        patterns = tuple(frozenset(int(c) for c in p) for p in self.patterns)
        freq = tuple(float(f) for f in self.pattern_freq)
        object.__setattr__(self, "patterns", patterns)
        object.__setattr__(self, "pattern_freq", freq)
        if not patterns:
            raise InvalidInput("at least one pattern is required")
        if len(freq) != len(patterns):
            raise InvalidInput(f"{len(freq)} frequencies for {len(patterns)} patterns")
        for p in patterns:
            if not p:
                raise InvalidInput("patterns must be non-empty column sets")
            if self.weight_column in p:
                raise InvalidInput(f"pattern {set(p)} includes the weight column")
        if any(f <= 0.0 for f in freq):
            raise InvalidInput("pattern frequencies must be positive")
        if abs(sum(freq) - 1.0) > 1e-9:
            raise InvalidInput(f"pattern frequencies must sum to 1, got {sum(freq)}")
        if not 0.0 < self.prop < 1.0:
            raise InvalidInput(f"prop must be in (0, 1), got {self.prop}")


@dataclass(frozen=True)
class AmputationOutcome:
    mask: MissingMask
    realized_prop: float
    shift: float


def _logistic(u: NDArray[np.float64]) -> NDArray[np.float64]:
    # Split on sign to avoid overflow in exp for large |u|.
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    e = np.exp(u[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _solve_shift(z: NDArray[np.float64], prop: float) -> float:
    """Bisect for b with mean(logistic(z + b)) = prop."""

    def excess(b: float) -> float:
        return float(_logistic(z + b).mean()) - prop

    lo, hi = SHIFT_LO, SHIFT_HI
    if excess(lo) > 0.0 or excess(hi) < 0.0:
        raise AmputationFailure(
            f"target proportion {prop} not bracketed by shifts in [{SHIFT_LO}, {SHIFT_HI}]"
        )
    for _ in range(SHIFT_MAX_STEPS):
        mid = 0.5 * (lo + hi)
        e = excess(mid)
        if abs(e) < SHIFT_TOL:
            return mid
        if e < 0.0:
            lo = mid
        else:
            hi = mid
    raise AmputationFailure(
        f"shift bisection did not reach |error| < {SHIFT_TOL} in {SHIFT_MAX_STEPS} steps"
    )


def ampute(data: DataMatrix, spec: AmputationSpec, seed: SeedSpec | np.random.Generator) -> AmputationOutcome:
    """Generate a MAR mask for complete data.

    Draw order under the seed: one uniform per row for pattern
    assignment, then one uniform per row for the missingness Bernoulli.
    Probability is strictly increasing in the weight column, so high-Y
    rows go missing more often.
    """
    n = data.n_rows
    if not 0 <= spec.weight_column < data.n_cols:
        raise InvalidInput(f"weight column {spec.weight_column} out of range")
    for p in spec.patterns:
        for c in p:
            if not 0 <= c < data.n_cols:
                raise InvalidInput(f"pattern column {c} out of range")
    weight = data.values[:, spec.weight_column]
    sd = float(weight.std(ddof=1)) if n > 1 else 0.0
    if sd == 0.0:
        raise AmputationFailure("weight column has zero variance")
    z = (weight - weight.mean()) / sd
    shift = _solve_shift(z, spec.prop)
    probs = _logistic(z + shift)

    rng = as_generator(seed)
    cum = np.cumsum(spec.pattern_freq)
    assigned = np.searchsorted(cum, rng.random(n), side="right")
    assigned = np.minimum(assigned, len(spec.patterns) - 1)
    masked_rows = rng.random(n) < probs

    mask = np.zeros((n, data.n_cols), dtype=bool)
    for k, pattern in enumerate(spec.patterns):
        rows = masked_rows & (assigned == k)
        for c in pattern:
            mask[rows, c] = True
    return AmputationOutcome(MissingMask(mask), float(masked_rows.mean()), shift)


def scenario_patterns(
    kind: PatternKind,
    n_cols: int = 3,
    weight_column: int = 0,
    prop: float = 0.5,
) -> AmputationSpec:
    """Pattern layouts keyed by kind, over every column but the weight.

    ``TWO_CELLS``: an incomplete row loses all non-weight columns at
    once.  ``ONE_CELL``: an incomplete row loses exactly one non-weight
    column, each equally likely.  The defaults give the three-column
    study layout over (Y, X1, X2).
    """
    targets = [c for c in range(n_cols) if c != weight_column]
    if not targets:
        raise InvalidInput("no columns left to ampute")
    if kind is PatternKind.TWO_CELLS:
        return AmputationSpec(
            patterns=(frozenset(targets),),
            pattern_freq=(1.0,),
            weight_column=weight_column,
            prop=prop,
        )
    if kind is PatternKind.ONE_CELL:
        share = 1.0 / len(targets)
        return AmputationSpec(
            patterns=tuple(frozenset({c}) for c in targets),
            pattern_freq=(share,) * len(targets),
            weight_column=weight_column,
            prop=prop,
        )
    raise InvalidInput(f"unknown pattern kind {kind!r}")
