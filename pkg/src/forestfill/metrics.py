"""Evaluation statistics: bias of mean/SD, OLS coefficient bias, NRMSE,
Pearson correlation, and the closed-form scenario truths they are
measured against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .dataset import DataMatrix, MissingMask
from .errors import (
    DegenerateCorrelation,
    DegenerateNrmse,
    InvalidInput,
    ShapeError,
    SingularDesign,
    ZeroDenominator,
)

# Relative threshold on the R diagonal below which the design counts as
# rank deficient.
RANK_REL_TOL = 1e-10


class ScenarioKind(Enum):
    UNCORRELATED = "uncorrelated"
    WEAK = "weak"
    STRONG = "strong"


@dataclass(frozen=True)
class ScenarioTruth:
    """Population quantities of one scenario, in (Y, X1, X2) order."""

    true_means: tuple[float, float, float]
    true_sds: tuple[float, float, float]
    true_coefs: tuple[float, float, float]
    true_resid_var: float
    true_rho: float


def scenario_truth(scenario: ScenarioKind) -> ScenarioTruth:
    """Closed-form truth for each scenario's conditional Y | X1, X2."""
    if scenario is ScenarioKind.UNCORRELATED:
        return ScenarioTruth(
            true_means=(2.0, 1.0, 1.0),
            true_sds=(math.sqrt(21.0), math.sqrt(10.0), math.sqrt(10.0)),
            true_coefs=(0.0, 1.0, 1.0),
            true_resid_var=1.0,
            true_rho=0.0,
        )
    if scenario is ScenarioKind.WEAK:
        return ScenarioTruth(
            true_means=(1.0, 1.0, 1.0),
            true_sds=(math.sqrt(10.0),) * 3,
            true_coefs=(0.6, 0.2, 0.2),
            true_resid_var=9.0,
            true_rho=0.25,
        )
    if scenario is ScenarioKind.STRONG:
        return ScenarioTruth(
            true_means=(1.0, 1.0, 1.0),
            true_sds=(math.sqrt(10.0),) * 3,
            true_coefs=(1.0 / 7.0, 3.0 / 7.0, 3.0 / 7.0),
            true_resid_var=25.0 / 7.0,
            true_rho=0.75,
        )
    raise InvalidInput(f"unknown scenario {scenario!r}")


class BiasKind(Enum):
    RELATIVE = "relative"
    ABSOLUTE = "absolute"


@dataclass(frozen=True)
class CoefBias:
    value: float
    kind: BiasKind


def _paired_vectors(a, b) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"vectors must share a 1-D shape, got {a.shape} and {b.shape}")
    return a, b


def relative_bias_mean(v_imp, v_true) -> float:
    """mean(imp)/mean(true) − 1, means over all data values."""
    v_imp, v_true = _paired_vectors(v_imp, v_true)
    denom = float(v_true.mean())
    if denom == 0.0:
        raise ZeroDenominator("true mean is zero")
    return float(v_imp.mean()) / denom - 1.0


def relative_bias_sd(v_imp, v_true) -> float:
    """sd(imp)/sd(true) − 1 with the n−1 denominator."""
    v_imp, v_true = _paired_vectors(v_imp, v_true)
    if v_true.shape[0] < 2:
        raise InvalidInput("need at least two values for a sample SD")
    denom = float(v_true.std(ddof=1))
    if denom == 0.0:
        raise ZeroDenominator("true SD is zero")
    return float(v_imp.std(ddof=1)) / denom - 1.0


@dataclass(frozen=True)
class OlsFit:
    coef: NDArray[np.float64]
    rss: float


def ols_fit(X: NDArray[np.floating], y: NDArray[np.floating]) -> OlsFit:
    """Least squares via QR; the caller supplies any intercept column."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ShapeError(f"incompatible shapes {X.shape} and {y.shape}")
    n, k = X.shape
    if n <= k:
        raise SingularDesign(f"need more rows than columns, got {n} rows for {k} columns")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= RANK_REL_TOL * diag.max():
        raise SingularDesign("design matrix is rank deficient")
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    return OlsFit(coef, float(resid @ resid))


def coef_relative_bias(est, truth) -> tuple[CoefBias, ...]:
    """Per coefficient: (est−β)/β where β ≠ 0, est−β (absolute) where β = 0."""
    est, truth = _paired_vectors(est, truth)
    out = []
    for e, t in zip(est, truth):
        if t != 0.0:
            out.append(CoefBias(float((e - t) / t), BiasKind.RELATIVE))
        else:
            out.append(CoefBias(float(e - t), BiasKind.ABSOLUTE))
    return tuple(out)


def nrmse(x_true: DataMatrix, x_imp: DataMatrix, mask: MissingMask) -> float:
    """Root mean squared imputation error over masked cells, normalized
    by the sample SD (n−1) of the true masked values.
    """
    if x_true.values.shape != x_imp.values.shape or x_true.values.shape != mask.mask.shape:
        raise ShapeError("matrix and mask shapes must all match")
    cells = mask.mask
    m = int(cells.sum())
    if m < 2:
        raise DegenerateNrmse(f"need at least 2 masked cells, got {m}")
    truth = x_true.values[cells]
    imp = x_imp.values[cells]
    denom = float(truth.var(ddof=1))
    if denom == 0.0:
        raise DegenerateNrmse("masked true values have zero variance")
    return float(np.sqrt(np.mean((truth - imp) ** 2) / denom))


def pearson(a, b) -> float:
    """Sample correlation, clipped into [−1, 1] against rounding."""
    a, b = _paired_vectors(a, b)
    if a.shape[0] < 2:
        raise InvalidInput("need at least two points for a correlation")
    sa = float(a.std(ddof=1))
    sb = float(b.std(ddof=1))
    if sa == 0.0 or sb == 0.0:
        raise DegenerateCorrelation("constant vector has no correlation")
    r = float(((a - a.mean()) @ (b - b.mean())) / ((a.shape[0] - 1) * sa * sb))
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class MetricsRecord:
    """One long-format result row: replicate × scenario × pattern × strategy."""

    replicate: int
    scenario: str
    pattern: str
    strategy: str
    iterations: int
    stopped_by: str
    rel_bias_mean_x1: float
    rel_bias_mean_x2: float
    rel_bias_sd_x1: float
    rel_bias_sd_x2: float
    coef_bias_intercept: float
    coef_bias_intercept_kind: str
    coef_bias_x1: float
    coef_bias_x2: float
    nrmse_true: float
    nrmse_oob: float
    corr_x1x2: float
    elapsed_ms: float

    def __post_init__(self) -> None:
        for name in _FLOAT_FIELDS:
            if not math.isfinite(getattr(self, name)):
                raise InvalidInput(f"{name} must be finite")


_FLOAT_FIELDS = (
    "rel_bias_mean_x1",
    "rel_bias_mean_x2",
    "rel_bias_sd_x1",
    "rel_bias_sd_x2",
    "coef_bias_intercept",
    "coef_bias_x1",
    "coef_bias_x2",
    "nrmse_true",
    "nrmse_oob",
    "corr_x1x2",
    "elapsed_ms",
)

# Fixed CSV column order.  elapsed_ms is last and written only on
# request: wall-clock noise would break byte-identical reruns.
METRICS_COLUMNS = tuple(f.name for f in fields(MetricsRecord) if f.name != "elapsed_ms")
TIMING_COLUMN = "elapsed_ms"


def metrics_header(include_timing: bool = False) -> list[str]:
    cols = list(METRICS_COLUMNS)
    if include_timing:
        cols.append(TIMING_COLUMN)
    return cols


def metrics_csv_row(record: MetricsRecord, include_timing: bool = False) -> list[str]:
    """Serialize one record in METRICS_COLUMNS order.

    Floats use the shortest round-trip representation so equal records
    always serialize to equal bytes.
    """
    row = []
    for name in metrics_header(include_timing):
        value = getattr(record, name)
        if isinstance(value, float):
            row.append(repr(value))
        else:
            row.append(str(value))
    return row
