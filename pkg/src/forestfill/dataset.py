"""Core data model: numeric matrix, missingness mask, column summaries.

A :class:`DataMatrix` always stores finite numbers; missing cells hold
an arbitrary placeholder and the parallel :class:`MissingMask` is the
single source of truth for which cells are real.  Both types are
treated as immutable once constructed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import CsvParseError, InvalidInput, ShapeError, UnimputableColumn

# Token recognized (next to the empty field) as a missing cell on input
# and written for masked cells on output.
MISSING_TOKEN = "NA"

# Value stored at masked cells.  Arbitrary by design: nothing may read a
# masked cell without consulting the mask first.
MISSING_SENTINEL = 0.0


@dataclass(frozen=True)
class DataMatrix:
    """An n×p matrix of finite reals with unique column names."""

    values: NDArray[np.float64]
    column_names: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        names = tuple(str(c) for c in self.column_names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", names)
        if values.ndim != 2:
            raise ShapeError(f"values must be 2-D, got {values.ndim}-D")
        n, p = values.shape
        if n < 1 or p < 1:
            raise ShapeError(f"matrix must be at least 1x1, got {values.shape}")
        if len(names) != p:
            raise ShapeError(f"{len(names)} column names for {p} columns")
        if len(set(names)) != p:
            raise InvalidInput("column names must be unique")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("all stored values must be finite")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column_index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise InvalidInput(f"no column named {name!r}") from None

    def with_values(self, values: NDArray[np.floating]) -> DataMatrix:
        """Same column names, new cell contents."""
        return DataMatrix(np.asarray(values, dtype=np.float64), self.column_names)


@dataclass(frozen=True)
class MissingMask:
    """Boolean n×p indicator, true where the cell is missing."""

    mask: NDArray[np.bool_]

    def __post_init__(self) -> None:
        mask = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", mask)
        if mask.ndim != 2:
            raise ShapeError(f"mask must be 2-D, got {mask.ndim}-D")

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def missing_counts(self) -> NDArray[np.int64]:
        """Number of missing cells per column."""
        return self.mask.sum(axis=0).astype(np.int64)

    def any_missing(self) -> bool:
        return bool(self.mask.any())


@dataclass(frozen=True)
class ColumnSummary:
    """Observed-cell statistics for one column."""

    col: int
    n_observed: int
    mean_observed: float
    sd_observed: float


def _check_paired(matrix: DataMatrix, mask: MissingMask) -> None:
    if matrix.values.shape != mask.mask.shape:
        raise ShapeError(
            f"matrix shape {matrix.values.shape} does not match mask shape {mask.mask.shape}"
        )


def observed_mean(matrix: DataMatrix, mask: MissingMask, col: int) -> float:
    """Arithmetic mean of the observed cells in one column."""
    _check_paired(matrix, mask)
    observed = ~mask.mask[:, col]
    if not observed.any():
        raise UnimputableColumn(col, matrix.column_names[col])
    return float(matrix.values[observed, col].mean())


def column_summaries(matrix: DataMatrix, mask: MissingMask) -> list[ColumnSummary]:
    """Per-column observed count, mean, and sample SD (n−1 denominator).

    Columns with fewer than two observed cells report sd_observed = 0.
    """
    _check_paired(matrix, mask)
    out = []
    for col in range(matrix.n_cols):
        observed = matrix.values[~mask.mask[:, col], col]
        n_obs = observed.shape[0]
        if n_obs == 0:
            raise UnimputableColumn(col, matrix.column_names[col])
        sd = float(observed.std(ddof=1)) if n_obs > 1 else 0.0
        out.append(ColumnSummary(col, n_obs, float(observed.mean()), sd))
    return out


def initialize_missing(matrix: DataMatrix, mask: MissingMask) -> DataMatrix:
    """Replace every masked cell with its column's observed mean."""
    _check_paired(matrix, mask)
    values = matrix.values.copy()
    for col in np.flatnonzero(mask.mask.any(axis=0)):
        values[mask.mask[:, col], col] = observed_mean(matrix, mask, int(col))
    return matrix.with_values(values)


def imputation_order(mask: MissingMask) -> list[int]:
    """Columns with missing cells, ascending by missing count.

    Ties break by ascending column index so the visiting order is
    deterministic.
    """
    counts = mask.missing_counts()
    cols = np.flatnonzero(counts > 0)
    return sorted((int(c) for c in cols), key=lambda c: (counts[c], c))


# ---------------------------------------------------------------------------
# CSV ingestion and emission
# ---------------------------------------------------------------------------


def _format_cell(value: float) -> str:
    # repr of a Python float is the shortest string that round-trips.
    return repr(float(value))


def read_csv(path: str | Path) -> tuple[DataMatrix, MissingMask]:
    """Read a numeric CSV with a header row.

    The empty field and the literal token ``NA`` parse as missing; any
    other cell must parse as a decimal real.  Row/column positions in
    errors are 1-based with the header as row 1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise CsvParseError(1, 1, "empty file")
    header = [h.strip() for h in rows[0]]
    if not header or any(h == "" for h in header):
        raise CsvParseError(1, 1, "missing or empty column name in header")
    p = len(header)
    if len(rows) < 2:
        raise CsvParseError(2, 1, "no data rows")
    n = len(rows) - 1
    values = np.full((n, p), MISSING_SENTINEL, dtype=np.float64)
    mask = np.zeros((n, p), dtype=bool)
    for i, row in enumerate(rows[1:]):
        file_row = i + 2
        if len(row) != p:
            raise CsvParseError(file_row, 1, f"expected {p} fields, found {len(row)}")
        for j, cell in enumerate(row):
            token = cell.strip()
            if token == "" or token == MISSING_TOKEN:
                mask[i, j] = True
                continue
            try:
                values[i, j] = float(token)
            except ValueError:
                raise CsvParseError(file_row, j + 1, f"unparseable cell {cell!r}") from None
            if not np.isfinite(values[i, j]):
                raise CsvParseError(file_row, j + 1, f"non-finite cell {cell!r}")
    return DataMatrix(values, tuple(header)), MissingMask(mask)


def write_csv(path: str | Path, matrix: DataMatrix, mask: MissingMask | None = None) -> None:
    """Write a matrix as CSV, emitting ``NA`` for masked cells.

    Floats are formatted with the shortest round-trip representation so
    identical matrices always produce identical bytes.
    """
    if mask is not None:
        _check_paired(matrix, mask)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(matrix.column_names)
        for i in range(matrix.n_rows):
            row = []
            for j in range(matrix.n_cols):
                if mask is not None and mask.mask[i, j]:
                    row.append(MISSING_TOKEN)
                else:
                    row.append(_format_cell(matrix.values[i, j]))
            writer.writerow(row)
