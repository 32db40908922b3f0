"""Seed-path RNG streams, multivariate normal sampling, bootstrap draws.

Every random draw in the package flows through a :class:`SeedSpec`: a
master seed plus a tuple of non-negative integers naming one logical
task (replicate, cycle, column, chunk, tree, ...).  Each path maps to
an independent generator state by hashing, never by advancing a shared
stream, so results are identical no matter how many workers run the
tasks or in which order they finish.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .dataset import DataMatrix
from .errors import FactorizationFailure, InvalidInput, ShapeError

# Pivots below this fraction of the largest diagonal entry are treated
# as non-positive-definite rather than factored.
PIVOT_REL_TOL = 1e-12

_MAX_SEED = 2**64


@dataclass(frozen=True)
class SeedSpec:
    """A master seed plus a path of task indices naming one RNG stream."""

    master_seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < _MAX_SEED:
            raise InvalidInput(f"master_seed must be a 64-bit unsigned int, got {self.master_seed}")
        if any(p < 0 for p in self.path):
            raise InvalidInput(f"seed path components must be non-negative, got {self.path}")

    def child(self, *indices: int) -> SeedSpec:
        """Extend the path, naming a sub-task's stream."""
        return SeedSpec(self.master_seed, self.path + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        """Materialize the stream for this path.

        The state is hash-derived from ``(master_seed, path)``; two specs
        are equal exactly when they produce identical generators.
        """
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.default_rng(ss)


def as_generator(seed: SeedSpec | np.random.Generator) -> np.random.Generator:
    """Accept either a spec or an already-built generator."""
    if isinstance(seed, SeedSpec):
        return seed.generator()
    return seed


@dataclass(frozen=True)
class MvnSpec:
    """Mean vector and covariance matrix of a multivariate normal."""

    mean: NDArray[np.floating]
    cov: NDArray[np.floating]

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if mean.ndim != 1:
            raise ShapeError(f"mean must be a vector, got shape {mean.shape}")
        p = mean.shape[0]
        if cov.shape != (p, p):
            raise ShapeError(f"cov must be {p}x{p} to match mean, got {cov.shape}")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise InvalidInput("mean and cov must be finite")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise InvalidInput("cov must be symmetric to within 1e-12")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def cholesky(cov: NDArray[np.floating]) -> NDArray[np.float64]:
    """Lower-triangular factor L with L @ L.T == cov.

    Written out by hand (rather than ``np.linalg.cholesky``) so a failed
    pivot can be reported by index.  Raises
    :class:`~forestfill.errors.FactorizationFailure` when a pivot falls
    below ``PIVOT_REL_TOL`` times the largest diagonal entry.
    """
    a = np.array(cov, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"cov must be square, got shape {a.shape}")
    p = a.shape[0]
    tol = PIVOT_REL_TOL * float(np.max(np.diag(a))) if p else 0.0
    lower = np.zeros_like(a)
    for k in range(p):
        pivot = a[k, k] - float(lower[k, :k] @ lower[k, :k])
        if pivot < tol or pivot <= 0.0:
            raise FactorizationFailure(k, pivot)
        lower[k, k] = np.sqrt(pivot)
        if k + 1 < p:
            lower[k + 1 :, k] = (a[k + 1 :, k] - lower[k + 1 :, :k] @ lower[k, :k]) / lower[k, k]
    return lower


def sample_mvn(
    spec: MvnSpec,
    n: int,
    seed: SeedSpec | np.random.Generator,
    column_names: tuple[str, ...] | None = None,
) -> DataMatrix:
    """Draw ``n`` rows from the given multivariate normal.

    Rows are ordered by draw index, so the same seed always yields the
    same matrix regardless of how the caller schedules work.  Column
    names default to ``v1 .. vp``.
    """
    if n < 1:
        raise InvalidInput(f"n must be positive, got {n}")
    lower = cholesky(spec.cov)
    rng = as_generator(seed)
    z = rng.standard_normal((n, spec.dim))
    if column_names is None:
        column_names = tuple(f"v{j + 1}" for j in range(spec.dim))
    return DataMatrix(spec.mean + z @ lower.T, column_names)


def bootstrap_indices(
    n: int,
    seed: SeedSpec | np.random.Generator,
) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """Uniform draw of ``n`` indices with replacement, plus the out-of-bag set.

    Returns ``(in_bag, oob)`` where ``oob`` lists the indices that were
    never drawn, in ascending order.
    """
    if n < 1:
        raise InvalidInput(f"n must be positive, got {n}")
    rng = as_generator(seed)
    in_bag = rng.integers(0, n, size=n)
    oob = np.flatnonzero(np.bincount(in_bag, minlength=n) == 0)
    return in_bag, oob
