"""CART regression trees and bagged ensembles with out-of-bag tracking.

Trees split on the (feature, midpoint-threshold) pair that maximizes
variance reduction over ``mtry`` randomly drawn candidate features.
Forests are grown tree-by-tree from seed paths extended by tree index,
so any partition of the trees into concurrent chunks reproduces the
same ensemble.  ``merge_forests`` is the recombination primitive used
by the chunked execution strategy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .errors import DegenerateNrmse, InvalidInput, OobUnavailable, ShapeError
from .stochastic import SeedSpec, as_generator, bootstrap_indices


@dataclass(frozen=True)
class ForestParams:
    """Hyperparameters for one bagged ensemble.

    ``mtry = None`` resolves to floor(sqrt(n_predictors)) with a floor
    of 1 at fit time.  ``max_depth = None`` means unlimited.
    """

    n_trees: int = 100
    mtry: int | None = None
    min_node_size: int = 5
    max_depth: int | None = None
    seed: SeedSpec = SeedSpec(0)

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise InvalidInput(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_node_size < 1:
            raise InvalidInput(f"min_node_size must be >= 1, got {self.min_node_size}")
        if self.mtry is not None and self.mtry < 1:
            raise InvalidInput(f"mtry must be >= 1, got {self.mtry}")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidInput(f"max_depth must be >= 0, got {self.max_depth}")


def resolve_mtry(params: ForestParams, n_predictors: int) -> int:
    """Number of candidate features per split for a given design width."""
    if params.mtry is None:
        return max(1, math.isqrt(n_predictors))
    if params.mtry > n_predictors:
        raise InvalidInput(f"mtry={params.mtry} exceeds feature count {n_predictors}")
    return params.mtry


@dataclass(frozen=True)
class TreeNode:
    """One node of a regression tree; a leaf when ``split_feature`` is None.

    Rows route left when value <= threshold.  Every node carries the
    mean response and sample count of its training subset.
    """

    split_feature: int | None
    split_threshold: float | None
    left: TreeNode | None
    right: TreeNode | None
    prediction: float
    n_samples: int

    @property
    def is_leaf(self) -> bool:
        return self.split_feature is None


def _as_design(X: NDArray[np.floating]) -> NDArray[np.float64]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got {X.ndim}-D")
    return X


def _tree_from_packed(feature, threshold, left, right, value, n_samples, n_nodes) -> TreeNode:
    # Children always get higher slot ids than their parent, so a single
    # reverse pass links the whole tree without recursion.
    nodes: list[TreeNode | None] = [None] * n_nodes
    for i in range(n_nodes - 1, -1, -1):
        if feature[i] < 0:
            nodes[i] = TreeNode(None, None, None, None, float(value[i]), int(n_samples[i]))
        else:
            nodes[i] = TreeNode(
                int(feature[i]),
                float(threshold[i]),
                nodes[left[i]],
                nodes[right[i]],
                float(value[i]),
                int(n_samples[i]),
            )
    root = nodes[0]
    assert root is not None
    return root


class Forest:
    """A fitted ensemble plus per-training-row out-of-bag accumulators.

    Tree structure is stored in flat arrays for fast traversal; the
    ``trees`` property materializes linked :class:`TreeNode` views on
    demand.
    """

    def __init__(self, packed, n_nodes, oob_sum, oob_count, n_features: int):
        self._feature, self._threshold, self._left, self._right, self._value, self._n_samples = packed
        self._n_nodes = n_nodes
        self._oob_sum = oob_sum
        self._oob_count = oob_count
        self._n_features = n_features
        self._tree_views: tuple[TreeNode, ...] | None = None

    @property
    def n_trees(self) -> int:
        return self._feature.shape[0]

    @property
    def n_features(self) -> int:
        return self._n_features

    @property
    def n_train(self) -> int:
        return self._oob_sum.shape[0]

    @property
    def trees(self) -> tuple[TreeNode, ...]:
        if self._tree_views is None:
            self._tree_views = tuple(
                _tree_from_packed(
                    self._feature[t],
                    self._threshold[t],
                    self._left[t],
                    self._right[t],
                    self._value[t],
                    self._n_samples[t],
                    int(self._n_nodes[t]),
                )
                for t in range(self.n_trees)
            )
        return self._tree_views

    @property
    def n_trees_oob(self) -> NDArray[np.int64]:
        """Per training row: how many trees held it out-of-bag."""
        return self._oob_count

    @property
    def oob_predictions(self) -> NDArray[np.float64]:
        """Per-row OOB mean prediction; NaN where no tree held the row out."""
        with np.errstate(invalid="ignore"):
            return np.where(self._oob_count > 0, self._oob_sum / self._oob_count, np.nan)


def _alloc_packed(n_trees: int, max_nodes: int):
    return (
        np.empty((n_trees, max_nodes), np.int32),
        np.empty((n_trees, max_nodes), np.float64),
        np.empty((n_trees, max_nodes), np.int32),
        np.empty((n_trees, max_nodes), np.int32),
        np.empty((n_trees, max_nodes), np.float64),
        np.empty((n_trees, max_nodes), np.int32),
    )


def _check_training_inputs(X: NDArray[np.float64], y: NDArray[np.floating]) -> NDArray[np.float64]:
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ShapeError(f"y shape {y.shape} does not match X rows {X.shape[0]}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ShapeError(f"training data must be at least 1x1, got {X.shape}")
    return y


def fit_tree(
    X: NDArray[np.floating],
    y: NDArray[np.floating],
    sample: NDArray[np.integer],
    params: ForestParams,
    seed: SeedSpec | np.random.Generator,
) -> TreeNode:
    """Grow one CART regression tree on the given bootstrap sample.

    Splits maximize parent SSE minus child SSEs over all midpoints of
    adjacent distinct sorted values of ``mtry`` candidate features;
    growth stops when a node has fewer than ``2 * min_node_size``
    samples, is pure, or no split reduces the SSE.
    """
    X = _as_design(X)
    y = _check_training_inputs(X, y)
    sample = np.ascontiguousarray(sample, dtype=np.int64)
    if sample.ndim != 1 or sample.shape[0] == 0:
        raise InvalidInput("sample must be a non-empty index vector")
    if sample.min() < 0 or sample.max() >= X.shape[0]:
        raise InvalidInput("sample indices out of range")
    q = X.shape[1]
    mtry = resolve_mtry(params, q)
    m = sample.shape[0]
    max_nodes = 2 * m + 1
    if mtry < q:
        keys = as_generator(seed).random((1, max_nodes, q))
    else:
        keys = np.empty((1, 1, q), np.float64)
    packed = _alloc_packed(1, max_nodes)
    n_nodes = np.empty(1, np.int64)
    oob_sum = np.zeros(X.shape[0], np.float64)
    oob_count = np.zeros(X.shape[0], np.int64)
    _kernels.grow_forest(
        X, y, sample[None, :], keys, mtry, params.min_node_size,
        -1 if params.max_depth is None else params.max_depth,
        *packed, n_nodes, oob_sum, oob_count, False,
    )
    feature, threshold, left, right, value, n_samples = packed
    return _tree_from_packed(
        feature[0], threshold[0], left[0], right[0], value[0], n_samples[0], int(n_nodes[0])
    )


def fit_forest(
    X: NDArray[np.floating],
    y: NDArray[np.floating],
    params: ForestParams,
) -> Forest:
    """Grow ``params.n_trees`` trees, each on its own bootstrap sample.

    Tree ``i`` draws from the stream at ``params.seed.child(i)``: first
    the bootstrap indices, then (when mtry < q) the per-node feature
    keys.  The ensemble is therefore identical however the trees are
    scheduled.
    """
    X = _as_design(X)
    y = _check_training_inputs(X, y)
    n, q = X.shape
    mtry = resolve_mtry(params, q)
    max_nodes = 2 * n + 1
    boot = np.empty((params.n_trees, n), np.int64)
    if mtry < q:
        keys = np.empty((params.n_trees, max_nodes, q), np.float64)
    else:
        keys = np.empty((params.n_trees, 1, q), np.float64)
    for i in range(params.n_trees):
        g = params.seed.child(i).generator()
        in_bag, _ = bootstrap_indices(n, g)
        boot[i] = in_bag
        if mtry < q:
            g.random(out=keys[i])
    packed = _alloc_packed(params.n_trees, max_nodes)
    n_nodes = np.empty(params.n_trees, np.int64)
    oob_sum = np.zeros(n, np.float64)
    oob_count = np.zeros(n, np.int64)
    _kernels.grow_forest(
        X, y, boot, keys, mtry, params.min_node_size,
        -1 if params.max_depth is None else params.max_depth,
        *packed, n_nodes, oob_sum, oob_count, True,
    )
    return Forest(packed, n_nodes, oob_sum, oob_count, q)


def predict(forest: Forest, X: NDArray[np.floating]) -> NDArray[np.float64]:
    """Unweighted mean of all tree predictions, per row."""
    X = _as_design(X)
    if X.shape[1] != forest.n_features:
        raise ShapeError(
            f"X has {X.shape[1]} features, forest was trained on {forest.n_features}"
        )
    out = np.empty(X.shape[0], np.float64)
    _kernels.predict_forest(
        forest._feature, forest._threshold, forest._left, forest._right,
        forest._value, X, out,
    )
    return out


def merge_forests(parts: list[Forest]) -> Forest:
    """Concatenate ensembles in input order, pooling OOB accumulators.

    The OOB running means combine count-weighted, which is exact here
    because the accumulators store sums and counts.
    """
    if not parts:
        raise InvalidInput("merge_forests needs at least one forest")
    first = parts[0]
    for part in parts[1:]:
        if part.n_features != first.n_features or part.n_train != first.n_train:
            raise ShapeError("all forests must come from the same training data shape")
        if part._feature.shape[1] != first._feature.shape[1]:
            raise ShapeError("all forests must share the same node capacity")
    packed = tuple(
        np.concatenate([getattr(p, name) for p in parts], axis=0)
        for name in ("_feature", "_threshold", "_left", "_right", "_value", "_n_samples")
    )
    n_nodes = np.concatenate([p._n_nodes for p in parts])
    oob_sum = np.zeros(first.n_train, np.float64)
    oob_count = np.zeros(first.n_train, np.int64)
    for part in parts:
        oob_sum += part._oob_sum
        oob_count += part._oob_count
    return Forest(packed, n_nodes, oob_sum, oob_count, first.n_features)


def oob_nrmse(forest: Forest, y_true: NDArray[np.floating]) -> float:
    """Out-of-bag NRMSE: RMS of (OOB mean − truth) over rows that have
    OOB predictions, normalized by the sample SD (n−1) of ``y_true``
    restricted to those same rows.
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    if y_true.shape != (forest.n_train,):
        raise ShapeError(f"y_true must have length {forest.n_train}, got {y_true.shape}")
    covered = forest._oob_count > 0
    if not covered.any():
        raise OobUnavailable("no training row was ever out-of-bag")
    pred = forest._oob_sum[covered] / forest._oob_count[covered]
    truth = y_true[covered]
    if truth.shape[0] < 2:
        raise DegenerateNrmse("need at least two OOB rows for a variance")
    denom = float(truth.var(ddof=1))
    if denom == 0.0:
        raise DegenerateNrmse("OOB rows have zero response variance")
    return float(np.sqrt(np.mean((pred - truth) ** 2) / denom))
