"""Reference implementations and small builders shared across test modules.

The tree reference here is written independently of the packed-array
grower: plain recursion over index sets, serial accumulation in the
same value order, so on data with distinct feature values the two must
agree bit for bit.
"""

from __future__ import annotations

import numpy as np

from forestfill import DataMatrix, MissingMask, TreeNode

PURITY_EPS = 1e-12


def ref_grow(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    min_node_size: int,
    max_depth: int = -1,
    depth: int = 0,
) -> dict:
    """Reference CART: best SSE-reduction split over all features.

    Ties resolve to the lowest feature index, then the lowest threshold,
    because candidates are scanned in that order and only a strictly
    larger reduction displaces the incumbent.
    """
    size = rows.shape[0]
    order0 = rows[np.argsort(X[rows, 0], kind="stable")]
    s1 = 0.0
    s2 = 0.0
    for r in order0:
        s1 += y[r]
        s2 += y[r] * y[r]
    node = {"feature": None, "threshold": None, "left": None, "right": None,
            "value": s1 / size, "n": size}
    if size < 2 * min_node_size:
        return node
    if max_depth >= 0 and depth >= max_depth:
        return node
    parent_sse = s2 - s1 * s1 / size
    if parent_sse < 0.0:
        parent_sse = 0.0
    if parent_sse / size <= PURITY_EPS:
        return node

    best_red = 0.0
    best_f = -1
    best_thr = 0.0
    for f in range(X.shape[1]):
        of = rows[np.argsort(X[rows, f], kind="stable")]
        ls1 = 0.0
        ls2 = 0.0
        for i in range(1, size):
            prev = of[i - 1]
            cur = of[i]
            yv = y[prev]
            ls1 += yv
            ls2 += yv * yv
            if X[cur, f] > X[prev, f]:
                nl = i
                nr = size - i
                lsse = ls2 - ls1 * ls1 / nl
                r1 = s1 - ls1
                r2 = s2 - ls2
                rsse = r2 - r1 * r1 / nr
                red = parent_sse - lsse - rsse
                if red > best_red:
                    best_red = red
                    best_f = f
                    best_thr = 0.5 * (X[prev, f] + X[cur, f])
    if best_f < 0:
        return node

    go_left = X[rows, best_f] <= best_thr
    node["feature"] = best_f
    node["threshold"] = best_thr
    node["left"] = ref_grow(X, y, rows[go_left], min_node_size, max_depth, depth + 1)
    node["right"] = ref_grow(X, y, rows[~go_left], min_node_size, max_depth, depth + 1)
    return node


def ref_predict_row(node: dict, x: np.ndarray) -> float:
    while node["feature"] is not None:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return node["value"]


def tree_as_tuple(node: TreeNode):
    if node.is_leaf:
        return ("leaf", node.prediction, node.n_samples)
    return (
        node.split_feature,
        node.split_threshold,
        node.n_samples,
        tree_as_tuple(node.left),
        tree_as_tuple(node.right),
    )


def ref_as_tuple(node: dict):
    if node["feature"] is None:
        return ("leaf", node["value"], node["n"])
    return (
        node["feature"],
        node["threshold"],
        node["n"],
        ref_as_tuple(node["left"]),
        ref_as_tuple(node["right"]),
    )


def random_instance(rng: np.random.Generator, n: int | None = None, p: int | None = None):
    """A small dataset with missing cells scattered over all but column 0."""
    if n is None:
        n = int(rng.integers(24, 61))
    if p is None:
        p = int(rng.integers(2, 5))
    cov = rng.normal(size=(p, p))
    cov = cov @ cov.T + p * np.eye(p)
    values = rng.multivariate_normal(np.zeros(p), cov, size=n)
    mask = np.zeros((n, p), dtype=bool)
    for j in range(1, p):
        k = int(rng.integers(3, max(4, n // 3)))
        mask[rng.choice(n, size=k, replace=False), j] = True
    data = DataMatrix(values, tuple(f"c{j}" for j in range(p)))
    return data, MissingMask(mask)


def blank_masked(data: DataMatrix, mask: MissingMask) -> DataMatrix:
    values = data.values.copy()
    values[mask.mask] = 0.0
    return data.with_values(values)
