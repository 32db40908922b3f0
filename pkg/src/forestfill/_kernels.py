"""Compiled inner loops for tree growing and prediction.

Trees live in flat parallel arrays (one row per forest tree, one slot
per node) so an entire forest is grown and evaluated in a single
compiled call.  ``split_feature < 0`` marks a leaf.  The growing loop
keeps one index list per feature, pre-sorted once per tree and kept
sorted through stable partitions, so no per-node sorting is needed.
"""

from __future__ import annotations

import numba as nb
import numpy as np

# A node whose response sum-of-squares per sample is at or below this is
# treated as pure and never split.
PURITY_EPS = 1e-12


@nb.njit(cache=True, nogil=True)
def grow_forest(
    xs,          # (n_rows, q) float64, fully observed predictors
    y,           # (n_rows,) float64 responses
    boot,        # (n_trees, m) int64 bootstrap row indices into xs
    keys,        # (n_trees, >=max_nodes, q) float64 feature-draw keys (read iff mtry < q)
    mtry,
    min_node_size,
    max_depth,   # -1 = unlimited
    feature,     # (n_trees, max_nodes) int32, out
    threshold,   # (n_trees, max_nodes) float64, out
    left,        # (n_trees, max_nodes) int32, out
    right,       # (n_trees, max_nodes) int32, out
    value,       # (n_trees, max_nodes) float64, out
    n_samples,   # (n_trees, max_nodes) int32, out
    n_nodes,     # (n_trees,) int64, out
    oob_sum,     # (n_rows,) float64, accumulated in place
    oob_count,   # (n_rows,) int64, accumulated in place
    with_oob,
):
    n_rows, q = xs.shape
    n_trees, m = boot.shape

    xb = np.empty((m, q), np.float64)
    yb = np.empty(m, np.float64)
    sidx = np.empty((q, m), np.int32)
    tmp = np.empty(m, np.int32)
    mark = np.empty(m, np.bool_)
    stack = np.empty((2 * m + 2, 4), np.int64)
    taken = np.empty(q, np.bool_)
    cand = np.empty(q, np.int64)
    inbag = np.empty(n_rows, np.bool_)

    for t in range(n_trees):
        for i in range(m):
            r = boot[t, i]
            yb[i] = y[r]
            for f in range(q):
                xb[i, f] = xs[r, f]
        for f in range(q):
            order = np.argsort(xb[:, f])
            for i in range(m):
                sidx[f, i] = order[i]

        key_row = 0
        stack[0, 0] = 0   # node id
        stack[0, 1] = 0   # segment start
        stack[0, 2] = m   # segment end
        stack[0, 3] = 0   # depth
        top = 1
        nc = 1
        while top > 0:
            top -= 1
            node = stack[top, 0]
            start = stack[top, 1]
            end = stack[top, 2]
            depth = stack[top, 3]
            size = end - start

            s1 = 0.0
            s2 = 0.0
            for i in range(start, end):
                yv = yb[sidx[0, i]]
                s1 += yv
                s2 += yv * yv
            feature[t, node] = -1
            threshold[t, node] = np.nan
            left[t, node] = -1
            right[t, node] = -1
            value[t, node] = s1 / size
            n_samples[t, node] = size

            if size < 2 * min_node_size:
                continue
            if max_depth >= 0 and depth >= max_depth:
                continue
            parent_sse = s2 - s1 * s1 / size
            if parent_sse < 0.0:
                parent_sse = 0.0
            if parent_sse / size <= PURITY_EPS:
                continue

            # Candidate features: the mtry smallest keys in this node's
            # key row, visited in ascending feature index so score ties
            # resolve to the lowest index.
            if mtry < q:
                for f in range(q):
                    taken[f] = False
                for _ in range(mtry):
                    best_k = np.inf
                    best_kf = -1
                    for f in range(q):
                        if not taken[f] and keys[t, key_row, f] < best_k:
                            best_k = keys[t, key_row, f]
                            best_kf = f
                    taken[best_kf] = True
                key_row += 1
                c = 0
                for f in range(q):
                    if taken[f]:
                        cand[c] = f
                        c += 1
            else:
                for f in range(q):
                    cand[f] = f

            best_red = 0.0
            best_f = -1
            best_thr = 0.0
            best_nl = 0
            for ci in range(mtry):
                f = cand[ci]
                ls1 = 0.0
                ls2 = 0.0
                prev_p = sidx[f, start]
                prev_v = xb[prev_p, f]
                for i in range(1, size):
                    p = sidx[f, start + i]
                    yv = yb[prev_p]
                    ls1 += yv
                    ls2 += yv * yv
                    v = xb[p, f]
                    if v > prev_v:
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
                            best_thr = 0.5 * (prev_v + v)
                            best_nl = nl
                    prev_p = p
                    prev_v = v
            if best_f < 0:
                continue

            for i in range(start, end):
                p = sidx[0, i]
                mark[p] = xb[p, best_f] <= best_thr
            for f in range(q):
                k = 0
                for i in range(start, end):
                    p = sidx[f, i]
                    if mark[p]:
                        tmp[k] = p
                        k += 1
                for i in range(start, end):
                    p = sidx[f, i]
                    if not mark[p]:
                        tmp[k] = p
                        k += 1
                for i in range(size):
                    sidx[f, start + i] = tmp[i]

            lid = nc
            rid = nc + 1
            nc += 2
            feature[t, node] = best_f
            threshold[t, node] = best_thr
            left[t, node] = lid
            right[t, node] = rid
            stack[top, 0] = rid
            stack[top, 1] = start + best_nl
            stack[top, 2] = end
            stack[top, 3] = depth + 1
            top += 1
            stack[top, 0] = lid
            stack[top, 1] = start
            stack[top, 2] = start + best_nl
            stack[top, 3] = depth + 1
            top += 1
        n_nodes[t] = nc

        if with_oob:
            for r in range(n_rows):
                inbag[r] = False
            for i in range(m):
                inbag[boot[t, i]] = True
            for r in range(n_rows):
                if not inbag[r]:
                    node = 0
                    while feature[t, node] >= 0:
                        if xs[r, feature[t, node]] <= threshold[t, node]:
                            node = left[t, node]
                        else:
                            node = right[t, node]
                    oob_sum[r] += value[t, node]
                    oob_count[r] += 1


@nb.njit(cache=True, nogil=True)
def predict_forest(feature, threshold, left, right, value, xs, out):
    n_trees = feature.shape[0]
    n = xs.shape[0]
    for r in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = 0
            while feature[t, node] >= 0:
                if xs[r, feature[t, node]] <= threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            acc += value[t, node]
        out[r] = acc / n_trees
