"""Tree growing and ensemble evaluation kernels.

Trees are stored as flat parallel arrays; node ``k`` is a leaf when
``feature[k] < 0``. Rows with ``x[feature] <= threshold`` go left. An
ensemble concatenates its trees and records each tree's root offset.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from numba.core.errors import NumbaWarning

# an outdated system TBB only means numba falls back to another threading layer
warnings.filterwarnings("ignore", message="The TBB threading layer", category=NumbaWarning)

LEAF = -1


@dataclass(frozen=True, eq=False)
class TreeArrays:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray

    @classmethod
    def concat(cls, trees: list[tuple]) -> "TreeArrays":
        feats, thrs, lefts, rights, vals, roots = [], [], [], [], [], []
        offset = 0
        for f, t, l, r, v in trees:
            roots.append(offset)
            feats.append(f)
            thrs.append(t)
            # child links are tree-local; shift leaves' -1 links unchanged
            lefts.append(np.where(l >= 0, l + offset, -1))
            rights.append(np.where(r >= 0, r + offset, -1))
            vals.append(v)
            offset += len(f)
        if not trees:
            z = np.zeros(0)
            zi = np.zeros(0, dtype=np.int32)
            return cls(zi, z, zi, zi, z, zi)
        return cls(
            np.concatenate(feats).astype(np.int32),
            np.concatenate(thrs).astype(np.float64),
            np.concatenate(lefts).astype(np.int32),
            np.concatenate(rights).astype(np.int32),
            np.concatenate(vals).astype(np.float64),
            np.asarray(roots, dtype=np.int32),
        )

    def n_trees(self) -> int:
        return len(self.roots)

    def tree(self, k: int) -> tuple:
        start = self.roots[k]
        stop = self.roots[k + 1] if k + 1 < len(self.roots) else len(self.feature)
        sl = slice(start, stop)
        shift = lambda a: np.where(a >= 0, a - start, -1)  # noqa: E731
        return (self.feature[sl], self.threshold[sl], shift(self.left[sl]), shift(self.right[sl]), self.value[sl])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "roots": self.roots.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeArrays":
        return cls(
            np.asarray(d["feature"], dtype=np.int32),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int32),
            np.asarray(d["right"], dtype=np.int32),
            np.asarray(d["value"], dtype=np.float64),
            np.asarray(d["roots"], dtype=np.int32),
        )

    def equals(self, other: "TreeArrays") -> bool:
        return all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("feature", "threshold", "left", "right", "value", "roots")
        )


# --- evaluation ---------------------------------------------------------------


@njit(cache=True, parallel=True, nogil=True)
def ensemble_sum(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    out = np.zeros(n)
    for i in prange(n):
        acc = 0.0
        for t in range(roots.shape[0]):
            k = roots[t]
            while feature[k] >= 0:
                if X[i, feature[k]] <= threshold[k]:
                    k = left[k]
                else:
                    k = right[k]
            acc += value[k]
        out[i] = acc
    return out


@njit(cache=True, parallel=True, nogil=True)
def ensemble_sum_masked(masks, x, background, feature, threshold, left, right, value, roots):
    """Ensemble sums for every (coalition, background row) hybrid, shape ``(S, B)``.

    Row ``(s, b)`` takes ``x[j]`` where ``masks[s, j]`` and
    ``background[b, j]`` elsewhere; the hybrid is never materialized.
    Branch directions are precomputed for ``x`` and for each background
    row, and the path prefix on which both agree is walked once per tree.
    Trees are summed in the same order as :func:`ensemble_sum`.
    """
    S = masks.shape[0]
    B = background.shape[0]
    n_nodes = feature.shape[0]
    dx = np.zeros(n_nodes, dtype=np.bool_)
    for k in range(n_nodes):
        if feature[k] >= 0:
            dx[k] = x[feature[k]] <= threshold[k]
    out = np.zeros((B, S))
    for b in prange(B):
        db = np.zeros(n_nodes, dtype=np.bool_)
        for k in range(n_nodes):
            if feature[k] >= 0:
                db[k] = background[b, feature[k]] <= threshold[k]
        for t in range(roots.shape[0]):
            k = roots[t]
            while feature[k] >= 0 and dx[k] == db[k]:
                k = left[k] if dx[k] else right[k]
            if feature[k] < 0:
                v = value[k]
                for s in range(S):
                    out[b, s] += v
                continue
            k0 = k
            for s in range(S):
                k = k0
                while feature[k] >= 0:
                    go_left = dx[k] if masks[s, feature[k]] else db[k]
                    k = left[k] if go_left else right[k]
                out[b, s] += value[k]
    return out.T.copy()


# --- random draws -------------------------------------------------------------


@njit(cache=True, inline="always")
def _splitmix(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = z ^ (z >> np.uint64(31))
    return state, z


# --- classification trees (Gini) ------------------------------------------------


@njit(cache=True, nogil=True)
def _midpoint(a, b):
    m = 0.5 * (a + b)
    if m >= b:
        m = a
    return m


@njit(cache=True, nogil=True)
def grow_gini_tree(Xt, y, sample, mtry, max_depth, min_leaf, seed):
    """CART classification tree on the rows listed in ``sample`` (repeats allowed).

    ``Xt`` is the feature-major (transposed) training matrix.

    At each node features are visited in a random order; the search stops
    once ``mtry`` non-constant features have been scored, so a split is
    always found when any feature still varies within the node.
    Leaves store the class-1 frequency.
    """
    n = sample.shape[0]
    F = Xt.shape[0]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap)

    idx = sample.copy()
    buf = np.empty(n, dtype=np.int64)
    perm = np.arange(F)
    vals = np.empty(n)
    ys = np.empty(n)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    sp = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0
    sp = 1
    n_nodes = 1
    state = np.uint64(seed)

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        start = stack_start[sp]
        end = stack_end[sp]
        depth = stack_depth[sp]
        m = end - start
        c1 = 0.0
        for k in range(start, end):
            c1 += y[idx[k]]
        value[node] = c1 / m
        if c1 == 0.0 or c1 == m or m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        scored = 0
        # partial Fisher-Yates over the feature order
        for j in range(F):
            if scored >= mtry:
                break
            state, z = _splitmix(state)
            r = j + np.int64(z % np.uint64(F - j))
            tmp = perm[j]
            perm[j] = perm[r]
            perm[r] = tmp
            f = perm[j]
            for k in range(m):
                vals[k] = Xt[f, idx[start + k]]
            order = np.argsort(vals[:m], kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            scored += 1
            for k in range(m):
                ys[k] = y[idx[start + order[k]]]
            l1 = 0.0
            for k in range(m - 1):
                l1 += ys[k]
                nl = k + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                a = vals[order[k]]
                b = vals[order[k + 1]]
                if a == b:
                    continue
                l0 = nl - l1
                r1 = c1 - l1
                r0 = nr - r1
                score = (l1 * l1 + l0 * l0) / nl + (r1 * r1 + r0 * r0) / nr
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_thr = _midpoint(a, b)
        if best_f < 0:
            continue

        nl = 0
        nr = 0
        for k in range(start, end):
            if Xt[best_f, idx[k]] <= best_thr:
                idx[start + nl] = idx[k]
                nl += 1
            else:
                buf[nr] = idx[k]
                nr += 1
        for k in range(nr):
            idx[start + nl + k] = buf[k]

        feature[node] = best_f
        threshold[node] = best_thr
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is numbered first
        stack_node[sp] = rnode
        stack_start[sp] = start + nl
        stack_end[sp] = end
        stack_depth[sp] = depth + 1
        sp += 1
        stack_node[sp] = lnode
        stack_start[sp] = start
        stack_end[sp] = start + nl
        stack_depth[sp] = depth + 1
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


# --- second-order regression trees (boosting) -----------------------------------


@njit(cache=True, nogil=True)
def grow_newton_tree(Xt, order, g, h, active, allowed, max_depth, lam, min_child_weight, eta):
    """Level-wise exact greedy tree on gradients ``g`` and hessians ``h``.

    ``Xt`` is the feature-major training matrix and ``order[f]`` the row
    order sorting feature ``f``; both are computed once per training run. Split gain is
    ``GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)`` (the usual 1/2 factor
    does not change the argmax); leaves hold ``-eta * G / (H + lam)``.
    """
    F = Xt.shape[0]
    n = Xt.shape[1]
    cap = 2 ** (max_depth + 1)
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap)

    node_of = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if active[i]:
            node_of[i] = 0
    # level-local bookkeeping, indexed by global node id
    G = np.zeros(cap)
    H = np.zeros(cap)
    for i in range(n):
        if active[i]:
            G[0] += g[i]
            H[0] += h[i]
    level = np.zeros(1, dtype=np.int64)
    n_nodes = 1

    GL = np.zeros(cap)
    HL = np.zeros(cap)
    CL = np.zeros(cap, dtype=np.int64)
    last = np.zeros(cap)
    best_gain = np.zeros(cap)
    best_f = np.full(cap, -1, dtype=np.int64)
    best_thr = np.zeros(cap)

    for depth in range(max_depth):
        if level.shape[0] == 0:
            break
        for nd in level:
            best_gain[nd] = 1e-12
            best_f[nd] = -1
        for f in range(F):
            if not allowed[f]:
                continue
            for nd in level:
                GL[nd] = 0.0
                HL[nd] = 0.0
                CL[nd] = 0
            for k in range(n):
                r = order[f, k]
                nd = node_of[r]
                if nd < 0:
                    continue
                v = Xt[f, r]
                if CL[nd] > 0 and v != last[nd]:
                    hl = HL[nd]
                    hr = H[nd] - hl
                    if hl >= min_child_weight and hr >= min_child_weight:
                        gl = GL[nd]
                        gr = G[nd] - gl
                        gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - G[nd] * G[nd] / (H[nd] + lam)
                        if gain > best_gain[nd]:
                            best_gain[nd] = gain
                            best_f[nd] = f
                            best_thr[nd] = _midpoint(last[nd], v)
                GL[nd] += g[r]
                HL[nd] += h[r]
                CL[nd] += 1
                last[nd] = v

        n_split = 0
        for nd in level:
            if best_f[nd] >= 0:
                n_split += 1
        new_level = np.empty(2 * n_split, dtype=np.int64)
        q = 0
        for nd in level:
            if best_f[nd] >= 0:
                feature[nd] = best_f[nd]
                threshold[nd] = best_thr[nd]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                G[n_nodes] = 0.0
                H[n_nodes] = 0.0
                G[n_nodes + 1] = 0.0
                H[n_nodes + 1] = 0.0
                new_level[q] = n_nodes
                new_level[q + 1] = n_nodes + 1
                q += 2
                n_nodes += 2
            else:
                value[nd] = -eta * G[nd] / (H[nd] + lam)
        for i in range(n):
            nd = node_of[i]
            if nd < 0:
                continue
            if feature[nd] < 0:
                node_of[i] = -1
                continue
            if Xt[feature[nd], i] <= threshold[nd]:
                c = left[nd]
            else:
                c = right[nd]
            node_of[i] = c
            G[c] += g[i]
            H[c] += h[i]
        level = new_level

    for nd in level:
        value[nd] = -eta * G[nd] / (H[nd] + lam)

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )
