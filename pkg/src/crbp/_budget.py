"""Weighted subset enumeration under an interference budget.

The hard-constraint reverse message at an active PU needs, for each
neighbor, the total probability weight of the other neighbors' activity
patterns whose summed interference fits inside a residual budget.  That
is a weighted subset-sum partition function; it is evaluated by
depth-first search over neighbors sorted by descending coefficient with
two prunes: a branch whose load already exceeds the budget is dropped,
and once every remaining coefficient fits the branch is closed with a
precomputed suffix product.  The kernels are jitted with numba when
available; the pure-Python fallbacks run the same code.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


def _subset_weight(g, w0, w1, suf_g, suf_w, budget):
    """Sum of prod w1[S] * prod w0[complement] over subsets S with
    sum g[S] <= budget.  g must be sorted descending; suf_g[k] and
    suf_w[k] are sum(g[k:]) and prod(w0[k:] + w1[k:])."""
    if budget < 0.0:
        return 0.0
    n = g.shape[0]
    stack_pos = np.empty(n + 2, dtype=np.int64)
    stack_prod = np.empty(n + 2, dtype=np.float64)
    stack_rem = np.empty(n + 2, dtype=np.float64)
    top = 0
    stack_pos[0] = 0
    stack_prod[0] = 1.0
    stack_rem[0] = budget
    top = 1
    acc = 0.0
    while top > 0:
        top -= 1
        pos = stack_pos[top]
        prod = stack_prod[top]
        rem = stack_rem[top]
        while True:
            if pos == n:
                acc += prod
                break
            if suf_g[pos] <= rem:
                # every remaining item fits: close the whole subtree
                acc += prod * suf_w[pos]
                break
            if g[pos] <= rem:
                stack_pos[top] = pos + 1
                stack_prod[top] = prod * w1[pos]
                stack_rem[top] = rem - g[pos]
                top += 1
            prod *= w0[pos]
            pos += 1
    return acc


def _budget_messages(g, w0, w1, budget):
    """Hard-budget reverse messages for every neighbor of one PU.

    g, w0, w1 are the neighbors' coefficients (sorted descending) and
    their cavity weights for staying off / switching on.  Returns an
    (n, 2) array of unnormalized (off, on) weights per neighbor: entry k
    sums the other neighbors' patterns that fit the budget, with the
    neighbor's own coefficient charged against it in the "on" column.
    """
    n = g.shape[0]
    out = np.empty((n, 2), dtype=np.float64)
    if n == 1:
        out[0, 0] = 1.0
        out[0, 1] = 1.0 if g[0] <= budget else 0.0
        return out
    gg = np.empty(n - 1, dtype=np.float64)
    v0 = np.empty(n - 1, dtype=np.float64)
    v1 = np.empty(n - 1, dtype=np.float64)
    suf_g = np.empty(n, dtype=np.float64)
    suf_w = np.empty(n, dtype=np.float64)
    for k in range(n):
        t = 0
        for j in range(n):
            if j != k:
                gg[t] = g[j]
                v0[t] = w0[j]
                v1[t] = w1[j]
                t += 1
        suf_g[n - 1] = 0.0
        suf_w[n - 1] = 1.0
        for j in range(n - 2, -1, -1):
            suf_g[j] = suf_g[j + 1] + gg[j]
            suf_w[j] = suf_w[j + 1] * (v0[j] + v1[j])
        out[k, 0] = _subset_weight(gg, v0, v1, suf_g, suf_w, budget)
        if g[k] <= budget:
            out[k, 1] = _subset_weight(gg, v0, v1, suf_g, suf_w, budget - g[k])
        else:
            out[k, 1] = 0.0
    return out


_subset_weight_py = _subset_weight
_budget_messages_py = _budget_messages

if njit is not None:
    _subset_weight = njit(cache=True)(_subset_weight)
    _budget_messages = njit(cache=True)(_budget_messages)


def budget_messages(g: np.ndarray, w0: np.ndarray, w1: np.ndarray, budget: float) -> np.ndarray:
    """Normalized hard-budget reverse messages for one PU's neighborhood.

    Weights are rescaled per neighbor so the larger component is 1, which
    keeps the linear-space search away from underflow; the rescale factor
    is common to both columns of each output row, so normalization is
    unaffected.  If a row still degenerates (all feasible patterns
    underflow), it is recomputed in log space.
    """
    scale = np.maximum(np.maximum(w0, w1), 1e-300)
    out = _budget_messages(g, w0 / scale, w1 / scale, budget)
    z = out.sum(axis=1)
    bad = ~np.isfinite(z) | (z <= 0.0)
    if bad.any():
        for k in np.nonzero(bad)[0]:
            out[k] = _budget_messages_log(g, w0, w1, float(budget), int(k))
        z = out.sum(axis=1)
    return out / z[:, None]


def _budget_messages_log(g, w0, w1, budget, k):
    """Log-space fallback for one neighbor; slow but overflow-proof."""
    lw0 = np.log(np.maximum(np.delete(w0, k), 1e-300))
    lw1 = np.log(np.maximum(np.delete(w1, k), 1e-300))
    gg = np.delete(g, k)
    n = len(gg)

    def scan(cap):
        if cap < 0:
            return -np.inf
        best = -np.inf
        terms = []

        def rec(pos, logw, rem):
            nonlocal best
            if pos == n:
                terms.append(logw)
                best = max(best, logw)
                return
            rec(pos + 1, logw + lw0[pos], rem)
            if gg[pos] <= rem:
                rec(pos + 1, logw + lw1[pos], rem - gg[pos])

        rec(0, 0.0, cap)
        if not terms:
            return -np.inf
        arr = np.asarray(terms)
        return best + np.log(np.exp(arr - best).sum())

    l0 = scan(budget)
    l1 = scan(budget - g[k]) if g[k] <= budget else -np.inf
    m = max(l0, l1)
    if m == -np.inf:
        return np.array([1.0, 0.0])
    return np.array([np.exp(l0 - m), np.exp(l1 - m)])
