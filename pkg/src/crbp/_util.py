"""Small numeric helpers shared by the message-passing solvers."""

from __future__ import annotations

import numpy as np

TINY = 1e-300          # clamp for message components before taking ratios
NEG_SENTINEL = -1e9    # stands in for -inf in field arithmetic


def group_full_and_loo(values: np.ndarray, ptr: np.ndarray):
    """Per-group totals and leave-one-out sums.

    values is partitioned into contiguous groups by the CSR pointer ptr.
    Returns (full, loo) where full[g] is the group sum and loo[k] is the
    group sum excluding element k.  Both are built from prefix and suffix
    sums only; no subtraction, so one huge term cannot wipe out the
    remaining small ones.
    """
    n_groups = len(ptr) - 1
    full = np.zeros(n_groups, dtype=values.dtype)
    loo = np.zeros_like(values)
    for g in range(n_groups):
        s, e = ptr[g], ptr[g + 1]
        n = e - s
        if n == 0:
            continue
        if n == 1:
            full[g] = values[s]
            loo[s] = 0.0
            continue
        x = values[s:e]
        pre = np.empty(n, dtype=values.dtype)
        pre[0] = 0.0
        np.cumsum(x[:-1], out=pre[1:])
        rev = np.cumsum(x[::-1])
        suf = np.empty(n, dtype=values.dtype)
        suf[-1] = 0.0
        suf[:-1] = rev[-2::-1]
        loo[s:e] = pre + suf
        full[g] = rev[-1]
    return full, loo


def log_ratio(pairs: np.ndarray) -> np.ndarray:
    """log(m(1)/m(0)) of normalized message pairs, clamped away from 0."""
    p = np.maximum(pairs, TINY)
    return np.log(p[:, 1]) - np.log(p[:, 0])


def normalize_from_logs(log0: np.ndarray, log1: np.ndarray) -> np.ndarray:
    """Message pairs exp(log0), exp(log1) normalized to sum to one."""
    m = np.maximum(log0, log1)
    e0 = np.exp(log0 - m)
    e1 = np.exp(log1 - m)
    z = e0 + e1
    return np.stack([e0 / z, e1 / z], axis=1)
