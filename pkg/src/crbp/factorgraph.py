"""Bipartite factor graph connecting SUs to free channels and active PUs.

Channel-side edges carry the binary link variables (SU i may use channel
a); active-side edges connect an SU to every active PU that hears it.
Edges are stored CSR-style, sorted by (su, channel) respectively
(su, pu), with permutations that regroup them by channel / PU so message
sweeps can reduce over either endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance

__all__ = ["FactorGraph", "DegreeStats", "build_factor_graph", "degree_stats", "is_acyclic"]


@dataclass(frozen=True)
class FactorGraph:
    n_su: int
    n_free: int
    n_active: int

    # channel side: one edge per (su, channel) with access
    ch_su: np.ndarray       # SU of each edge, sorted by (su, channel)
    ch_ch: np.ndarray       # channel of each edge
    su_ch_ptr: np.ndarray   # CSR pointer over SUs
    ch_order: np.ndarray    # edge ids regrouped by channel
    ch_ptr: np.ndarray      # CSR pointer over channels (into ch_order)

    # active side: one edge per (su, pu) with positive interference
    act_su: np.ndarray      # SU of each edge, sorted by (su, pu)
    act_pu: np.ndarray      # PU of each edge
    act_g: np.ndarray       # interference coefficient of each edge
    su_act_ptr: np.ndarray  # CSR pointer over SUs
    pu_order: np.ndarray    # edge ids regrouped by PU
    pu_ptr: np.ndarray      # CSR pointer over PUs (into pu_order)
    pu_order_desc: np.ndarray  # like pu_order but g-descending within each PU

    @property
    def n_channel_edges(self) -> int:
        return len(self.ch_su)

    @property
    def n_active_edges(self) -> int:
        return len(self.act_su)

    # adjacency helpers (small, for tests and per-edge updates)
    def su_channels(self, i: int) -> np.ndarray:
        return self.ch_ch[self.su_ch_ptr[i]:self.su_ch_ptr[i + 1]]

    def su_active_pus(self, i: int) -> np.ndarray:
        return self.act_pu[self.su_act_ptr[i]:self.su_act_ptr[i + 1]]

    def channel_sus(self, a: int) -> np.ndarray:
        return self.ch_su[self.ch_order[self.ch_ptr[a]:self.ch_ptr[a + 1]]]

    def active_pu_sus(self, b: int) -> np.ndarray:
        return self.act_su[self.pu_order[self.pu_ptr[b]:self.pu_ptr[b + 1]]]

    def channel_edge(self, i: int, a: int) -> int:
        lo, hi = self.su_ch_ptr[i], self.su_ch_ptr[i + 1]
        k = lo + np.searchsorted(self.ch_ch[lo:hi], a)
        if k >= hi or self.ch_ch[k] != a:
            raise KeyError(f"no channel edge ({i}, {a})")
        return int(k)

    def active_edge(self, i: int, b: int) -> int:
        lo, hi = self.su_act_ptr[i], self.su_act_ptr[i + 1]
        k = lo + np.searchsorted(self.act_pu[lo:hi], b)
        if k >= hi or self.act_pu[k] != b:
            raise KeyError(f"no active edge ({i}, {b})")
        return int(k)


def _csr_pointer(sorted_ids: np.ndarray, n_groups: int) -> np.ndarray:
    counts = np.bincount(sorted_ids, minlength=n_groups)
    ptr = np.zeros(n_groups + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr


def build_factor_graph(inst: ProblemInstance) -> FactorGraph:
    """Edge lists and CSR pointers for one instance."""
    su, ch = np.nonzero(inst.access)          # row-major: sorted by (su, ch)
    ch_su = su.astype(np.int64)
    ch_ch = ch.astype(np.int64)
    su_ch_ptr = _csr_pointer(ch_su, inst.n_su)
    ch_order = np.lexsort((ch_su, ch_ch)).astype(np.int64)
    ch_ptr = _csr_pointer(ch_ch[ch_order], inst.n_free)

    su2, pu = np.nonzero(inst.interference)
    act_su = su2.astype(np.int64)
    act_pu = pu.astype(np.int64)
    act_g = inst.interference[su2, pu].astype(np.float64)
    su_act_ptr = _csr_pointer(act_su, inst.n_su)
    pu_order = np.lexsort((act_su, act_pu)).astype(np.int64)
    pu_ptr = _csr_pointer(act_pu[pu_order], inst.n_active)
    # g-descending within each PU group, ties by edge id for determinism
    pu_order_desc = np.empty_like(pu_order)
    for b in range(inst.n_active):
        grp = pu_order[pu_ptr[b]:pu_ptr[b + 1]]
        sub = np.lexsort((grp, -act_g[grp]))
        pu_order_desc[pu_ptr[b]:pu_ptr[b + 1]] = grp[sub]

    arrays = dict(ch_su=ch_su, ch_ch=ch_ch, su_ch_ptr=su_ch_ptr, ch_order=ch_order,
                  ch_ptr=ch_ptr, act_su=act_su, act_pu=act_pu, act_g=act_g,
                  su_act_ptr=su_act_ptr, pu_order=pu_order, pu_ptr=pu_ptr,
                  pu_order_desc=pu_order_desc)
    for arr in arrays.values():
        arr.flags.writeable = False
    return FactorGraph(n_su=inst.n_su, n_free=inst.n_free, n_active=inst.n_active, **arrays)


@dataclass(frozen=True)
class DegreeStats:
    su_max: int
    su_mean: float        # accessible channels per SU
    channel_max: int
    channel_mean: float   # accessing SUs per channel
    active_max: int
    active_mean: float    # interfering SUs per active PU


def degree_stats(fg: FactorGraph) -> DegreeStats:
    su_deg = np.diff(fg.su_ch_ptr)
    ch_deg = np.diff(fg.ch_ptr)
    pu_deg = np.diff(fg.pu_ptr)

    def _mx(d):
        return int(d.max()) if d.size else 0

    def _mn(d):
        return float(d.mean()) if d.size else 0.0

    return DegreeStats(su_max=_mx(su_deg), su_mean=_mn(su_deg),
                       channel_max=_mx(ch_deg), channel_mean=_mn(ch_deg),
                       active_max=_mx(pu_deg), active_mean=_mn(pu_deg))


def is_acyclic(fg: FactorGraph) -> bool:
    """True iff the undirected union graph (both edge sets) has no cycle."""
    n = fg.n_su + fg.n_free + fg.n_active
    parent = np.arange(n, dtype=np.int64)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x: int, y: int) -> bool:
        rx, ry = find(x), find(y)
        if rx == ry:
            return False
        parent[rx] = ry
        return True

    for i, a in zip(fg.ch_su, fg.ch_ch):
        if not union(int(i), fg.n_su + int(a)):
            return False
    for i, b in zip(fg.act_su, fg.act_pu):
        if not union(int(i), fg.n_su + fg.n_free + int(b)):
            return False
    return True
