"""Problem data and cost model for secondary-user channel scheduling.

A problem instance describes N secondary users (SUs), a set of idle primary
channels the SUs may connect to, and a set of active primary users (PUs)
that must be protected from SU interference.  Two cost models are supported:

* Model A: maximize the summed priority of connected SUs subject to hard
  per-PU interference budgets.
* Model B: the budgets are replaced by a soft quadratic interference
  penalty added to the objective.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "ProblemInstance",
    "Assignment",
    "CostBreakdown",
    "activity_from_links",
    "is_matching",
    "interference_load",
    "is_feasible_model_a",
    "cost_model_a",
    "cost_model_b",
    "quadratic_interference_expanded",
    "instance_to_json",
    "instance_from_json",
]


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable problem data.

    access[i, a] = 1 iff SU i can use free channel a (binary).
    interference[i, b] = received power of SU i at active PU b (>= 0,
    channel independent).
    priority[i] = benefit of connecting SU i (> 0).
    budget[b] = interference allowance of active PU b (> 0).
    """

    access: np.ndarray          # int8, shape (n_su, n_free)
    interference: np.ndarray    # float64, shape (n_su, n_active)
    priority: np.ndarray        # float64, shape (n_su,)
    budget: np.ndarray          # float64, shape (n_active,)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        access = np.ascontiguousarray(np.asarray(self.access, dtype=np.int8))
        interference = np.ascontiguousarray(np.asarray(self.interference, dtype=np.float64))
        priority = np.ascontiguousarray(np.asarray(self.priority, dtype=np.float64))
        budget = np.ascontiguousarray(np.asarray(self.budget, dtype=np.float64))
        if access.ndim != 2:
            raise ValueError("access must be a 2-d matrix")
        n_su = access.shape[0]
        if interference.ndim != 2 or interference.shape[0] != n_su:
            raise ValueError("interference must be 2-d with one row per SU")
        if priority.shape != (n_su,):
            raise ValueError("priority must have one entry per SU")
        if budget.shape != (interference.shape[1],):
            raise ValueError("budget must have one entry per active PU")
        if not np.isin(access, (0, 1)).all():
            raise ValueError("access entries must be 0 or 1")
        if not np.isfinite(interference).all() or (interference < 0).any():
            raise ValueError("interference entries must be finite and >= 0")
        if not np.isfinite(priority).all() or (priority <= 0).any():
            raise ValueError("priorities must be finite and > 0")
        if not np.isfinite(budget).all() or (budget <= 0).any():
            raise ValueError("budgets must be finite and > 0")
        for arr in (access, interference, priority, budget):
            arr.flags.writeable = False
        object.__setattr__(self, "access", access)
        object.__setattr__(self, "interference", interference)
        object.__setattr__(self, "priority", priority)
        object.__setattr__(self, "budget", budget)

    @property
    def n_su(self) -> int:
        return self.access.shape[0]

    @property
    def n_free(self) -> int:
        return self.access.shape[1]

    @property
    def n_active(self) -> int:
        return self.interference.shape[1]


def activity_from_links(links: np.ndarray, inst: ProblemInstance) -> np.ndarray:
    """SU activity vector: active iff connected to at least one accessible channel.

    Link entries on inaccessible pairs are ignored (masked by access).
    """
    links = np.asarray(links)
    if links.shape != inst.access.shape:
        raise ValueError("links shape does not match instance")
    masked = links * inst.access
    return (masked.sum(axis=1) >= 1).astype(np.int8)


@dataclass(frozen=True)
class Assignment:
    """A binary link matrix together with the derived activity vector."""

    links: np.ndarray   # int8, shape (n_su, n_free)
    active: np.ndarray  # int8, shape (n_su,), always derived from links

    @classmethod
    def from_links(cls, links: np.ndarray, inst: ProblemInstance) -> "Assignment":
        links = np.ascontiguousarray(np.asarray(links, dtype=np.int8))
        if not np.isin(links, (0, 1)).all():
            raise ValueError("link entries must be 0 or 1")
        active = activity_from_links(links, inst)
        links.flags.writeable = False
        active.flags.writeable = False
        return cls(links=links, active=active)

    @classmethod
    def empty(cls, inst: ProblemInstance) -> "Assignment":
        return cls.from_links(np.zeros((inst.n_su, inst.n_free), dtype=np.int8), inst)

    @classmethod
    def from_pairs(cls, pairs, inst: ProblemInstance) -> "Assignment":
        """Build from an iterable of (su, channel) pairs."""
        links = np.zeros((inst.n_su, inst.n_free), dtype=np.int8)
        for i, a in pairs:
            links[i, a] = 1
        return cls.from_links(links, inst)

    def pairs(self) -> list[tuple[int, int]]:
        su, ch = np.nonzero(self.links)
        return list(zip(su.tolist(), ch.tolist()))


def is_matching(assign: Assignment, inst: ProblemInstance) -> bool:
    """True iff every SU uses at most one accessible channel and vice versa."""
    masked = assign.links * inst.access
    return bool((masked.sum(axis=1) <= 1).all() and (masked.sum(axis=0) <= 1).all())


def interference_load(assign: Assignment, inst: ProblemInstance) -> np.ndarray:
    """Aggregate interference at each active PU from the active SUs."""
    return assign.active.astype(np.float64) @ inst.interference


def is_feasible_model_a(assign: Assignment, inst: ProblemInstance) -> bool:
    """Matching constraints plus every interference budget respected."""
    if not is_matching(assign, inst):
        return False
    return bool((interference_load(assign, inst) <= inst.budget).all())


def cost_model_a(assign: Assignment, inst: ProblemInstance) -> float:
    """Negative summed priority of the active SUs (lower is better)."""
    return float(-(assign.active * inst.priority).sum())


@dataclass(frozen=True)
class CostBreakdown:
    """Soft-model cost split into its utility and interference parts."""

    utility_term: float        # -sum of connected priorities
    interference_term: float   # sum_b load_b^2 / budget_b
    total: float


def cost_model_b(assign: Assignment, inst: ProblemInstance, check: bool = False) -> CostBreakdown:
    """Quadratic-penalty cost: utility term plus squared-load penalty.

    With check=True the squared-sum form is verified against the expanded
    double-sum form; the two are algebraically identical.
    """
    utility = float(-(assign.active * inst.priority).sum())
    load = interference_load(assign, inst)
    penalty = float((load * load / inst.budget).sum())
    if check:
        expanded = quadratic_interference_expanded(assign.active, inst)
        if not np.isclose(penalty, expanded, rtol=1e-12, atol=1e-12):
            raise AssertionError(
                f"quadratic penalty mismatch: squared={penalty!r} expanded={expanded!r}"
            )
    return CostBreakdown(utility_term=utility, interference_term=penalty, total=utility + penalty)


def quadratic_interference_expanded(active: np.ndarray, inst: ProblemInstance) -> float:
    """Interference penalty written as the explicit double sum over SU pairs.

    Identical to sum_b load_b^2/budget_b; kept as an independent evaluation
    path for validation.
    """
    s = np.asarray(active, dtype=np.float64)
    g = inst.interference
    total = 0.0
    for b in range(inst.n_active):
        col = g[:, b] * s
        total += float(np.outer(col, col).sum()) / float(inst.budget[b])
    return total


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def instance_to_json(inst: ProblemInstance) -> str:
    """Lossless structured-text form of an instance (floats via repr)."""
    access_pairs = [[int(i), int(a)] for i, a in zip(*np.nonzero(inst.access))]
    interference_triples = [
        [int(i), int(b), float(inst.interference[i, b])]
        for i, b in zip(*np.nonzero(inst.interference))
    ]
    doc = {
        "n_su": inst.n_su,
        "n_free": inst.n_free,
        "n_active": inst.n_active,
        "access": access_pairs,
        "interference": interference_triples,
        "priority": [float(x) for x in inst.priority],
        "theta": [float(x) for x in inst.budget],
        "metadata": _jsonable(inst.metadata),
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def instance_from_json(text: str) -> ProblemInstance:
    doc = json.loads(text)
    access = np.zeros((doc["n_su"], doc["n_free"]), dtype=np.int8)
    for i, a in doc["access"]:
        access[i, a] = 1
    interference = np.zeros((doc["n_su"], doc["n_active"]), dtype=np.float64)
    for i, b, g in doc["interference"]:
        interference[i, b] = g
    return ProblemInstance(
        access=access,
        interference=interference,
        priority=np.asarray(doc["priority"], dtype=np.float64),
        budget=np.asarray(doc["theta"], dtype=np.float64),
        metadata=doc.get("metadata", {}),
    )


def _jsonable(value: Any):
    """Recursively convert numpy scalars/arrays so json.dumps round-trips."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value
