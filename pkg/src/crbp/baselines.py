"""Greedy reference schedulers.

Both walk the access edges in a fixed priority order and accept an edge
when it keeps the partial assignment valid.  They are deterministic, so
a run is fully described by its trace, which the tests replay.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import Assignment, ProblemInstance, cost_model_a, cost_model_b

__all__ = ["GreedyTrace", "greedy_model_a", "greedy_model_b", "replay_trace"]


@dataclass
class GreedyTrace:
    """Every edge decision in processing order, plus the outcome.

    Each entry is ((su, channel), accepted, reason); replaying the
    accepted entries in order reproduces ``assignment`` exactly.
    """

    decisions: list[tuple[tuple[int, int], bool, str]] = field(default_factory=list)
    assignment: Assignment | None = None
    cost: float = 0.0

    @property
    def accepted(self) -> list[tuple[int, int]]:
        return [edge for edge, ok, _ in self.decisions if ok]

    def to_json(self) -> str:
        return json.dumps({
            "decisions": [[list(e), ok, why] for e, ok, why in self.decisions],
            "cost": self.cost,
        })


def _edge_order(inst: ProblemInstance) -> list[tuple[int, int]]:
    """Access edges by descending weight, then SU index, then channel."""
    edges = [(int(i), int(a)) for i, a in zip(*np.nonzero(inst.access))]
    edges.sort(key=lambda e: (-inst.priority[e[0]], e[0], e[1]))
    return edges


def greedy_model_a(inst: ProblemInstance) -> tuple[Assignment, GreedyTrace]:
    """Hard-budget greedy: accept unless the SU/channel is taken or a
    primary budget would be exceeded."""
    trace = GreedyTrace()
    su_used = np.zeros(inst.n_su, dtype=bool)
    ch_used = np.zeros(inst.n_free, dtype=bool)
    load = np.zeros(inst.n_active)
    links: list[tuple[int, int]] = []
    for i, a in _edge_order(inst):
        if su_used[i]:
            trace.decisions.append(((i, a), False, "su_taken"))
        elif ch_used[a]:
            trace.decisions.append(((i, a), False, "channel_taken"))
        elif np.any(load + inst.interference[i] > inst.budget + 1e-12):
            trace.decisions.append(((i, a), False, "budget"))
        else:
            su_used[i] = True
            ch_used[a] = True
            load = load + inst.interference[i]
            links.append((i, a))
            trace.decisions.append(((i, a), True, "ok"))
    assign = Assignment.from_pairs(links, inst)
    trace.assignment = assign
    trace.cost = cost_model_a(assign, inst)
    return assign, trace


def greedy_model_b(inst: ProblemInstance) -> tuple[Assignment, GreedyTrace]:
    """Soft-penalty greedy: accept while the SU's standalone net benefit
    (weight minus its own quadratic self-penalty) is positive.

    Cross terms between SUs are ignored by design, which is what makes
    this a baseline: it can overshoot the penalty when several accepted
    SUs interfere at the same primary.
    """
    trace = GreedyTrace()
    self_penalty = (inst.interference ** 2 / inst.budget).sum(axis=1)
    net = inst.priority - self_penalty
    su_used = np.zeros(inst.n_su, dtype=bool)
    ch_used = np.zeros(inst.n_free, dtype=bool)
    links: list[tuple[int, int]] = []
    edges = [(int(i), int(a)) for i, a in zip(*np.nonzero(inst.access))]
    edges.sort(key=lambda e: (-net[e[0]], e[0], e[1]))
    for i, a in edges:
        if su_used[i]:
            trace.decisions.append(((i, a), False, "su_taken"))
        elif ch_used[a]:
            trace.decisions.append(((i, a), False, "channel_taken"))
        elif net[i] <= 0:
            trace.decisions.append(((i, a), False, "no_benefit"))
        else:
            su_used[i] = True
            ch_used[a] = True
            links.append((i, a))
            trace.decisions.append(((i, a), True, "ok"))
    assign = Assignment.from_pairs(links, inst)
    trace.assignment = assign
    trace.cost = cost_model_b(assign, inst).total
    return assign, trace


def replay_trace(inst: ProblemInstance, trace: GreedyTrace) -> Assignment:
    """Rebuild the assignment described by a trace's accepted edges."""
    return Assignment.from_pairs(trace.accepted, inst)
