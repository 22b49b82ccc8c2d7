"""Exact reference solvers for small instances.

`solve_exact` enumerates matchings by depth-first search over per-SU
channel choices and returns a true optimum; `boltzmann_marginals`
enumerates the Gibbs distribution itself.  Both refuse instances whose
search space would be unreasonably large, so they stay test-sized by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Assignment, ProblemInstance, cost_model_a, cost_model_b

__all__ = [
    "SearchSpaceTooLargeError",
    "ExactSolution",
    "solve_exact",
    "BoltzmannTable",
    "boltzmann_marginals",
]

_SEARCH_GUARD = 1e7
_GIBBS_GUARD = 1e6


class SearchSpaceTooLargeError(RuntimeError):
    """Raised when the enumeration guard trips."""


@dataclass
class ExactSolution:
    assignment: Assignment
    cost: float
    n_evaluated: int


def _choices(inst: ProblemInstance) -> list[list[int]]:
    """Per-SU channel options; -1 (stay unassigned) is always first, so
    DFS order is lexicographic in the choice vector."""
    return [[-1] + list(np.nonzero(inst.access[i])[0]) for i in range(inst.n_su)]


def _guard(choices: list[list[int]], limit: float) -> None:
    size = 1.0
    for c in choices:
        size *= len(c)
        if size > limit:
            raise SearchSpaceTooLargeError(
                f"search space exceeds {limit:.0e} states; "
                "use the message-passing solvers instead")


def solve_exact(inst: ProblemInstance, model: str = "A") -> ExactSolution:
    """Optimal assignment by branch-and-bound DFS.

    Ties on cost keep the first solution found, i.e. the
    lexicographically smallest per-SU choice vector with -1 ordered
    before any channel.
    """
    if model not in ("A", "B"):
        raise ValueError("model must be 'A' or 'B'")
    choices = _choices(inst)
    _guard(choices, _SEARCH_GUARD)
    n, m = inst.n_su, inst.n_free

    # optimistic per-SU gain for the remaining suffix: connecting SU j
    # can improve the cost by at most -delta[j]
    if model == "A":
        delta = -inst.priority.astype(float)
    else:
        self_pen = (inst.interference ** 2 / inst.budget).sum(axis=1)
        delta = np.minimum(0.0, -inst.priority + self_pen)
    suffix_bound = np.concatenate([np.cumsum(delta[::-1])[::-1], [0.0]])

    best_cost = np.inf
    best_choice: list[int] | None = None
    ch_used = np.zeros(m, dtype=bool)
    load = np.zeros(inst.n_active)
    choice = [-1] * n
    n_eval = 0

    def dfs(j: int, cost_so_far: float) -> None:
        nonlocal best_cost, best_choice, n_eval
        if cost_so_far + suffix_bound[j] >= best_cost:
            return
        if j == n:
            n_eval += 1
            if cost_so_far < best_cost:
                best_cost = cost_so_far
                best_choice = choice.copy()
            return
        for a in choices[j]:
            if a == -1:
                choice[j] = -1
                dfs(j + 1, cost_so_far)
                continue
            if ch_used[a]:
                continue
            row = inst.interference[j]
            if model == "A":
                if np.any(load + row > inst.budget + 1e-12):
                    continue
                step = -float(inst.priority[j])
            else:
                step = float(-inst.priority[j]
                             + ((2.0 * load + row) * row / inst.budget).sum())
            ch_used[a] = True
            load[:] += row
            choice[j] = a
            dfs(j + 1, cost_so_far + step)
            choice[j] = -1
            load[:] -= row
            ch_used[a] = False

    dfs(0, 0.0)
    assert best_choice is not None
    pairs = [(j, a) for j, a in enumerate(best_choice) if a >= 0]
    assign = Assignment.from_pairs(pairs, inst)
    cost = cost_model_a(assign, inst) if model == "A" else cost_model_b(assign, inst).total
    return ExactSolution(assignment=assign, cost=cost, n_evaluated=n_eval)


@dataclass
class BoltzmannTable:
    """Exact Gibbs statistics over all matchings of an instance."""

    link_marginals: np.ndarray      # P(link on) per access edge, dense (n_su, n_free)
    activity_marginals: np.ndarray  # P(SU active), length n_su
    log_partition: float
    beta: float
    n_states: int

    @property
    def partition(self) -> float:
        return float(np.exp(self.log_partition))


def boltzmann_marginals(inst: ProblemInstance, model: str, beta: float) -> BoltzmannTable:
    """Enumerate every matching, weight by exp(-beta * cost).

    Model 'A' restricts the support to budget-feasible matchings; model
    'B' weights all matchings by the penalized cost.
    """
    if model not in ("A", "B"):
        raise ValueError("model must be 'A' or 'B'")
    choices = _choices(inst)
    _guard(choices, _GIBBS_GUARD)
    n, m = inst.n_su, inst.n_free

    states: list[tuple[list[int], float]] = []
    ch_used = np.zeros(m, dtype=bool)
    choice = [-1] * n

    def dfs(j: int) -> None:
        if j == n:
            pairs = [(k, a) for k, a in enumerate(choice) if a >= 0]
            assign = Assignment.from_pairs(pairs, inst)
            if model == "A":
                load = assign.active @ inst.interference
                if np.any(load > inst.budget + 1e-12):
                    return
                h = cost_model_a(assign, inst)
            else:
                h = cost_model_b(assign, inst).total
            states.append((choice.copy(), h))
            return
        for a in choices[j]:
            if a == -1:
                choice[j] = -1
                dfs(j + 1)
                continue
            if ch_used[a]:
                continue
            ch_used[a] = True
            choice[j] = a
            dfs(j + 1)
            choice[j] = -1
            ch_used[a] = False

    dfs(0)
    energies = np.array([h for _, h in states])
    shift = energies.min()
    weights = np.exp(-beta * (energies - shift))
    z = weights.sum()
    probs = weights / z

    link = np.zeros((n, m))
    activity = np.zeros(n)
    for (vec, _), p in zip(states, probs):
        for j, a in enumerate(vec):
            if a >= 0:
                link[j, a] += p
                activity[j] += p
    log_z = float(np.log(z) - beta * shift)
    return BoltzmannTable(link_marginals=link, activity_marginals=activity,
                          log_partition=log_z, beta=beta, n_states=len(states))
