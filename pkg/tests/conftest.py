"""Shared fixtures: reference instances, random-instance factories, and the
acceptance-summary hook that prints one line per acceptance check at the end
of the run."""

from __future__ import annotations

import numpy as np
import pytest

from crbp.model import ProblemInstance

# ---------------------------------------------------------------------------
# acceptance bookkeeping
# ---------------------------------------------------------------------------

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance checks")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{name}] {status} - {detail}")


# ---------------------------------------------------------------------------
# reference instances
# ---------------------------------------------------------------------------

@pytest.fixture
def t1() -> ProblemInstance:
    """Two equal-priority SUs competing for one channel, one active PU."""
    return ProblemInstance(
        access=np.array([[1], [1]]),
        interference=np.array([[0.6], [0.7]]),
        priority=np.array([1.0, 1.0]),
        budget=np.array([1.0]),
    )


@pytest.fixture
def t2() -> ProblemInstance:
    """Two SUs on their own channels; connecting both blows the budget."""
    return ProblemInstance(
        access=np.array([[1, 0], [0, 1]]),
        interference=np.array([[0.6], [0.7]]),
        priority=np.array([1.0, 2.0]),
        budget=np.array([1.0]),
    )


# ---------------------------------------------------------------------------
# random-instance factories
# ---------------------------------------------------------------------------

def _bernoulli_instance(rng: np.random.Generator, n_su: int, n_free: int,
                        n_active: int, p_access: float = 0.5,
                        p_interf: float = 0.5) -> ProblemInstance:
    access = (rng.random((n_su, n_free)) < p_access).astype(np.int8)
    mask = rng.random((n_su, n_active)) < p_interf
    interference = np.where(mask, rng.uniform(0.2, 1.2, (n_su, n_active)), 0.0)
    return ProblemInstance(
        access=access,
        interference=interference,
        priority=rng.uniform(0.5, 2.0, n_su),
        budget=np.full(n_active, 1.0),
    )


def _tree_instance(rng: np.random.Generator, n_su: int, n_free: int,
                   n_active: int, max_pu_degree: int = 2,
                   edge_fill: float = 0.9) -> ProblemInstance:
    """Random acyclic instance (a spanning forest of the union graph).

    Candidate edges are tried in random order and kept only when they join
    two distinct components, so the result is always a forest.  Active-PU
    degree is capped because the soft model's pair interactions at one PU
    couple all of its neighbors to each other: beyond two neighbors the
    coupled graph has triangles even when this bipartite graph does not.
    """
    n_nodes = n_su + n_free + n_active
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    candidates = [(i, a, "ch") for i in range(n_su) for a in range(n_free)]
    candidates += [(i, b, "pu") for i in range(n_su) for b in range(n_active)]
    rng.shuffle(candidates)

    access = np.zeros((n_su, n_free), dtype=np.int8)
    interference = np.zeros((n_su, n_active))
    pu_degree = np.zeros(n_active, dtype=int)
    target = int(edge_fill * (n_nodes - 1))
    added = 0
    for i, other, kind in candidates:
        if added >= target:
            break
        if kind == "pu" and pu_degree[other] >= max_pu_degree:
            continue
        u = i
        v = n_su + other if kind == "ch" else n_su + n_free + other
        ru, rv = find(u), find(v)
        if ru == rv:
            continue
        parent[ru] = rv
        if kind == "ch":
            access[i, other] = 1
        else:
            interference[i, other] = rng.uniform(0.3, 1.2)
            pu_degree[other] += 1
        added += 1

    return ProblemInstance(
        access=access,
        interference=interference,
        priority=rng.uniform(0.5, 2.0, n_su),
        budget=np.full(n_active, 1.0),
    )


@pytest.fixture
def make_instance():
    return _bernoulli_instance


@pytest.fixture
def make_tree_instance():
    return _tree_instance
