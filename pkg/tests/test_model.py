"""Problem data structures, activity rule, cost evaluators, serialization."""

import json

import numpy as np
import numpy.testing as npt
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from crbp.model import (
    Assignment,
    ProblemInstance,
    activity_from_links,
    cost_model_a,
    cost_model_b,
    instance_from_json,
    instance_to_json,
    interference_load,
    is_feasible_model_a,
    is_matching,
    quadratic_interference_expanded,
)
from crbp.oracle import solve_exact


class TestValidation:
    def test_dimensions(self, t1):
        assert t1.n_su == 2
        assert t1.n_free == 1
        assert t1.n_active == 1

    def test_access_must_be_binary(self):
        with pytest.raises(ValueError):
            ProblemInstance(
                access=np.array([[2]]),
                interference=np.zeros((1, 0)),
                priority=np.array([1.0]),
                budget=np.zeros(0),
            )

    def test_negative_gain_rejected(self):
        with pytest.raises(ValueError):
            ProblemInstance(
                access=np.array([[1]]),
                interference=np.array([[-0.1]]),
                priority=np.array([1.0]),
                budget=np.array([1.0]),
            )

    def test_budget_must_be_positive(self):
        with pytest.raises(ValueError):
            ProblemInstance(
                access=np.array([[1]]),
                interference=np.array([[0.5]]),
                priority=np.array([1.0]),
                budget=np.array([0.0]),
            )

    def test_row_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ProblemInstance(
                access=np.ones((2, 1), dtype=np.int8),
                interference=np.zeros((3, 1)),
                priority=np.ones(2),
                budget=np.ones(1),
            )

    def test_arrays_frozen(self, t1):
        with pytest.raises(ValueError):
            t1.access[0, 0] = 0


class TestActivity:
    def test_single_link(self, t1):
        active = activity_from_links(np.array([[1], [0]]), t1)
        npt.assert_array_equal(active, [1, 0])

    def test_link_outside_access_is_ignored(self, t2):
        links = np.array([[0, 1], [0, 0]])  # SU 0 claims a channel it cannot reach
        npt.assert_array_equal(activity_from_links(links, t2), [0, 0])

    def test_multiple_links_still_one_activation(self, t2):
        links = np.array([[1, 0], [0, 1]])
        npt.assert_array_equal(activity_from_links(links, t2), [1, 1])


class TestAssignment:
    def test_from_pairs_round_trip(self, t2):
        assign = Assignment.from_pairs([(1, 1)], t2)
        assert assign.pairs() == [(1, 1)]
        npt.assert_array_equal(assign.active, [0, 1])

    def test_empty(self, t1):
        assign = Assignment.empty(t1)
        assert assign.pairs() == []
        assert cost_model_a(assign, t1) == 0.0

    def test_matching_detects_channel_conflict(self, t1):
        both = Assignment.from_links(np.array([[1], [1]]), t1)
        assert not is_matching(both, t1)
        one = Assignment.from_links(np.array([[1], [0]]), t1)
        assert is_matching(one, t1)

    def test_matching_detects_su_claiming_two_channels(self):
        inst = ProblemInstance(
            access=np.array([[1, 1]]),
            interference=np.zeros((1, 0)),
            priority=np.array([1.0]),
            budget=np.zeros(0),
        )
        greedy_links = Assignment.from_links(np.array([[1, 1]]), inst)
        assert not is_matching(greedy_links, inst)


class TestCosts:
    def test_interference_load(self, t1):
        one = Assignment.from_links(np.array([[1], [0]]), t1)
        npt.assert_allclose(interference_load(one, t1), [0.6])
        both = Assignment(links=np.array([[1], [1]]), active=np.array([1, 1]))
        npt.assert_allclose(interference_load(both, t1), [1.3])

    def test_feasibility_model_a(self, t1):
        one = Assignment.from_pairs([(0, 0)], t1)
        assert is_feasible_model_a(one, t1)
        both = Assignment(links=np.array([[1], [1]]), active=np.array([1, 1]))
        assert not is_feasible_model_a(both, t1)

    def test_cost_model_a(self, t2):
        assert cost_model_a(Assignment.from_pairs([(1, 1)], t2), t2) == -2.0
        assert cost_model_a(Assignment.from_pairs([(0, 0)], t2), t2) == -1.0
        assert cost_model_a(Assignment.from_pairs([(0, 0), (1, 1)], t2), t2) == -3.0

    def test_cost_model_b_breakdown(self, t2):
        bd = cost_model_b(Assignment.from_pairs([(0, 0)], t2), t2, check=True)
        npt.assert_allclose(bd.utility_term, -1.0)
        npt.assert_allclose(bd.interference_term, 0.36)
        npt.assert_allclose(bd.total, -0.64)

        bd = cost_model_b(Assignment.from_pairs([(1, 1)], t2), t2, check=True)
        npt.assert_allclose(bd.total, -1.51)

        bd = cost_model_b(Assignment.from_pairs([(0, 0), (1, 1)], t2), t2, check=True)
        npt.assert_allclose(bd.utility_term, -3.0)
        npt.assert_allclose(bd.interference_term, 1.69)
        npt.assert_allclose(bd.total, -1.31)

    def test_quadratic_identity_random(self, make_instance):
        rng = np.random.default_rng(7)
        inst = make_instance(rng, n_su=9, n_free=5, n_active=4)
        for _ in range(50):
            active = (rng.random(inst.n_su) < 0.5).astype(np.int64)
            load = active @ inst.interference
            direct = float(np.sum(load**2 / inst.budget))
            expanded = quadratic_interference_expanded(active, inst)
            npt.assert_allclose(expanded, direct, rtol=1e-12, atol=1e-15)


class TestStructuralOptimality:
    def test_priority_scaling_keeps_model_a_argmin(self, make_instance):
        rng = np.random.default_rng(11)
        inst = make_instance(rng, n_su=6, n_free=4, n_active=2)
        base = solve_exact(inst, model="A")
        scaled = ProblemInstance(
            access=inst.access,
            interference=inst.interference,
            priority=inst.priority * 7.5,
            budget=inst.budget,
        )
        res = solve_exact(scaled, model="A")
        npt.assert_array_equal(res.assignment.links, base.assignment.links)
        npt.assert_allclose(res.cost, 7.5 * base.cost, rtol=1e-12)

    def test_no_interference_reduces_to_maximum_matching(self, make_instance):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            inst = make_instance(rng, n_su=7, n_free=5, n_active=0)
            res = solve_exact(inst, model="A")
            match = maximum_bipartite_matching(
                csr_matrix(inst.access), perm_type="column"
            )
            assert int(res.assignment.active.sum()) == int((match >= 0).sum())

    def test_extra_interferer_never_helps(self, make_instance):
        rng = np.random.default_rng(17)
        inst = make_instance(rng, n_su=6, n_free=4, n_active=2)
        more = ProblemInstance(
            access=inst.access,
            interference=np.hstack([inst.interference,
                                    rng.uniform(0.2, 1.0, (inst.n_su, 1))]),
            priority=inst.priority,
            budget=np.append(inst.budget, 1.0),
        )
        assert solve_exact(more, model="B").cost >= solve_exact(inst, model="B").cost - 1e-12


class TestSerialization:
    def test_round_trip(self, make_instance):
        rng = np.random.default_rng(23)
        inst = make_instance(rng, n_su=6, n_free=4, n_active=3)
        back = instance_from_json(instance_to_json(inst))
        npt.assert_array_equal(back.access, inst.access)
        npt.assert_allclose(back.interference, inst.interference, rtol=0, atol=0)
        npt.assert_allclose(back.priority, inst.priority, rtol=0, atol=0)
        npt.assert_allclose(back.budget, inst.budget, rtol=0, atol=0)

    def test_document_shape(self, t2):
        doc = json.loads(instance_to_json(t2))
        assert set(doc) == {"n_su", "n_free", "n_active", "access",
                            "interference", "priority", "theta", "metadata"}
        assert doc["access"] == [[0, 0], [1, 1]]
        assert doc["interference"] == [[0, 0, 0.6], [1, 0, 0.7]]
        assert doc["theta"] == [1.0]

    def test_metadata_survives(self, t1):
        inst = ProblemInstance(
            access=t1.access,
            interference=t1.interference,
            priority=t1.priority,
            budget=t1.budget,
            metadata={"seed": 5, "note": "x"},
        )
        back = instance_from_json(instance_to_json(inst))
        assert back.metadata["seed"] == 5
        assert back.metadata["note"] == "x"
