"""Log-ratio (field) solver for the soft model: update values, sentinel
handling, per-sweep agreement with the full solver, and low-temperature
stability."""

import numpy as np
import numpy.testing as npt
import pytest

from crbp._util import NEG_SENTINEL, log_ratio
from crbp.bp_field import (
    field_active_su,
    field_channel_su,
    field_su_active,
    field_su_channel,
    init_fields,
    iterate_field,
    sweep_once,
)
from crbp.bp_full import BpConfig, _sweep, effective_priority, init_messages, iterate
from crbp.factorgraph import build_factor_graph
from crbp.model import ProblemInstance, is_matching


def _single_su(n_channels, n_pus=0, g=0.5, priority=1.0):
    return ProblemInstance(
        access=np.ones((1, n_channels), dtype=np.int8),
        interference=np.full((1, n_pus), g),
        priority=np.array([priority]),
        budget=np.full(n_pus, 1.0),
    )


class TestFieldUpdates:
    def test_link_field_single_channel(self):
        inst = _single_su(1)
        fg = build_factor_graph(inst)
        for beta in (1.0, 10.0, 40.0):
            val = field_su_channel(0, 0, init_fields(fg), fg, inst,
                                   BpConfig(beta=beta))
            npt.assert_allclose(val, 1.0, atol=1e-12)

    def test_reverse_link_field_one_competitor(self, t1):
        fg = build_factor_graph(t1)
        val = field_channel_su(0, 0, init_fields(fg), fg, t1, BpConfig(beta=1.0))
        npt.assert_allclose(val, -np.log(2.0), atol=1e-12)
        assert val <= 0.0

    def test_reverse_link_field_exact_one_variant(self, t1):
        fg = build_factor_graph(t1)
        cfg = BpConfig(beta=1.0, exact_one_channel=True)
        npt.assert_allclose(field_channel_su(0, 0, init_fields(fg), fg, t1, cfg),
                            0.0, atol=1e-12)

    def test_activity_field_single_channel(self):
        inst = _single_su(1, n_pus=1, g=0.0001)
        fg = build_factor_graph(inst)
        cfg = BpConfig(beta=1.0, include_diagonal=False)
        npt.assert_allclose(field_su_active(0, 0, init_fields(fg), fg, inst, cfg),
                            1.0, atol=1e-12)

    def test_activity_field_sentinel_without_channels(self):
        inst = ProblemInstance(
            access=np.zeros((1, 1), dtype=np.int8),
            interference=np.array([[0.5]]),
            priority=np.array([1.0]),
            budget=np.array([1.0]),
        )
        fg = build_factor_graph(inst)
        val = field_su_active(0, 0, init_fields(fg), fg, inst, BpConfig(beta=1.0))
        assert val == NEG_SENTINEL

    def test_reverse_activity_field_pair(self, t1):
        fg = build_factor_graph(t1)
        cfg = BpConfig(beta=1.0, halved_cross_terms=True)
        val = field_active_su(0, 0, init_fields(fg), fg, t1, cfg)
        npt.assert_allclose(val, np.log1p(np.exp(-0.42)) - np.log(2.0), atol=1e-12)
        assert val <= 0.0

    def test_reverse_activity_field_single_neighbor(self):
        inst = _single_su(1, n_pus=1, g=0.6)
        fg = build_factor_graph(inst)
        val = field_active_su(0, 0, init_fields(fg), fg, inst, BpConfig(beta=1.0))
        npt.assert_allclose(val, 0.0, atol=1e-15)

    def test_alt_convention_negates_reverse_activity(self, t1):
        fg = build_factor_graph(t1)
        base = field_active_su(0, 0, init_fields(fg), fg, t1, BpConfig(beta=1.0))
        alt = field_active_su(0, 0, init_fields(fg), fg, t1,
                              BpConfig(beta=1.0, alt_field_convention=True))
        npt.assert_allclose(alt, -base, atol=1e-15)


class TestSweepEquivalence:
    def test_fields_are_scaled_log_ratios_per_sweep(self, make_instance):
        rng = np.random.default_rng(53)
        inst = make_instance(rng, n_su=8, n_free=5, n_active=3)
        fg = build_factor_graph(inst)
        for beta in (0.5, 3.0, 5.0):
            cfg = BpConfig(beta=beta, damping=0.0)
            ce = effective_priority(fg, inst, "B", cfg)
            ms, fm = init_messages(fg), init_fields(fg)
            for _ in range(15):
                ms = _sweep(ms, fg, inst, "B", cfg, ce)
                fm = sweep_once(fm, fg, inst, cfg, ce)
                npt.assert_allclose(beta * fm.su_ch, log_ratio(ms.su_ch), atol=1e-6)
                npt.assert_allclose(beta * fm.ch_su, log_ratio(ms.ch_su), atol=1e-6)
                npt.assert_allclose(beta * fm.act_su, log_ratio(ms.act_su), atol=1e-6)
                live = fm.su_act > NEG_SENTINEL / 2
                npt.assert_allclose(beta * fm.su_act[live],
                                    log_ratio(ms.su_act)[live], atol=1e-6)


class TestIterateField:
    def test_rejects_hard_model(self, t1):
        fg = build_factor_graph(t1)
        with pytest.raises(ValueError):
            iterate_field(fg, t1, model="A")

    def test_single_link_marginal(self):
        inst = _single_su(1)
        fg = build_factor_graph(inst)
        for beta in (1.0, 5.0):
            res = iterate_field(fg, inst, cfg=BpConfig(beta=beta))
            assert res.converged
            npt.assert_allclose(res.marginals, [1.0 / (1.0 + np.exp(-beta))],
                                atol=1e-9)
            assert res.assignment.pairs() == [(0, 0)]

    def test_channelless_user_stays_off(self):
        inst = ProblemInstance(
            access=np.array([[0], [1]], dtype=np.int8),
            interference=np.array([[0.5], [0.4]]),
            priority=np.array([1.0, 1.0]),
            budget=np.array([1.0]),
        )
        fg = build_factor_graph(inst)
        res = iterate_field(fg, inst, cfg=BpConfig(beta=10.0))
        assert res.converged
        assert res.marginals[0] == 0.0
        assert res.assignment.pairs() == [(1, 0)]
        assert np.all(np.isfinite(res.extras["fields"].ch_su))

    def test_agrees_with_full_solver_at_moderate_beta(self, make_instance):
        rng = np.random.default_rng(59)
        inst = make_instance(rng, n_su=9, n_free=5, n_active=3)
        fg = build_factor_graph(inst)
        cfg = BpConfig(beta=3.0, max_iter=3000, tol=1e-12)
        full = iterate(fg, inst, "B", cfg)
        field = iterate_field(fg, inst, cfg=cfg)
        assert full.converged and field.converged
        npt.assert_allclose(field.marginals, full.marginals, atol=1e-6)
        npt.assert_allclose(field.belief_log_ratio, full.belief_log_ratio,
                            atol=1e-5)
        npt.assert_array_equal(field.assignment.links, full.assignment.links)

    def test_stable_beyond_full_solver_cap(self, make_instance):
        rng = np.random.default_rng(61)
        inst = make_instance(rng, n_su=12, n_free=6, n_active=4)
        fg = build_factor_graph(inst)
        res = iterate_field(fg, inst, cfg=BpConfig(beta=30.0, max_iter=3000,
                                                   tol=1e-8))
        assert res.converged
        fields = res.extras["fields"]
        for arr in (fields.su_ch, fields.ch_su, fields.act_su):
            assert np.all(np.isfinite(arr))
        assert is_matching(res.assignment, inst)

    def test_variant_flags_run(self, make_instance):
        rng = np.random.default_rng(67)
        inst = make_instance(rng, n_su=6, n_free=4, n_active=2)
        fg = build_factor_graph(inst)
        for flags in (dict(exact_one_channel=True),
                      dict(unconstrained_activity_sum=True),
                      dict(alt_field_convention=True),
                      dict(halved_cross_terms=True)):
            cfg = BpConfig(beta=5.0, max_iter=2000, tol=1e-8, **flags)
            res = iterate_field(fg, inst, cfg=cfg)
            assert is_matching(res.assignment, inst)
            assert np.all((res.marginals >= 0) & (res.marginals <= 1))

    def test_random_sequential_deterministic(self, make_instance):
        rng = np.random.default_rng(71)
        inst = make_instance(rng, n_su=6, n_free=4, n_active=2)
        fg = build_factor_graph(inst)
        cfg = BpConfig(beta=5.0, schedule="random-sequential", seed=3,
                       max_iter=800, tol=1e-10)
        a = iterate_field(fg, inst, cfg=cfg)
        b = iterate_field(fg, inst, cfg=cfg)
        assert a.converged
        npt.assert_array_equal(a.marginals, b.marginals)
        npt.assert_array_equal(a.assignment.links, b.assignment.links)
