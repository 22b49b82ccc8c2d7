"""Log-ratio message passing for the soft-penalty model.

Every probability-pair message of the full solver is reduced to the
single number (1/beta) * log(m(1)/m(0)).  Channel-side values are the
link fields (SU -> channel and channel -> SU); active-side values are
the activity fields (SU -> PU and PU -> SU).  The update rules below are
the exact log-ratio images of the full-message updates, so per-sweep
values coincide with the full solver's log ratios when both run
undamped from the same initialization.  Working in fields avoids the
underflow that caps the full solver's beta, so this is the solver to
use at low temperature.

A structurally inactive SU (no accessible channel) carries the sentinel
NEG_SENTINEL instead of -inf; it is pinned, not damped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import NEG_SENTINEL, group_full_and_loo
from .bp_full import BpConfig, BpResult, effective_priority, round_to_assignment, _pair_scale
from .factorgraph import FactorGraph
from .model import ProblemInstance, cost_model_a, cost_model_b
from ._util import normalize_from_logs

__all__ = [
    "FieldMessages",
    "init_fields",
    "field_su_channel",
    "field_channel_su",
    "field_su_active",
    "field_active_su",
    "sweep_once",
    "iterate_field",
]


@dataclass
class FieldMessages:
    su_ch: np.ndarray   # link field SU -> channel, per channel edge
    ch_su: np.ndarray   # link field channel -> SU
    su_act: np.ndarray  # activity field SU -> PU, per active edge
    act_su: np.ndarray  # activity field PU -> SU


def init_fields(fg: FactorGraph) -> FieldMessages:
    """All fields zero (the image of uniform messages)."""
    return FieldMessages(
        su_ch=np.zeros(fg.n_channel_edges),
        ch_su=np.zeros(fg.n_channel_edges),
        su_act=np.zeros(fg.n_active_edges),
        act_su=np.zeros(fg.n_active_edges),
    )


def _check_soft(model: str) -> None:
    if model != "B":
        raise ValueError("the log-ratio solver supports model 'B' only")


# ---------------------------------------------------------------------------
# single-edge updates
# ---------------------------------------------------------------------------

def field_su_channel(i: int, a: int, fm: FieldMessages, fg: FactorGraph,
                     inst: ProblemInstance, cfg: BpConfig) -> float:
    """Link field SU i -> channel a (undamped)."""
    e = fg.channel_edge(i, a)
    lo, hi = fg.su_ch_ptr[i], fg.su_ch_ptr[i + 1]
    alo, ahi = fg.su_act_ptr[i], fg.su_act_ptr[i + 1]
    ce = _ce_one(fg, inst, i, cfg)
    q_full = float(fm.act_su[alo:ahi].sum())
    others = np.delete(fm.ch_su[lo:hi], e - lo)
    s_minus = float(np.exp(np.minimum(cfg.beta * others, 700.0)).sum())
    with np.errstate(divide="ignore"):
        return float(-np.logaddexp(-cfg.beta * (ce + q_full), np.log(s_minus)) / cfg.beta)


def field_channel_su(i: int, a: int, fm: FieldMessages, fg: FactorGraph,
                     inst: ProblemInstance, cfg: BpConfig) -> float:
    """Link field channel a -> SU i (undamped); always <= 0."""
    e = fg.channel_edge(i, a)
    grp = fg.ch_order[fg.ch_ptr[a]:fg.ch_ptr[a + 1]]
    own = int(np.nonzero(grp == e)[0][0])
    others = np.delete(fm.su_ch[grp], own)
    t_minus = float(np.exp(np.minimum(cfg.beta * others, 700.0)).sum())
    with np.errstate(divide="ignore"):
        inner = np.log(t_minus) if cfg.exact_one_channel else np.log1p(t_minus)
    return float(-inner / cfg.beta)


def field_su_active(i: int, b: int, fm: FieldMessages, fg: FactorGraph,
                    inst: ProblemInstance, cfg: BpConfig) -> float:
    """Activity field SU i -> PU b (undamped); sentinel when i has no channel."""
    f = fg.active_edge(i, b)
    lo, hi = fg.su_ch_ptr[i], fg.su_ch_ptr[i + 1]
    if hi == lo:
        return NEG_SENTINEL
    alo, ahi = fg.su_act_ptr[i], fg.su_act_ptr[i + 1]
    ce = _ce_one(fg, inst, i, cfg)
    q_minus = float(np.delete(fm.act_su[alo:ahi], f - alo).sum())
    avail = _avail_from_fields(fm.ch_su[lo:hi], cfg)
    if avail == -np.inf:
        return NEG_SENTINEL
    if cfg.alt_field_convention:
        # negated variant with the unconstrained channel sum
        scaled = np.minimum(cfg.beta * fm.ch_su[lo:hi], 700.0)
        total = min(float(np.log1p(np.exp(scaled)).sum()), 700.0)
        inner = np.log(np.expm1(total)) if total > 0 else -np.inf
        return float(-ce - q_minus - inner / cfg.beta)
    return float(ce + q_minus + avail / cfg.beta)


def field_active_su(i: int, b: int, fm: FieldMessages, fg: FactorGraph,
                    inst: ProblemInstance, cfg: BpConfig) -> float:
    """Activity field PU b -> SU i (undamped); <= 0 under the default signs."""
    f = fg.active_edge(i, b)
    grp = fg.pu_order_desc[fg.pu_ptr[b]:fg.pu_ptr[b + 1]]
    k = int(np.nonzero(grp == f)[0][0])
    g = fg.act_g[grp]
    q = fm.su_act[grp]
    gamma = _pair_scale(cfg) * g[k] * g / float(inst.budget[b])
    terms = np.logaddexp(cfg.beta * (q - gamma), 0.0) - np.logaddexp(cfg.beta * q, 0.0)
    terms[k] = 0.0
    val = float(terms.sum()) / cfg.beta
    return -val if cfg.alt_field_convention else val


def _avail_from_fields(ch_su_fields: np.ndarray, cfg: BpConfig) -> float:
    scaled = np.minimum(cfg.beta * ch_su_fields, 700.0)
    with np.errstate(divide="ignore", over="ignore"):
        if cfg.unconstrained_activity_sum:
            total = min(float(np.log1p(np.exp(scaled)).sum()), 700.0)
            return float(np.log(np.expm1(total))) if total > 0 else -np.inf
        s = float(np.exp(scaled).sum())
        return float(np.log(s)) if s > 0 else -np.inf


def _ce_one(fg: FactorGraph, inst: ProblemInstance, i: int, cfg: BpConfig) -> float:
    ce = float(inst.priority[i])
    if cfg.include_diagonal:
        lo, hi = fg.su_act_ptr[i], fg.su_act_ptr[i + 1]
        g = fg.act_g[lo:hi]
        ce -= float((g * g / inst.budget[fg.act_pu[lo:hi]]).sum())
    return ce


# ---------------------------------------------------------------------------
# vectorized synchronous sweep
# ---------------------------------------------------------------------------

def sweep_once(fm: FieldMessages, fg: FactorGraph, inst: ProblemInstance,
               cfg: BpConfig, ce: np.ndarray) -> FieldMessages:
    """All four field families recomputed from the current state."""
    beta = cfg.beta
    e_ch, e_act = fg.n_channel_edges, fg.n_active_edges

    exp_hch = np.exp(np.minimum(beta * fm.ch_su, 700.0)) if e_ch else np.empty(0)
    hch_full, hch_loo = group_full_and_loo(exp_hch, fg.su_ch_ptr)
    q_full, q_loo = group_full_and_loo(fm.act_su, fg.su_act_ptr)

    if e_ch:
        with np.errstate(divide="ignore"):
            new_su_ch = -np.logaddexp(-beta * (ce[fg.ch_su] + q_full[fg.ch_su]),
                                      np.log(hch_loo)) / beta
        exp_hsu = np.exp(np.minimum(beta * fm.su_ch, 700.0))
        _, loo_grouped = group_full_and_loo(exp_hsu[fg.ch_order], fg.ch_ptr)
        t_minus = np.empty(e_ch)
        t_minus[fg.ch_order] = loo_grouped
        with np.errstate(divide="ignore"):
            inner = np.log(t_minus) if cfg.exact_one_channel else np.log1p(t_minus)
        new_ch_su = -inner / beta
    else:
        new_su_ch = fm.su_ch.copy()
        new_ch_su = fm.ch_su.copy()

    if e_act:
        avail = _avail_per_su(exp_hch, hch_full, fg, cfg)
        su = fg.act_su
        if cfg.alt_field_convention:
            new_su_act = -(ce[su] + q_loo) - avail[su] / beta
        else:
            new_su_act = ce[su] + q_loo + avail[su] / beta
        no_channel = np.diff(fg.su_ch_ptr) == 0
        sentinel = no_channel[su] | np.isneginf(avail[su])
        new_su_act[sentinel] = NEG_SENTINEL

        new_act_su = np.empty(e_act)
        scale = _pair_scale(cfg)
        for b in range(fg.n_active):
            grp = fg.pu_order_desc[fg.pu_ptr[b]:fg.pu_ptr[b + 1]]
            if len(grp) == 0:
                continue
            g = fg.act_g[grp]
            q = fm.su_act[grp]
            gamma = (scale / float(inst.budget[b])) * np.outer(g, g)
            terms = (np.logaddexp(beta * (q[None, :] - gamma), 0.0)
                     - np.logaddexp(beta * q, 0.0)[None, :])
            np.fill_diagonal(terms, 0.0)
            vals = terms.sum(axis=1) / beta
            new_act_su[grp] = -vals if cfg.alt_field_convention else vals
    else:
        new_su_act = fm.su_act.copy()
        new_act_su = fm.act_su.copy()

    return FieldMessages(su_ch=new_su_ch, ch_su=new_ch_su,
                         su_act=new_su_act, act_su=new_act_su)


def _avail_per_su(exp_hch: np.ndarray, hch_full: np.ndarray, fg: FactorGraph,
                  cfg: BpConfig) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore"):
        if cfg.unconstrained_activity_sum:
            totals, _ = group_full_and_loo(np.log1p(exp_hch), fg.su_ch_ptr)
            totals = np.minimum(totals, 700.0)
            out = np.full(fg.n_su, -np.inf)
            pos = totals > 0
            out[pos] = np.log(np.expm1(totals[pos]))
            return out
        out = np.full(fg.n_su, -np.inf)
        pos = hch_full > 0
        out[pos] = np.log(hch_full[pos])
        return out


# ---------------------------------------------------------------------------
# iteration driver
# ---------------------------------------------------------------------------

def iterate_field(fg: FactorGraph, inst: ProblemInstance, model: str = "B",
                  cfg: BpConfig | None = None) -> BpResult:
    """Damped field sweeps plus rounding; mirrors bp_full.iterate."""
    cfg = cfg or BpConfig()
    cfg.validate()
    _check_soft(model)
    ce = effective_priority(fg, inst, "B", cfg)
    fm = init_fields(fg)

    converged = fg.n_channel_edges + fg.n_active_edges == 0
    residual = 0.0
    iterations = 0
    lam = cfg.damping
    if cfg.schedule == "synchronous":
        for iterations in range(1, cfg.max_iter + 1):
            new = sweep_once(fm, fg, inst, cfg, ce)
            residual = 0.0
            for name in ("su_ch", "ch_su", "su_act", "act_su"):
                old = getattr(fm, name)
                if not len(old):
                    continue
                computed = getattr(new, name)
                blended = lam * old + (1.0 - lam) * computed
                pinned = computed <= NEG_SENTINEL / 2
                blended[pinned] = computed[pinned]  # sentinels are set, not damped
                residual = max(residual, float(np.abs(blended - old).max()))
                setattr(fm, name, blended)
            if residual < cfg.tol:
                converged = True
                break
    else:
        converged, iterations, residual = _iterate_sequential(fm, fg, inst, cfg)

    return _finalize(fm, fg, inst, cfg, ce, converged, iterations, residual)


def _iterate_sequential(fm: FieldMessages, fg: FactorGraph, inst: ProblemInstance,
                        cfg: BpConfig):
    rng = np.random.default_rng(cfg.seed)
    e_ch, e_act = fg.n_channel_edges, fg.n_active_edges
    n_msgs = 2 * e_ch + 2 * e_act
    lam = cfg.damping
    arrays = {0: "su_ch", 1: "ch_su", 2: "su_act", 3: "act_su"}
    updaters = {0: field_su_channel, 1: field_channel_su,
                2: field_su_active, 3: field_active_su}
    converged, residual, it = False, 0.0, 0
    for it in range(1, cfg.max_iter + 1):
        residual = 0.0
        for idx in rng.permutation(n_msgs):
            if idx < 2 * e_ch:
                fam, e = (0, int(idx)) if idx < e_ch else (1, int(idx) - e_ch)
                i, a = int(fg.ch_su[e]), int(fg.ch_ch[e])
            else:
                r = int(idx) - 2 * e_ch
                fam, e = (2, r) if r < e_act else (3, r - e_act)
                i, a = int(fg.act_su[e]), int(fg.act_pu[e])
            computed = updaters[fam](i, a, fm, fg, inst, cfg)
            target = getattr(fm, arrays[fam])
            blended = computed if computed <= NEG_SENTINEL / 2 \
                else lam * target[e] + (1.0 - lam) * computed
            residual = max(residual, abs(blended - target[e]))
            target[e] = blended
        if residual < cfg.tol:
            converged = True
            break
    return converged, it, residual


def _finalize(fm: FieldMessages, fg: FactorGraph, inst: ProblemInstance,
              cfg: BpConfig, ce: np.ndarray, converged: bool, iterations: int,
              residual: float) -> BpResult:
    e_ch = fg.n_channel_edges
    if e_ch:
        lr = cfg.beta * (fm.su_ch + fm.ch_su)
        link_beliefs = normalize_from_logs(np.zeros(e_ch), lr)
        exp_hch = np.exp(np.minimum(cfg.beta * fm.ch_su, 700.0))
    else:
        lr = np.empty(0)
        link_beliefs = np.empty((0, 2))
        exp_hch = np.empty(0)
    hch_full, _ = group_full_and_loo(exp_hch, fg.su_ch_ptr)
    avail = _avail_per_su(exp_hch, hch_full, fg, cfg)
    q_full, _ = group_full_and_loo(fm.act_su, fg.su_act_ptr)
    logit = cfg.beta * (ce + q_full) + avail
    with np.errstate(over="ignore"):
        marginals = 1.0 / (1.0 + np.exp(-np.clip(logit, -745.0, 745.0)))
    marginals[np.isneginf(logit)] = 0.0

    assign = round_to_assignment(fg, inst, lr, "B", marginals)
    util = cost_model_a(assign, inst)
    breakdown = cost_model_b(assign, inst)
    return BpResult(converged=converged, iterations=iterations, residual=residual,
                    marginals=marginals, link_beliefs=link_beliefs, belief_log_ratio=lr,
                    assignment=assign, utility_term=util,
                    interference_term=breakdown.interference_term, cost=breakdown.total,
                    extras={"fields": fm})
