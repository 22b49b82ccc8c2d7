"""Sum-product message passing with explicit probability-pair messages.

Four directed message families live on the factor graph: on channel-side
edges, SU -> channel (propensity to use the link) and channel -> SU
(occupancy pushback); on active-side edges, SU -> PU (activity cavity)
and PU -> SU (interference veto).  Model A evaluates the PU factor by
exact weighted subset enumeration under the hard budget; Model B uses
the factorized soft-penalty message.

Messages are normalized pairs (m(0), m(1)).  Updates run either as
synchronous sweeps (vectorized, double buffered) or one message at a
time in random order.  beta above FULL_MESSAGE_BETA_CAP is rejected:
probability pairs underflow there, use the log-ratio solver instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._budget import budget_messages
from ._util import TINY, group_full_and_loo, log_ratio, normalize_from_logs
from .factorgraph import FactorGraph
from .model import Assignment, ProblemInstance, cost_model_a, cost_model_b

__all__ = [
    "BpConfig",
    "BpResult",
    "MessageSet",
    "DegreeTooHighError",
    "FULL_MESSAGE_BETA_CAP",
    "init_messages",
    "effective_priority",
    "update_su_channel",
    "update_channel_su",
    "update_su_active",
    "update_active_su",
    "iterate",
    "round_to_assignment",
]

FULL_MESSAGE_BETA_CAP = 50.0


class DegreeTooHighError(RuntimeError):
    """Active-PU neighborhood too large for hard-budget enumeration."""


@dataclass(frozen=True)
class BpConfig:
    beta: float = 10.0          # inverse temperature
    damping: float = 0.5        # new = damping*old + (1-damping)*computed
    max_iter: int = 1000
    tol: float = 1e-8           # stop when max message change drops below
    schedule: str = "synchronous"  # or "random-sequential"
    d_max: int = 25             # cap on enumerated neighbors per PU message
    include_diagonal: bool = True  # absorb self-interference into priorities (Model B)
    seed: int = 0               # drives the random-sequential order only
    # compatibility variants, all off by default:
    exact_one_channel: bool = False      # channel factor demands exactly one user
    unconstrained_activity_sum: bool = False  # activity cavity sums all link patterns
    halved_cross_terms: bool = False     # single-count pair couplings (soft model)
    alt_field_convention: bool = False   # negated activity-field updates (log-ratio solver)

    def validate(self) -> None:
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ValueError("beta must be positive and finite")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.schedule not in ("synchronous", "random-sequential"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")


@dataclass
class MessageSet:
    """Normalized message pairs for every directed edge."""

    su_ch: np.ndarray   # (n_channel_edges, 2) SU -> channel
    ch_su: np.ndarray   # (n_channel_edges, 2) channel -> SU
    su_act: np.ndarray  # (n_active_edges, 2) SU -> active PU
    act_su: np.ndarray  # (n_active_edges, 2) active PU -> SU


def init_messages(fg: FactorGraph) -> MessageSet:
    """All messages uniform."""
    return MessageSet(
        su_ch=np.full((fg.n_channel_edges, 2), 0.5),
        ch_su=np.full((fg.n_channel_edges, 2), 0.5),
        su_act=np.full((fg.n_active_edges, 2), 0.5),
        act_su=np.full((fg.n_active_edges, 2), 0.5),
    )


def effective_priority(fg: FactorGraph, inst: ProblemInstance, model: str,
                       cfg: BpConfig) -> np.ndarray:
    """Per-SU priority with the soft model's self-interference folded in.

    Expanding the squared-load penalty gives each SU a linear self-term
    sum_b g(i,b)^2/budget_b; subtracting it from the priority lets the
    pair messages carry cross terms only.
    """
    ce = inst.priority.astype(np.float64).copy()
    if model == "B" and cfg.include_diagonal and fg.n_active_edges:
        diag = fg.act_g * fg.act_g / inst.budget[fg.act_pu]
        ce -= np.bincount(fg.act_su, weights=diag, minlength=fg.n_su)
    return ce


def _pair_scale(cfg: BpConfig) -> float:
    # Each unordered SU pair appears twice in the expanded quadratic cost.
    # Carrying the doubled coupling in each directed message makes the
    # message weights consistent with cost_model_b; the halved variant
    # counts each ordered pair once.
    return 1.0 if cfg.halved_cross_terms else 2.0


def _check_model(model: str) -> None:
    if model not in ("A", "B"):
        raise ValueError(f"model must be 'A' or 'B', got {model!r}")


# ---------------------------------------------------------------------------
# single-edge updates (reference implementations, also used by the
# random-sequential schedule)
# ---------------------------------------------------------------------------

def update_su_channel(i: int, a: int, ms: MessageSet, fg: FactorGraph,
                      inst: ProblemInstance, model: str, cfg: BpConfig) -> np.ndarray:
    """Computed SU->channel message (undamped), as a normalized pair."""
    _check_model(model)
    e = fg.channel_edge(i, a)
    ce = _effective_priority_one(fg, inst, i, model, cfg)
    lo, hi = fg.su_ch_ptr[i], fg.su_ch_ptr[i + 1]
    lr_b = log_ratio(ms.ch_su[lo:hi])
    s_minus = float(np.exp(np.minimum(np.delete(lr_b, e - lo), 700.0)).sum())
    alo, ahi = fg.su_act_ptr[i], fg.su_act_ptr[i + 1]
    on_logit = cfg.beta * ce + float(log_ratio(ms.act_su[alo:ahi]).sum())
    with np.errstate(divide="ignore"):
        log0 = np.logaddexp(0.0, on_logit + np.log(s_minus))
    return normalize_from_logs(np.array([log0]), np.array([on_logit]))[0]


def update_channel_su(i: int, a: int, ms: MessageSet, fg: FactorGraph,
                      inst: ProblemInstance, model: str, cfg: BpConfig) -> np.ndarray:
    """Computed channel->SU message (undamped)."""
    _check_model(model)
    e = fg.channel_edge(i, a)
    grp = fg.ch_order[fg.ch_ptr[a]:fg.ch_ptr[a + 1]]
    lr_a = log_ratio(ms.su_ch[grp])
    own = int(np.nonzero(grp == e)[0][0])
    t_minus = float(np.exp(np.minimum(np.delete(lr_a, own), 700.0)).sum())
    with np.errstate(divide="ignore"):
        log0 = np.log(t_minus) if cfg.exact_one_channel else np.log1p(t_minus)
    return normalize_from_logs(np.array([log0]), np.array([0.0]))[0]


def update_su_active(i: int, b: int, ms: MessageSet, fg: FactorGraph,
                     inst: ProblemInstance, model: str, cfg: BpConfig) -> np.ndarray:
    """Computed SU->PU activity message (undamped).

    An SU with no accessible channel is pinned to inactive: exactly (1, 0).
    """
    _check_model(model)
    f = fg.active_edge(i, b)
    lo, hi = fg.su_ch_ptr[i], fg.su_ch_ptr[i + 1]
    if hi == lo:
        return np.array([1.0, 0.0])
    ce = _effective_priority_one(fg, inst, i, model, cfg)
    alo, ahi = fg.su_act_ptr[i], fg.su_act_ptr[i + 1]
    lr_d = log_ratio(ms.act_su[alo:ahi])
    ld_minus = float(np.delete(lr_d, f - alo).sum())
    lr_b = log_ratio(ms.ch_su[lo:hi])
    avail = _availability(lr_b, cfg)
    log1 = cfg.beta * ce + ld_minus + avail
    return normalize_from_logs(np.array([0.0]), np.array([log1]))[0]


def _availability(lr_b: np.ndarray, cfg: BpConfig) -> float:
    """Log weight of the channel-side patterns that switch the SU on,
    relative to the all-off pattern."""
    clipped = np.minimum(lr_b, 700.0)
    with np.errstate(divide="ignore", over="ignore"):
        if cfg.unconstrained_activity_sum:
            total = min(float(np.log1p(np.exp(clipped)).sum()), 700.0)
            return float(np.log(np.expm1(total))) if total > 0 else -np.inf
        s = float(np.exp(clipped).sum())
        return float(np.log(s)) if s > 0 else -np.inf


def update_active_su(i: int, b: int, ms: MessageSet, fg: FactorGraph,
                     inst: ProblemInstance, model: str, cfg: BpConfig) -> np.ndarray:
    """Computed PU->SU message (undamped); dispatches on the model."""
    _check_model(model)
    grp = fg.pu_order_desc[fg.pu_ptr[b]:fg.pu_ptr[b + 1]]
    f = fg.active_edge(i, b)
    k = int(np.nonzero(grp == f)[0][0])
    if model == "A":
        if len(grp) - 1 > cfg.d_max:
            raise DegreeTooHighError(
                f"active PU {b} has {len(grp)} neighbors; enumeration capped at d_max={cfg.d_max}"
            )
        w = np.maximum(ms.su_act[grp], TINY)
        rows = budget_messages(fg.act_g[grp], w[:, 0], w[:, 1], float(inst.budget[b]))
        return rows[k]
    q = log_ratio(ms.su_act[grp])
    g = fg.act_g[grp]
    gamma = _pair_scale(cfg) * cfg.beta * g[k] * g / float(inst.budget[b])
    terms = np.logaddexp(q - gamma, 0.0) - np.logaddexp(q, 0.0)
    terms[k] = 0.0
    return normalize_from_logs(np.array([0.0]), np.array([float(terms.sum())]))[0]


def _effective_priority_one(fg: FactorGraph, inst: ProblemInstance, i: int,
                            model: str, cfg: BpConfig) -> float:
    ce = float(inst.priority[i])
    if model == "B" and cfg.include_diagonal:
        lo, hi = fg.su_act_ptr[i], fg.su_act_ptr[i + 1]
        g = fg.act_g[lo:hi]
        ce -= float((g * g / inst.budget[fg.act_pu[lo:hi]]).sum())
    return ce


# ---------------------------------------------------------------------------
# vectorized synchronous sweep
# ---------------------------------------------------------------------------

def _sweep(ms: MessageSet, fg: FactorGraph, inst: ProblemInstance, model: str,
           cfg: BpConfig, ce: np.ndarray) -> MessageSet:
    """All four families recomputed from the current state (no damping)."""
    beta = cfg.beta
    e_ch, e_act = fg.n_channel_edges, fg.n_active_edges

    lr_b = log_ratio(ms.ch_su) if e_ch else np.empty(0)
    lr_d = log_ratio(ms.act_su) if e_act else np.empty(0)
    exp_b = np.exp(np.minimum(lr_b, 700.0))
    expb_full, expb_loo = group_full_and_loo(exp_b, fg.su_ch_ptr)
    lrd_full, lrd_loo = group_full_and_loo(lr_d, fg.su_act_ptr)

    # SU -> channel
    if e_ch:
        on_logit = beta * ce[fg.ch_su] + lrd_full[fg.ch_su]
        with np.errstate(divide="ignore"):
            log0 = np.logaddexp(0.0, on_logit + np.log(expb_loo))
        new_su_ch = normalize_from_logs(log0, on_logit)
    else:
        new_su_ch = ms.su_ch.copy()

    # channel -> SU
    if e_ch:
        lr_a = log_ratio(ms.su_ch)
        exp_a = np.exp(np.minimum(lr_a, 700.0))
        _, loo_grouped = group_full_and_loo(exp_a[fg.ch_order], fg.ch_ptr)
        t_minus = np.empty(e_ch)
        t_minus[fg.ch_order] = loo_grouped
        with np.errstate(divide="ignore"):
            log0 = np.log(t_minus) if cfg.exact_one_channel else np.log1p(t_minus)
        new_ch_su = normalize_from_logs(log0, np.zeros(e_ch))
    else:
        new_ch_su = ms.ch_su.copy()

    # SU -> active PU
    if e_act:
        avail = _availability_per_su(exp_b, lr_b, fg, cfg)
        log1 = beta * ce[fg.act_su] + lrd_loo + avail[fg.act_su]
        new_su_act = normalize_from_logs(np.zeros(e_act), log1)
        no_channel = np.diff(fg.su_ch_ptr) == 0
        pinned = no_channel[fg.act_su]
        new_su_act[pinned, 0] = 1.0
        new_su_act[pinned, 1] = 0.0
    else:
        new_su_act = ms.su_act.copy()

    # active PU -> SU
    if e_act:
        new_act_su = np.empty_like(ms.act_su)
        lr_c = log_ratio(ms.su_act)
        scale = _pair_scale(cfg)
        for b in range(fg.n_active):
            grp = fg.pu_order_desc[fg.pu_ptr[b]:fg.pu_ptr[b + 1]]
            if len(grp) == 0:
                continue
            if model == "A":
                w = np.maximum(ms.su_act[grp], TINY)
                new_act_su[grp] = budget_messages(fg.act_g[grp], w[:, 0].copy(),
                                                  w[:, 1].copy(), float(inst.budget[b]))
            else:
                g = fg.act_g[grp]
                q = lr_c[grp]
                gamma = (scale * beta / float(inst.budget[b])) * np.outer(g, g)
                terms = np.logaddexp(q[None, :] - gamma, 0.0) - np.logaddexp(q, 0.0)[None, :]
                np.fill_diagonal(terms, 0.0)
                new_act_su[grp] = normalize_from_logs(np.zeros(len(grp)), terms.sum(axis=1))
    else:
        new_act_su = ms.act_su.copy()

    return MessageSet(su_ch=new_su_ch, ch_su=new_ch_su, su_act=new_su_act, act_su=new_act_su)


def _availability_per_su(exp_b: np.ndarray, lr_b: np.ndarray, fg: FactorGraph,
                         cfg: BpConfig) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore"):
        if cfg.unconstrained_activity_sum:
            totals, _ = group_full_and_loo(np.log1p(exp_b), fg.su_ch_ptr)
            totals = np.minimum(totals, 700.0)
            out = np.full(fg.n_su, -np.inf)
            pos = totals > 0
            out[pos] = np.log(np.expm1(totals[pos]))
            return out
        full, _ = group_full_and_loo(exp_b, fg.su_ch_ptr)
        return np.where(full > 0, np.log(np.maximum(full, TINY)), -np.inf)


# ---------------------------------------------------------------------------
# iteration driver
# ---------------------------------------------------------------------------

@dataclass
class BpResult:
    converged: bool
    iterations: int
    residual: float
    marginals: np.ndarray          # P(SU active), per SU
    link_beliefs: np.ndarray       # (n_channel_edges, 2) link-variable beliefs
    belief_log_ratio: np.ndarray   # log b(1)/b(0) per channel edge
    assignment: Assignment
    utility_term: float
    interference_term: float
    cost: float
    extras: dict = field(default_factory=dict)


def iterate(fg: FactorGraph, inst: ProblemInstance, model: str = "A",
            cfg: BpConfig | None = None) -> BpResult:
    """Run damped message sweeps until the state settles, then round.

    Non-convergence inside max_iter is not an error: the result flags it
    and the last state is rounded anyway.
    """
    cfg = cfg or BpConfig()
    cfg.validate()
    _check_model(model)
    if cfg.beta > FULL_MESSAGE_BETA_CAP:
        raise ValueError(
            f"beta={cfg.beta} exceeds the probability-pair cap {FULL_MESSAGE_BETA_CAP}; "
            "use the log-ratio solver (bp_field) for large beta"
        )
    if model == "A" and fg.n_active_edges:
        worst = int(np.diff(fg.pu_ptr).max())
        if worst - 1 > cfg.d_max:
            raise DegreeTooHighError(
                f"largest active-PU degree {worst} exceeds d_max={cfg.d_max}+1"
            )
    ce = effective_priority(fg, inst, model, cfg)
    ms = init_messages(fg)
    pinned = (np.diff(fg.su_ch_ptr) == 0)[fg.act_su] if fg.n_active_edges else None

    converged = fg.n_channel_edges + fg.n_active_edges == 0
    residual = 0.0
    iterations = 0
    if cfg.schedule == "synchronous":
        lam = cfg.damping
        for iterations in range(1, cfg.max_iter + 1):
            new = _sweep(ms, fg, inst, model, cfg, ce)
            residual = 0.0
            for name in ("su_ch", "ch_su", "su_act", "act_su"):
                old = getattr(ms, name)
                if not len(old):
                    continue
                computed = getattr(new, name)
                blended = lam * old + (1.0 - lam) * computed
                if name == "su_act" and pinned is not None and pinned.any():
                    blended[pinned] = computed[pinned]  # structural pins skip damping
                residual = max(residual, float(np.abs(blended - old).max()))
                setattr(ms, name, blended)
            if residual < cfg.tol:
                converged = True
                break
    else:
        converged, iterations, residual = _iterate_sequential(ms, fg, inst, model, cfg)

    return _finalize(ms, fg, inst, model, cfg, ce, converged, iterations, residual)


def _iterate_sequential(ms: MessageSet, fg: FactorGraph, inst: ProblemInstance,
                        model: str, cfg: BpConfig):
    """One message at a time, fresh random order per sweep."""
    rng = np.random.default_rng(cfg.seed)
    e_ch, e_act = fg.n_channel_edges, fg.n_active_edges
    n_msgs = 2 * e_ch + 2 * e_act
    lam = cfg.damping
    arrays = {0: "su_ch", 1: "ch_su", 2: "su_act", 3: "act_su"}
    updaters = {0: update_su_channel, 1: update_channel_su,
                2: update_su_active, 3: update_active_su}
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
            computed = updaters[fam](i, a, ms, fg, inst, model, cfg)
            target = getattr(ms, arrays[fam])
            structural_pin = fam == 2 and fg.su_ch_ptr[i] == fg.su_ch_ptr[i + 1]
            blended = computed if structural_pin else lam * target[e] + (1.0 - lam) * computed
            residual = max(residual, float(np.abs(blended - target[e]).max()))
            target[e] = blended
        if residual < cfg.tol:
            converged = True
            break
    return converged, it, residual


def _finalize(ms: MessageSet, fg: FactorGraph, inst: ProblemInstance, model: str,
              cfg: BpConfig, ce: np.ndarray, converged: bool, iterations: int,
              residual: float) -> BpResult:
    e_ch = fg.n_channel_edges
    if e_ch:
        lr = log_ratio(ms.su_ch) + log_ratio(ms.ch_su)
        link_beliefs = normalize_from_logs(np.zeros(e_ch), lr)
    else:
        lr = np.empty(0)
        link_beliefs = np.empty((0, 2))

    lr_b = log_ratio(ms.ch_su) if e_ch else np.empty(0)
    exp_b = np.exp(np.minimum(lr_b, 700.0))
    avail = _availability_per_su(exp_b, lr_b, fg, cfg)
    lr_d = log_ratio(ms.act_su) if fg.n_active_edges else np.empty(0)
    ld_full, _ = group_full_and_loo(lr_d, fg.su_act_ptr)
    with np.errstate(over="ignore"):
        logit = cfg.beta * ce + ld_full + avail
        marginals = 1.0 / (1.0 + np.exp(-np.clip(logit, -745.0, 745.0)))
    marginals[np.isneginf(logit)] = 0.0

    assign = round_to_assignment(fg, inst, lr, model, marginals)
    util = cost_model_a(assign, inst)
    breakdown = cost_model_b(assign, inst)
    cost = util if model == "A" else breakdown.total
    return BpResult(converged=converged, iterations=iterations, residual=residual,
                    marginals=marginals, link_beliefs=link_beliefs, belief_log_ratio=lr,
                    assignment=assign, utility_term=util,
                    interference_term=breakdown.interference_term, cost=cost)


# ---------------------------------------------------------------------------
# rounding
# ---------------------------------------------------------------------------

def round_to_assignment(fg: FactorGraph, inst: ProblemInstance,
                        belief_log_ratio: np.ndarray, model: str,
                        marginals: np.ndarray | None = None) -> Assignment:
    """Greedy rounding of link beliefs into a feasible assignment.

    Edges are visited by descending belief ratio (ties by SU then channel)
    and accepted while the matching holds, the belief favors connection,
    and, for Model A, every budget still fits.  Model A then augments with
    any remaining feasible edges by descending priority: connecting is
    always beneficial under hard budgets, so the output is maximal.

    For Model B the link phase alone discards users whose belief mass is
    split over near-tied channels (each link ratio can sit below 1 even
    when the activity marginal is close to 1), so when activity marginals
    are supplied, the remaining users are visited in descending-marginal
    order and attached to their best remaining channel — but only while
    that strictly lowers the evaluated cost, which also makes the output
    maximal with respect to single profitable additions.
    """
    _check_model(model)
    su_used = np.zeros(fg.n_su, dtype=bool)
    ch_used = np.zeros(fg.n_free, dtype=bool)
    load = np.zeros(fg.n_active)
    chosen: list[tuple[int, int]] = []

    def pu_edges(i: int):
        lo, hi = fg.su_act_ptr[i], fg.su_act_ptr[i + 1]
        return fg.act_pu[lo:hi], fg.act_g[lo:hi]

    def try_edge(e: int, require_positive: bool) -> None:
        i, a = int(fg.ch_su[e]), int(fg.ch_ch[e])
        if su_used[i] or ch_used[a]:
            return
        if require_positive and not belief_log_ratio[e] > 0.0:
            return
        pus, gs = pu_edges(i)
        if model == "A":
            if np.any(load[pus] + gs > inst.budget[pus]):
                return
        su_used[i] = True
        ch_used[a] = True
        load[pus] += gs
        chosen.append((i, a))

    if fg.n_channel_edges:
        order = np.lexsort((fg.ch_ch, fg.ch_su, -belief_log_ratio))
        for e in order:
            try_edge(int(e), require_positive=True)
        # with no interference edges the two objectives coincide and the
        # budget checks are vacuous, so Model B shares the augmentation pass
        if model == "A" or fg.n_active_edges == 0:
            order2 = np.lexsort((fg.ch_ch, fg.ch_su, -inst.priority[fg.ch_su]))
            for e in order2:
                try_edge(int(e), require_positive=False)
        elif marginals is not None:
            for i in np.lexsort((np.arange(fg.n_su), -marginals)):
                if su_used[i]:
                    continue
                pus, gs = pu_edges(int(i))
                # marginal cost of switching this user on given current loads
                delta = float(-inst.priority[i]
                              + ((2.0 * load[pus] + gs) * gs / inst.budget[pus]).sum())
                if delta >= 0.0:
                    continue
                lo, hi = fg.su_ch_ptr[i], fg.su_ch_ptr[i + 1]
                for e in sorted(range(lo, hi),
                                key=lambda e: (-belief_log_ratio[e], fg.ch_ch[e])):
                    if not ch_used[fg.ch_ch[e]]:
                        try_edge(int(e), require_positive=False)
                        break
    return Assignment.from_pairs(chosen, inst)
