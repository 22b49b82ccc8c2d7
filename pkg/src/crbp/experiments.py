"""Seeded experiment sweeps producing deterministic CSV tables.

A sweep is a grid over (realization, n_active, beta, solver).  Every
random draw uses a seed derived from the master seed and the cell
coordinates via SeedSequence, never a shared stream, so cells can run
in any order (or in parallel processes) without changing a single byte
of the output CSV.  Wall-clock timings are real measurements and land
in a separate sidecar file that is exempt from the determinism
guarantee.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import greedy_model_a, greedy_model_b
from .bp_field import iterate_field
from .bp_full import BpConfig, iterate
from .factorgraph import build_factor_graph
from .model import ProblemInstance, cost_model_b
from .oracle import solve_exact
from .scenario import (ScenarioParams, default_params, derive_instance,
                       generate_network, sample_active_set)

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "SummaryRow",
    "preset",
    "PRESETS",
    "run_experiment",
    "run_sweep_active",
    "run_beta_sweep",
    "summarize",
    "serialize_results",
    "serialize_summary",
    "load_results",
]

_ACTIVE_GRID = tuple(range(5, 50, 5))
_BETA_GRID = (0.5, 1.0, 2.0, 5.0, 10.0)


@dataclass
class ExperimentConfig:
    kind: str = "custom"
    params: ScenarioParams = field(default_factory=default_params)
    model: str = "A"
    solvers: tuple[str, ...] = ("bp-full", "greedy")
    beta_grid: tuple[float, ...] = (10.0,)
    n_active_grid: tuple[int, ...] = _ACTIVE_GRID
    n_realizations: int = 10
    master_seed: int = 0
    damping: float = 0.5
    max_iter: int = 2000
    tol: float = 1e-7

    def validate(self) -> None:
        if self.model not in ("A", "B"):
            raise ValueError("model must be 'A' or 'B'")
        known = {"bp-full", "bp-field", "greedy", "oracle"}
        bad = set(self.solvers) - known
        if bad:
            raise ValueError(f"unknown solvers: {sorted(bad)}")
        if not self.solvers or not self.beta_grid or not self.n_active_grid:
            raise ValueError("solver list and grids must be non-empty")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if any(n < 0 or n > self.params.n_pu for n in self.n_active_grid):
            raise ValueError("n_active values must lie in [0, n_pu]")
        self.params.validate()


PRESETS = ("sweep-active-a", "beta-sweep-a", "sweep-active-b", "beta-sweep-b")


def preset(kind: str, master_seed: int = 0,
           params: ScenarioParams | None = None, **overrides) -> ExperimentConfig:
    """Named default sweeps at the reference scale (100 SUs, 50 PUs,
    10 realizations)."""
    base = params if params is not None else default_params()
    table = {
        "sweep-active-a": dict(model="A", solvers=("bp-full", "greedy"),
                               beta_grid=(10.0,), n_active_grid=_ACTIVE_GRID),
        "beta-sweep-a": dict(model="A", solvers=("bp-full",),
                             beta_grid=_BETA_GRID, n_active_grid=(25,)),
        "sweep-active-b": dict(model="B", solvers=("bp-field", "greedy"),
                               beta_grid=(10.0,), n_active_grid=_ACTIVE_GRID),
        "beta-sweep-b": dict(model="B", solvers=("bp-field",),
                             beta_grid=_BETA_GRID, n_active_grid=(5,)),
    }
    if kind not in table:
        raise ValueError(f"unknown preset {kind!r}; choose from {PRESETS}")
    kw = dict(table[kind])
    kw.update(overrides)
    cfg = ExperimentConfig(kind=kind, params=base, master_seed=master_seed, **kw)
    cfg.validate()
    return cfg


@dataclass
class ResultRow:
    experiment: str
    model: str
    solver: str
    beta: float
    n_active: int
    realization: int
    seed: int
    n_connected: int
    cost: float
    utility_term: float
    interference_term: float
    iterations: int
    converged: bool
    error: str = ""
    wall_ms: float = 0.0


def derived_seed(*parts: int) -> int:
    """Independent child seed for a grid cell (stable across processes)."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# single-cell execution
# ---------------------------------------------------------------------------

def _solve_instance(inst: ProblemInstance, solver: str, model: str, beta: float,
                    cfg: ExperimentConfig, seed: int):
    """(n_connected, cost, utility, interference, iterations, converged)."""
    fg = build_factor_graph(inst)
    if solver in ("bp-full", "bp-field"):
        bp_cfg = BpConfig(beta=beta, damping=cfg.damping, max_iter=cfg.max_iter,
                          tol=cfg.tol, seed=seed)
        res = (iterate(fg, inst, model, bp_cfg) if solver == "bp-full"
               else iterate_field(fg, inst, model, bp_cfg))
        n_conn = int(res.assignment.active.sum())
        return (n_conn, res.cost, res.utility_term, res.interference_term,
                res.iterations, res.converged)
    if solver == "greedy":
        assign, trace = (greedy_model_a(inst) if model == "A"
                         else greedy_model_b(inst))
        breakdown = cost_model_b(assign, inst)
        util = -float((inst.priority * assign.active).sum())
        cost = util if model == "A" else breakdown.total
        inter = 0.0 if model == "A" else breakdown.interference_term
        return int(assign.active.sum()), cost, util, inter, 0, True
    if solver == "oracle":
        sol = solve_exact(inst, model)
        assign = sol.assignment
        breakdown = cost_model_b(assign, inst)
        util = -float((inst.priority * assign.active).sum())
        inter = 0.0 if model == "A" else breakdown.interference_term
        return int(assign.active.sum()), sol.cost, util, inter, 0, True
    raise ValueError(f"unknown solver {solver!r}")


def _run_cell(cfg: ExperimentConfig, realization: int, n_active: int) -> list[ResultRow]:
    """All (beta, solver) rows for one network realization and active set."""
    net_seed = derived_seed(cfg.master_seed, realization)
    net = generate_network(replace(cfg.params, seed=net_seed))
    act_seed = derived_seed(cfg.master_seed, realization, n_active)
    active = sample_active_set(cfg.params.n_pu, n_active, act_seed)
    inst = derive_instance(net, active)
    rows = []
    for beta in cfg.beta_grid:
        for solver in cfg.solvers:
            t0 = time.perf_counter()
            try:
                (n_conn, cost, util, inter,
                 iters, conv) = _solve_instance(inst, solver, cfg.model, beta,
                                                cfg, act_seed)
                err = ""
            except Exception as exc:  # recorded per-row, sweep continues
                n_conn, cost, util, inter, iters, conv = 0, 0.0, 0.0, 0.0, 0, False
                err = f"{type(exc).__name__}: {exc}"
            wall = (time.perf_counter() - t0) * 1e3
            rows.append(ResultRow(
                experiment=cfg.kind, model=cfg.model, solver=solver, beta=beta,
                n_active=n_active, realization=realization, seed=act_seed,
                n_connected=n_conn, cost=cost, utility_term=util,
                interference_term=inter, iterations=iters, converged=conv,
                error=err, wall_ms=wall))
    return rows


def run_experiment(cfg: ExperimentConfig, parallel: int | None = None) -> list[ResultRow]:
    """Run every cell of the grid; rows come back in canonical order
    regardless of execution order."""
    cfg.validate()
    cells = [(r, n) for r in range(cfg.n_realizations) for n in cfg.n_active_grid]
    if parallel and parallel > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            chunks = list(pool.map(_run_cell, [cfg] * len(cells),
                                   [c[0] for c in cells], [c[1] for c in cells]))
    else:
        chunks = [_run_cell(cfg, r, n) for r, n in cells]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r.solver, r.beta, r.n_active, r.realization))
    return rows


def run_sweep_active(cfg: ExperimentConfig, parallel: int | None = None) -> list[ResultRow]:
    return run_experiment(cfg, parallel)


def run_beta_sweep(cfg: ExperimentConfig, parallel: int | None = None) -> list[ResultRow]:
    if len(cfg.n_active_grid) != 1:
        raise ValueError("a beta sweep fixes a single n_active")
    return run_experiment(cfg, parallel)


# ---------------------------------------------------------------------------
# aggregation and serialization
# ---------------------------------------------------------------------------

@dataclass
class SummaryRow:
    solver: str
    model: str
    beta: float
    n_active: int
    n_ok: int
    n_errors: int
    mean_connected: float
    stderr_connected: float
    mean_cost: float
    stderr_cost: float
    mean_interference: float
    stderr_interference: float


def _mean_stderr(vals: list[float]) -> tuple[float, float]:
    arr = np.asarray(vals, dtype=float)
    if len(arr) == 0:
        return float("nan"), float("nan")
    se = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), se


def summarize(rows: list[ResultRow]) -> list[SummaryRow]:
    """Per-(solver, beta, n_active) means and standard errors; rows with
    a recorded error are counted but excluded from the averages."""
    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.solver, row.beta, row.n_active), []).append(row)
    out = []
    for (solver, beta, n_active), grp in sorted(groups.items()):
        ok = [r for r in grp if not r.error]
        mc, sc = _mean_stderr([r.n_connected for r in ok])
        mcost, scost = _mean_stderr([r.cost for r in ok])
        mi, si = _mean_stderr([r.interference_term for r in ok])
        out.append(SummaryRow(solver=solver, model=grp[0].model, beta=beta,
                              n_active=n_active, n_ok=len(ok),
                              n_errors=len(grp) - len(ok),
                              mean_connected=mc, stderr_connected=sc,
                              mean_cost=mcost, stderr_cost=scost,
                              mean_interference=mi, stderr_interference=si))
    return out


_HEADER = ["experiment", "model", "solver", "beta", "n_active", "realization",
           "seed", "n_connected", "cost", "utility_term", "interference_term",
           "iterations", "converged", "error"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def serialize_results(rows: list[ResultRow], path, timings_path=None) -> None:
    """Deterministic CSV (no timings) plus an optional timing sidecar."""
    ordered = sorted(rows, key=lambda r: (r.solver, r.beta, r.n_active, r.realization))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_HEADER)
        for r in ordered:
            w.writerow([r.experiment, r.model, r.solver, _fmt(r.beta),
                        r.n_active, r.realization, r.seed, r.n_connected,
                        _fmt(r.cost), _fmt(r.utility_term),
                        _fmt(r.interference_term), r.iterations,
                        int(r.converged), r.error])
    if timings_path is not None:
        with open(timings_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["solver", "beta", "n_active", "realization", "wall_ms"])
            for r in ordered:
                w.writerow([r.solver, _fmt(r.beta), r.n_active, r.realization,
                            _fmt(r.wall_ms)])


def serialize_summary(summary: list[SummaryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solver", "model", "beta", "n_active", "n_ok", "n_errors",
                    "mean_connected", "stderr_connected", "mean_cost",
                    "stderr_cost", "mean_interference", "stderr_interference"])
        for s in summary:
            w.writerow([s.solver, s.model, _fmt(s.beta), s.n_active, s.n_ok,
                        s.n_errors, _fmt(s.mean_connected),
                        _fmt(s.stderr_connected), _fmt(s.mean_cost),
                        _fmt(s.stderr_cost), _fmt(s.mean_interference),
                        _fmt(s.stderr_interference)])


def load_results(path) -> list[ResultRow]:
    """Inverse of serialize_results (timings are not recoverable)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ResultRow(
                experiment=rec["experiment"], model=rec["model"],
                solver=rec["solver"], beta=float(rec["beta"]),
                n_active=int(rec["n_active"]), realization=int(rec["realization"]),
                seed=int(rec["seed"]), n_connected=int(rec["n_connected"]),
                cost=float(rec["cost"]), utility_term=float(rec["utility_term"]),
                interference_term=float(rec["interference_term"]),
                iterations=int(rec["iterations"]),
                converged=bool(int(rec["converged"])), error=rec["error"]))
    return rows
