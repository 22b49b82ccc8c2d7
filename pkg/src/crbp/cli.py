"""Command-line entry points.

Subcommands:
  generate    draw a network, sample an active set, write an instance file
  solve       run one solver on an instance file
  oracle      exact optimum of an instance file
  experiment  run a preset or configured sweep, write CSV tables
  calibrate   fit scenario thresholds to degree targets
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .baselines import greedy_model_a, greedy_model_b
from .bp_field import iterate_field
from .bp_full import BpConfig, iterate
from .experiments import (ExperimentConfig, PRESETS, preset, run_experiment,
                          serialize_results, serialize_summary, summarize)
from .factorgraph import build_factor_graph
from .model import instance_from_json, instance_to_json
from .oracle import solve_exact
from .scenario import (ScenarioParams, calibrate, default_params,
                       derive_instance, generate_network, network_to_json,
                       sample_active_set)


def _add_bp_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--schedule", choices=["synchronous", "random-sequential"],
                   default="synchronous")
    p.add_argument("--d-max", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-include-diagonal", action="store_true")
    p.add_argument("--exact-one-channel", action="store_true")
    p.add_argument("--unconstrained-activity-sum", action="store_true")
    p.add_argument("--halved-cross-terms", action="store_true")
    p.add_argument("--alt-field-convention", action="store_true")


def _bp_config(args: argparse.Namespace) -> BpConfig:
    return BpConfig(beta=args.beta, damping=args.damping, max_iter=args.max_iter,
                    tol=args.tol, schedule=args.schedule, d_max=args.d_max,
                    include_diagonal=not args.no_include_diagonal, seed=args.seed,
                    exact_one_channel=args.exact_one_channel,
                    unconstrained_activity_sum=args.unconstrained_activity_sum,
                    halved_cross_terms=args.halved_cross_terms,
                    alt_field_convention=args.alt_field_convention)


def _cmd_generate(args: argparse.Namespace) -> int:
    params = default_params()
    if args.params:
        doc = json.loads(Path(args.params).read_text())
        params = ScenarioParams(**doc.get("params", doc))
    params = replace(params, seed=args.seed)
    net = generate_network(params)
    active = sample_active_set(params.n_pu, args.n_active,
                               args.active_seed if args.active_seed is not None
                               else args.seed)
    inst = derive_instance(net, active)
    Path(args.out).write_text(instance_to_json(inst))
    if args.network_out:
        Path(args.network_out).write_text(network_to_json(net))
    print(f"wrote {args.out}: {inst.n_su} SUs, {inst.n_free} free channels, "
          f"{inst.n_active} active PUs")
    return 0


def _cmd_solve(args: argparse.Namespace) -> int:
    inst = instance_from_json(Path(args.instance).read_text())
    if args.solver in ("bp-full", "bp-field"):
        fg = build_factor_graph(inst)
        cfg = _bp_config(args)
        res = (iterate(fg, inst, args.model, cfg) if args.solver == "bp-full"
               else iterate_field(fg, inst, args.model, cfg))
        payload = {
            "solver": args.solver, "model": args.model,
            "converged": res.converged, "iterations": res.iterations,
            "residual": res.residual, "cost": res.cost,
            "utility_term": res.utility_term,
            "interference_term": res.interference_term,
            "n_connected": int(res.assignment.active.sum()),
            "links": res.assignment.pairs(),
        }
    elif args.solver == "greedy":
        assign, trace = (greedy_model_a(inst) if args.model == "A"
                         else greedy_model_b(inst))
        payload = {
            "solver": "greedy", "model": args.model, "cost": trace.cost,
            "n_connected": int(assign.active.sum()), "links": assign.pairs(),
        }
        if args.trace:
            payload["trace"] = json.loads(trace.to_json())
    else:
        sol = solve_exact(inst, args.model)
        payload = {
            "solver": "oracle", "model": args.model, "cost": sol.cost,
            "n_connected": int(sol.assignment.active.sum()),
            "links": sol.assignment.pairs(), "n_evaluated": sol.n_evaluated,
        }
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        for key, val in payload.items():
            print(f"{key}: {val}")
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    inst = instance_from_json(Path(args.instance).read_text())
    sol = solve_exact(inst, args.model)
    print(f"cost: {sol.cost:.12g}")
    print(f"links: {sol.assignment.pairs()}")
    print(f"states evaluated: {sol.n_evaluated}")
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        params = default_params()
        if "params" in raw:
            params = replace(params, **raw.pop("params"))
        for key in ("solvers", "beta_grid", "n_active_grid"):
            if key in raw:
                raw[key] = tuple(raw[key])
        cfg = ExperimentConfig(params=params, **raw)
    else:
        cfg = preset(args.preset,
                     master_seed=0 if args.master_seed is None else args.master_seed)
    if args.master_seed is not None:
        cfg.master_seed = args.master_seed
    cfg.validate()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = run_experiment(cfg, parallel=args.parallel)
    serialize_results(rows, out_dir / "results.csv",
                      timings_path=out_dir / "timings.csv")
    serialize_summary(summarize(rows), out_dir / "summary.csv")
    n_err = sum(1 for r in rows if r.error)
    print(f"{cfg.kind}: {len(rows)} rows ({n_err} errors) -> {out_dir}")
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    params, diag = calibrate(
        n_su=args.n_su, n_pu=args.n_pu,
        target_access_degree=args.target_access_degree,
        target_interference_degree=args.target_interference_degree,
        cutoff_fraction=args.cutoff_fraction, theta=args.theta,
        n_seeds=args.n_seeds, base_seed=args.base_seed)
    doc = {"params": asdict(params), "diagnostics": diag}
    print(json.dumps(doc, indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crbp",
                                 description="Channel scheduling by message passing")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance file")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--active-seed", type=int, default=None,
                   help="seed for the active-set draw (defaults to --seed)")
    g.add_argument("--n-active", type=int, required=True)
    g.add_argument("--params", help="JSON file of scenario parameters")
    g.add_argument("--out", required=True)
    g.add_argument("--network-out", help="also dump the raw network")
    g.set_defaults(func=_cmd_generate)

    s = sub.add_parser("solve", help="run one solver on an instance file")
    s.add_argument("instance")
    s.add_argument("--solver", choices=["bp-full", "bp-field", "greedy", "oracle"],
                   default="bp-full")
    s.add_argument("--model", choices=["A", "B"], default="A")
    s.add_argument("--json", action="store_true", help="machine-readable output")
    s.add_argument("--trace", action="store_true",
                   help="include the greedy decision trace")
    _add_bp_flags(s)
    s.set_defaults(func=_cmd_solve)

    o = sub.add_parser("oracle", help="exact optimum by enumeration")
    o.add_argument("instance")
    o.add_argument("--model", choices=["A", "B"], default="A")
    o.set_defaults(func=_cmd_oracle)

    e = sub.add_parser("experiment", help="run a sweep and write CSV tables")
    e.add_argument("--preset", choices=list(PRESETS), default="sweep-active-a")
    e.add_argument("--config", help="JSON file mirroring ExperimentConfig")
    e.add_argument("--master-seed", type=int, default=None)
    e.add_argument("--out-dir", default="results")
    e.add_argument("--parallel", type=int, default=None,
                   help="worker processes (default: serial)")
    e.set_defaults(func=_cmd_experiment)

    c = sub.add_parser("calibrate", help="fit scenario thresholds to degree targets")
    c.add_argument("--n-su", type=int, default=100)
    c.add_argument("--n-pu", type=int, default=50)
    c.add_argument("--target-access-degree", type=float, default=6.0)
    c.add_argument("--target-interference-degree", type=float, default=10.0)
    c.add_argument("--cutoff-fraction", type=float, default=0.2)
    c.add_argument("--theta", type=float, default=1.0)
    c.add_argument("--n-seeds", type=int, default=20)
    c.add_argument("--base-seed", type=int, default=20240)
    c.add_argument("--out", help="write calibrated parameters to this file")
    c.set_defaults(func=_cmd_calibrate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
