"""Message-passing schedulers for secondary users on idle radio channels.

The package models a cognitive radio cell: secondary users opportunistically
connect to channels whose primary owners are idle, either under hard
interference budgets at the active primaries (model "A") or under a soft
quadratic interference penalty (model "B").  Solvers: sum-product belief
propagation in probability space (`bp_full`), its log-ratio form for low
temperatures (`bp_field`), greedy baselines, and exact enumeration oracles
for validation.
"""

from .model import (Assignment, CostBreakdown, ProblemInstance,
                    activity_from_links, cost_model_a, cost_model_b,
                    instance_from_json, instance_to_json, interference_load,
                    is_feasible_model_a, is_matching)
from .scenario import (NetworkRealization, ScenarioParams, calibrate,
                       default_params, derive_instance, generate_network,
                       sample_active_set)
from .factorgraph import FactorGraph, build_factor_graph, degree_stats, is_acyclic
from .bp_full import BpConfig, BpResult, DegreeTooHighError, iterate, round_to_assignment
from .bp_field import FieldMessages, iterate_field
from .baselines import GreedyTrace, greedy_model_a, greedy_model_b
from .oracle import (BoltzmannTable, ExactSolution, SearchSpaceTooLargeError,
                     boltzmann_marginals, solve_exact)
from .experiments import (ExperimentConfig, ResultRow, SummaryRow, preset,
                          run_beta_sweep, run_experiment, run_sweep_active,
                          serialize_results, serialize_summary, summarize)

__version__ = "0.1.0"

__all__ = [
    "Assignment", "CostBreakdown", "ProblemInstance", "activity_from_links",
    "cost_model_a", "cost_model_b", "instance_from_json", "instance_to_json",
    "interference_load", "is_feasible_model_a", "is_matching",
    "NetworkRealization", "ScenarioParams", "calibrate", "default_params",
    "derive_instance", "generate_network", "sample_active_set",
    "FactorGraph", "build_factor_graph", "degree_stats", "is_acyclic",
    "BpConfig", "BpResult", "DegreeTooHighError", "iterate", "round_to_assignment",
    "FieldMessages", "iterate_field",
    "GreedyTrace", "greedy_model_a", "greedy_model_b",
    "BoltzmannTable", "ExactSolution", "SearchSpaceTooLargeError",
    "boltzmann_marginals", "solve_exact",
    "ExperimentConfig", "ResultRow", "SummaryRow", "preset", "run_beta_sweep",
    "run_experiment", "run_sweep_active", "serialize_results",
    "serialize_summary", "summarize",
    "__version__",
]
