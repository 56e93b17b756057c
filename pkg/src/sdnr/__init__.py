"""Stochastic distribution network reconfiguration by successive branch reduction."""

from __future__ import annotations

from .casefile import CaseDocument, load_bundled, parse_case
from .distflow import (PowerFlowSolution, SolverConfig, StochasticSolution, loop_injections,
                       soc_exactness_residual, solve_opf_r, solve_sopf_r)
from .loops import Loop, SubPath, divide_into_subpaths, find_loops, update_loop_after_opening
from .network import Branch, Bus, Network, SwitchConfiguration, is_radial, merge_substations
from .oracle import exhaustive_oracle
from .sbr import (CandidateEvaluation, ReconfigurationResult, baseline_one_stage,
                  baseline_two_stage, candidate_set, one_stage_sbr, two_stage_sbr)
from .scenarios import (ScenarioSet, TimeSeriesTable, build_scenarios, ingest_csv,
                        reduce_kmedoids, synthetic_profiles)
from .trees import count_spanning_trees, enumerate_spanning_trees

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "Bus",
    "CandidateEvaluation",
    "CaseDocument",
    "Loop",
    "Network",
    "PowerFlowSolution",
    "ReconfigurationResult",
    "ScenarioSet",
    "SolverConfig",
    "StochasticSolution",
    "SubPath",
    "SwitchConfiguration",
    "TimeSeriesTable",
    "baseline_one_stage",
    "baseline_two_stage",
    "build_scenarios",
    "candidate_set",
    "count_spanning_trees",
    "divide_into_subpaths",
    "enumerate_spanning_trees",
    "exhaustive_oracle",
    "find_loops",
    "ingest_csv",
    "is_radial",
    "load_bundled",
    "loop_injections",
    "merge_substations",
    "one_stage_sbr",
    "parse_case",
    "reduce_kmedoids",
    "soc_exactness_residual",
    "solve_opf_r",
    "solve_sopf_r",
    "synthetic_profiles",
    "two_stage_sbr",
    "update_loop_after_opening",
]
