"""Successive branch reduction for stochastic reconfiguration.

``one_stage_sbr`` opens the best branch of a network with one redundant
branch, searching a small candidate set built from expected flows on the
loop's sub-paths. ``two_stage_sbr`` handles several loops with a greedy
opening stage followed by a close-and-open stage that reruns the one-stage
search once per loop. The ``baseline_*`` functions are the same searches
without sub-path division and without close-and-open, respectively.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .distflow import SolverConfig, StochasticSolution, loop_injections, solve_sopf_r
from .errors import AlgorithmFailure, PreconditionError, ScenarioSolveError
from .loops import Loop, SubPath, divide_into_subpaths, find_loops, update_loop_after_opening
from .network import Network, SwitchConfiguration, is_connected, is_radial
from .scenarios import ScenarioSet

MIN_FLOW = "min-flow"
DOWNSTREAM = "downstream"
UPSTREAM = "upstream"
TIE_RTOL = 1e-12
# expected flows this small are round-off and count as zero
ZERO_FLOW = 1e-10


@dataclass(frozen=True)
class CandidateEvaluation:
    branch: int
    objective: float  # expected substation supply; inf when infeasible
    expected_loss: float
    subpath: int | None
    reason: str
    stage: str = ""
    feasible: bool = True
    note: str = ""


@dataclass
class OneStageResult:
    branch: int
    objective: float
    expected_loss: float
    config: SwitchConfiguration
    loop: Loop
    injections: dict[int, float]
    subpaths: list[SubPath | Loop]
    candidates: list[int]
    trace: list[CandidateEvaluation]
    sopf_solves: int
    opf_solves: int

    @property
    def n_r(self) -> int:
        return len(self.subpaths)


@dataclass
class ReconfigurationResult:
    method: str
    config: SwitchConfiguration
    opened: tuple[int, ...]
    objective: float
    expected_loss: float
    trace: list[CandidateEvaluation] = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)


def _argmin(items: Iterable, key_value, key_id):
    """Minimum by value; near-equal values (relative 1e-12) go to the lowest id."""
    best = None
    for it in items:
        val, ident = key_value(it), key_id(it)
        if best is None:
            best = (val, ident, it)
            continue
        bval, bid, _ = best
        if math.isinf(val) and math.isinf(bval):
            tie = True
        else:
            tie = abs(val - bval) <= TIE_RTOL * max(1.0, abs(val), abs(bval))
        if (tie and ident < bid) or (not tie and val < bval):
            best = (val, ident, it)
    return None if best is None else best[2]


def candidate_set(path: Loop | SubPath, e: int,
                  expected_flows: Mapping[int, float]) -> list[tuple[int, str]]:
    """Branches among which the best opening near ``e`` lies.

    The expected flow of ``e`` is re-signed onto the path's traversal
    direction; a positive value adds the next branch along the path, a
    negative one the previous branch, each only if it exists on the path.
    """
    try:
        k = path.branches.index(e)
    except ValueError:
        raise ValueError(f"branch {e} is not on the path {path.branches}") from None
    flow = path.signs[k] * expected_flows[e]
    if abs(flow) <= ZERO_FLOW:
        flow = 0.0
    out = [(e, MIN_FLOW)]
    closed_loop = isinstance(path, Loop)
    n = len(path.branches)
    if flow > 0:
        if k + 1 < n:
            out.append((path.branches[k + 1], DOWNSTREAM))
        elif closed_loop:
            out.append((path.branches[0], DOWNSTREAM))
    elif flow < 0:
        if k > 0:
            out.append((path.branches[k - 1], UPSTREAM))
        elif closed_loop:
            out.append((path.branches[-1], UPSTREAM))
    return out


def _flow_maps(net: Network, sol: StochasticSolution) -> tuple[dict, dict]:
    ids = net.branch_ids
    return (dict(zip(ids, map(float, sol.expected_flows))),
            dict(zip(ids, map(float, sol.expected_abs_flows))))


def _single_loop(net: Network, base_open: Iterable[int]) -> tuple[SwitchConfiguration, Loop]:
    cfg = SwitchConfiguration.with_open(net, base_open)
    closed = cfg.closed_ids
    if not is_connected(net, closed):
        raise PreconditionError("closing all but base_open leaves the network disconnected")
    n_red = len(closed) - len(net.buses) + 1
    if n_red != 1:
        raise PreconditionError(f"expected exactly one redundant branch, found {n_red}")
    (loop,) = find_loops(net, closed)
    return cfg, loop


class _Evaluator:
    """SOPF-R on radial candidates, memoized per configuration."""

    def __init__(self, net, scenarios, conf, executor):
        self.net, self.scenarios, self.conf, self.executor = net, scenarios, conf, executor
        self.cache: dict[SwitchConfiguration, tuple[float, float, str]] = {}
        self.sopf_solves = 0
        self.opf_solves = 0

    def solve(self, cfg: SwitchConfiguration) -> StochasticSolution:
        self.sopf_solves += 1
        self.opf_solves += len(self.scenarios)
        return solve_sopf_r(self.net, cfg, self.scenarios, self.conf, self.executor)

    def objective(self, cfg: SwitchConfiguration) -> tuple[float, float, str]:
        if cfg in self.cache:
            return self.cache[cfg]
        try:
            sol = self.solve(cfg)
            out = (sol.expected_objective, sol.expected_loss, "")
        except ScenarioSolveError as exc:
            out = (math.inf, math.inf, str(exc))
        self.cache[cfg] = out
        return out


def _min_abs(branches: Sequence[int], abs_flows: Mapping[int, float]) -> int:
    return _argmin(branches, lambda b: abs_flows[b], lambda b: b)


def _search_loop(net, base_open, scenarios, conf, executor, divide: bool,
                 stage: str, evaluator: _Evaluator | None = None) -> OneStageResult:
    cfg_loop, loop = _single_loop(net, base_open)
    ev = evaluator or _Evaluator(net, scenarios, conf, executor)
    sopf0, opf0 = ev.sopf_solves, ev.opf_solves
    sol = solve_sopf_r(net, cfg_loop, scenarios, conf, executor)
    loop_opf = len(scenarios)
    flows, abs_flows = _flow_maps(net, sol)
    inj = loop_injections(net, sol, loop)
    injecting = [b for b in loop.buses[:-1] if inj[b] > 0]
    if divide and injecting:
        paths = divide_into_subpaths(loop, injecting)
    else:
        # the whole loop as one path; neighbors wrap around
        paths = [loop]
    cands: list[tuple[int, str, int]] = []
    seen = set()
    for m, path in enumerate(paths):
        e_hat = _min_abs(path.branches, abs_flows)
        for b, why in candidate_set(path, e_hat, flows):
            if b not in seen:
                seen.add(b)
                cands.append((b, why, m))
    trace = []
    base = set(base_open)
    for b, why, m in cands:
        cfg = SwitchConfiguration.with_open(net, base | {b})
        obj, loss, err = ev.objective(cfg)
        trace.append(CandidateEvaluation(b, obj, loss, m, why, stage,
                                         feasible=math.isfinite(obj), note=err))
    best = _argmin(trace, lambda c: c.objective, lambda c: c.branch)
    if best is None or not best.feasible:
        raise AlgorithmFailure("every candidate opening is infeasible", trace)
    cfg = SwitchConfiguration.with_open(net, base | {best.branch})
    return OneStageResult(
        branch=best.branch, objective=best.objective, expected_loss=best.expected_loss,
        config=cfg, loop=loop, injections=inj, subpaths=paths,
        candidates=[c[0] for c in cands], trace=trace,
        sopf_solves=ev.sopf_solves - sopf0,
        opf_solves=ev.opf_solves - opf0 + loop_opf,
    )


def one_stage_sbr(net: Network, base_open: Iterable[int], scenarios: ScenarioSet,
                  conf: SolverConfig | None = None,
                  executor: Executor | None = None) -> OneStageResult:
    """Open one branch of the single loop left when ``base_open`` is open.

    Solves the stochastic power flow with the loop closed, splits the loop
    at buses injecting positive expected power into it, takes the branch of
    least expected absolute flow on each sub-path, and evaluates the
    candidate set of each. At most two evaluations per sub-path.
    """
    return _search_loop(net, tuple(base_open), scenarios, conf or SolverConfig(), executor,
                        divide=True, stage="one-stage")


def baseline_one_stage(net: Network, base_open: Iterable[int], scenarios: ScenarioSet,
                       conf: SolverConfig | None = None,
                       executor: Executor | None = None) -> OneStageResult:
    """Same search with the loop treated as a single path (no sub-paths)."""
    return _search_loop(net, tuple(base_open), scenarios, conf or SolverConfig(), executor,
                        divide=False, stage="baseline")


def _stage_one(net, scenarios, conf, executor):
    cfg_all = SwitchConfiguration.all_closed(net)
    sol = solve_sopf_r(net, cfg_all, scenarios, conf, executor)
    _, abs_flows = _flow_maps(net, sol)
    loops = find_loops(net)
    opened: list[int] = []
    visited: list[Loop] = []
    while loops:
        cur = loops[0]
        e = _min_abs(cur.branches, abs_flows)
        opened.append(e)
        visited.append(cur)
        loops = update_loop_after_opening(loops, e)
    return sol, opened, visited


def _check_input(net: Network):
    if not is_connected(net):
        raise PreconditionError("all-closed network is disconnected")


def _radial_result(net, method, scenarios, conf, executor, t0):
    cfg = SwitchConfiguration.all_closed(net)
    sol = solve_sopf_r(net, cfg, scenarios, conf, executor)
    stats = dict(sopf_solves=1, opf_solves=len(scenarios), stage2_candidates=[],
                 wall_time=time.perf_counter() - t0)
    return ReconfigurationResult(method, cfg, (), sol.expected_objective, sol.expected_loss,
                                 stats=stats, notes=["network is already radial"])


def two_stage_sbr(net: Network, scenarios: ScenarioSet, conf: SolverConfig | None = None,
                  executor: Executor | None = None) -> ReconfigurationResult:
    """Greedy opening of one branch per loop, then close-and-open per loop."""
    conf = conf or SolverConfig()
    t0 = time.perf_counter()
    _check_input(net)
    if net.n_loops == 0:
        return _radial_result(net, "proposed", scenarios, conf, executor, t0)
    sol_all, e_o, _ = _stage_one(net, scenarios, conf, executor)
    runs: list[OneStageResult | None] = []
    trace: list[CandidateEvaluation] = []
    loop_solves = 0
    opf = len(scenarios)
    n_cands = 0
    notes = []
    for l, e in enumerate(e_o):
        base_open = [b for b in e_o if b != e]
        # fresh evaluator per iteration: the candidate count is per iteration
        it_ev = _Evaluator(net, scenarios, conf, executor)
        try:
            res = _search_loop(net, base_open, scenarios, conf, executor, divide=True,
                               stage=f"stage2[{l}]", evaluator=it_ev)
        except AlgorithmFailure as exc:
            notes.append(f"iteration {l}: {exc}")
            trace.extend(exc.trace)
            runs.append(None)
            n_cands += it_ev.sopf_solves
            opf += it_ev.opf_solves + len(scenarios)
            loop_solves += 1
            continue
        runs.append(res)
        trace.extend(res.trace)
        n_cands += res.sopf_solves
        opf += res.opf_solves
        loop_solves += 1
    feasible = [(l, r) for l, r in enumerate(runs) if r is not None]
    if not feasible:
        raise AlgorithmFailure("no stage-2 iteration produced a feasible network", trace)
    l_min, best = _argmin(feasible, lambda lr: lr[1].objective, lambda lr: lr[0])
    if not is_radial(net, best.config):
        raise AlgorithmFailure("internal error: result is not radial", trace)
    stats = dict(
        sopf_solves=1 + n_cands,
        stage2_candidates=[len(r.candidates) if r else None for r in runs],
        loop_solves=loop_solves,
        opf_solves=opf,
        wall_time=time.perf_counter() - t0,
    )
    return ReconfigurationResult(
        method="proposed", config=best.config, opened=best.config.open_ids,
        objective=best.objective, expected_loss=best.expected_loss, trace=trace,
        stats=stats, notes=notes,
        details=dict(
            stage1_opened=tuple(e_o),
            stage1_expected_abs_flows={e: float(sol_all.expected_abs_flows[net.branch_index[e]])
                                       for e in e_o},
            l_min=l_min,
            iterations=[None if r is None else dict(
                closed=e_o[l], opened=r.branch, objective=r.objective,
                n_r=r.n_r, injecting=[p.buses[0] for p in r.subpaths],
                candidates=list(r.candidates), loop=r.loop.branches,
            ) for l, r in enumerate(runs)],
        ),
    )


def _tree_cycle(net: Network, tree: set[int], extra: int) -> Loop:
    """The unique loop created by closing ``extra`` on top of spanning tree ``tree``."""
    (loop,) = find_loops(net, tree | {extra})
    return loop


def baseline_two_stage(net: Network, scenarios: ScenarioSet, conf: SolverConfig | None = None,
                       executor: Executor | None = None) -> ReconfigurationResult:
    """Greedy stage only, refined per loop with the all-closed flows.

    For each stage-1 opening the loop it would close is searched with the
    candidate set of that opening (whole loop as one path), evaluated with
    the other openings kept; no flows are recomputed between loops.
    """
    conf = conf or SolverConfig()
    t0 = time.perf_counter()
    _check_input(net)
    if net.n_loops == 0:
        return _radial_result(net, "baseline", scenarios, conf, executor, t0)
    sol_all, e_o, _ = _stage_one(net, scenarios, conf, executor)
    flows, _ = _flow_maps(net, sol_all)
    tree = set(net.branch_ids) - set(e_o)
    ev = _Evaluator(net, scenarios, conf, executor)
    trace = []
    for l, e in enumerate(e_o):
        loop = _tree_cycle(net, tree, e)
        base = set(e_o) - {e}
        for b, why in candidate_set(loop, e, flows):
            cfg = SwitchConfiguration.with_open(net, base | {b})
            obj, loss, err = ev.objective(cfg)
            trace.append(CandidateEvaluation(b, obj, loss, l, why, f"baseline[{l}]",
                                             feasible=math.isfinite(obj), note=err))
    best = _argmin(trace, lambda c: c.objective, lambda c: (c.subpath, c.branch))
    if best is None or not best.feasible:
        raise AlgorithmFailure("every baseline candidate is infeasible", trace)
    base = set(e_o) - {e_o[best.subpath]}
    cfg = SwitchConfiguration.with_open(net, base | {best.branch})
    stats = dict(
        sopf_solves=1 + ev.sopf_solves,
        opf_solves=len(scenarios) + ev.opf_solves,
        wall_time=time.perf_counter() - t0,
    )
    return ReconfigurationResult(
        method="baseline", config=cfg, opened=cfg.open_ids, objective=best.objective,
        expected_loss=best.expected_loss, trace=trace, stats=stats,
        details=dict(stage1_opened=tuple(e_o)),
    )
