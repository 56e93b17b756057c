"""Hourly experiment driver, parameter sweeps and report emission."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .casefile import CaseDocument
from .distflow import SolverConfig
from .errors import BudgetExceededError, SDNRError
from .oracle import DEFAULT_BUDGET, exhaustive_oracle
from .sbr import ReconfigurationResult, baseline_two_stage, two_stage_sbr
from .scenarios import (ScenarioSet, TimeSeriesTable, build_scenarios, reduce_kmedoids,
                        synthetic_profiles)

METHODS = ("proposed", "baseline", "oracle")
REPORT_HEADER = ("hour", "method", "objective_pu", "objective_kw", "opened",
                 "relerr_pct", "opf_solves", "ms")
SUMMARY_HEADER = ("axis", "value", "method", "stat", "relerr_pct", "objective_kw")


@dataclass(frozen=True)
class ScenarioConfig:
    """How hourly scenario sets are produced.

    With ``use_case_injections`` the case's fixed injections are used for
    every hour; otherwise the rows of ``table`` (synthetic when None) at each
    hour of day are reduced to ``n_scenarios`` medoids.
    """

    n_scenarios: int = 5
    k_r: float = 1.0
    seed: int = 0
    days: int = 91
    pf_load: float = 0.95
    pf_renewable: float = 1.0
    normalize: bool = True
    use_case_injections: bool = False
    table: TimeSeriesTable | None = None

    def profiles(self) -> TimeSeriesTable:
        return self.table if self.table is not None else synthetic_profiles(self.days, self.seed)


@dataclass(frozen=True)
class HourRecord:
    hour: int
    method: str
    objective_pu: float
    objective_kw: float
    opened: tuple[tuple[int, int], ...]
    relerr_pct: float | None
    opf_solves: int
    ms: float
    status: str = "ok"
    message: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class RunReport:
    case: str
    records: list[HourRecord]
    meta: dict = field(default_factory=dict)

    @property
    def failed_hours(self) -> list[int]:
        return sorted({r.hour for r in self.records if not r.ok})

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(REPORT_HEADER)
        for r in self.records:
            wr.writerow([
                r.hour, r.method, _fmt(r.objective_pu), _fmt(r.objective_kw),
                " ".join(f"{a}-{b}" for a, b in r.opened),
                _fmt(r.relerr_pct), r.opf_solves if r.ok else "",
                _fmt(r.ms, 1) if timing else "",
            ])
        return buf.getvalue()

    def to_long_csv(self, timing: bool = True) -> str:
        """One row per (hour, method, metric); convenient for plotting."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("hour", "method", "metric", "value"))
        metrics = ["objective_kw", "relerr_pct", "opf_solves"] + (["ms"] if timing else [])
        for r in self.records:
            for m in metrics:
                val = getattr(r, m)
                if val is not None and r.ok:
                    wr.writerow((r.hour, r.method, m, _fmt(val) if m != "opf_solves" else val))
        return buf.getvalue()

    def to_dict(self, timing: bool = True) -> dict:
        rows = []
        for r in self.records:
            d = asdict(r)
            d["opened"] = [list(e) for e in r.opened]
            for key in ("objective_pu", "objective_kw"):
                if isinstance(d[key], float) and not math.isfinite(d[key]):
                    d[key] = None
            if not timing:
                d["ms"] = None
                d["stats"] = {k: v for k, v in d["stats"].items() if k != "wall_time"}
            rows.append(d)
        return {"case": self.case, "meta": self.meta, "records": rows}

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, default=_jsonable) + "\n"


def _fmt(val, digits: int = 9) -> str:
    if val is None or (isinstance(val, float) and not math.isfinite(val)):
        return ""
    return f"{val:.{digits}g}" if digits != 1 else f"{val:.1f}"


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def hour_scenarios(case: CaseDocument, sconf: ScenarioConfig, hour: int,
                   table: TimeSeriesTable | None = None) -> ScenarioSet:
    """Scenario set for one hour of day."""
    if sconf.use_case_injections:
        if case.injections is None:
            raise SDNRError("case has no fixed injections")
        return case.injections
    table = table if table is not None else sconf.profiles()
    rows = table.at_hour(hour)
    if len(rows) == 0:
        raise SDNRError(f"no profile rows for hour {hour}")
    k = min(sconf.n_scenarios, len(rows))
    factors = reduce_kmedoids(rows, k, seed=sconf.seed, normalize=sconf.normalize)
    return build_scenarios(case.network, factors, case.profiles, sconf.k_r,
                           sconf.pf_load, sconf.pf_renewable)


def _run_method(method: str, case: CaseDocument, scenarios: ScenarioSet,
                conf: SolverConfig, budget: int) -> ReconfigurationResult:
    if method == "proposed":
        return two_stage_sbr(case.network, scenarios, conf)
    if method == "baseline":
        return baseline_two_stage(case.network, scenarios, conf)
    if method == "oracle":
        return exhaustive_oracle(case.network, scenarios, conf, budget)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def _solve_hour(args) -> list[HourRecord]:
    case, sconf, hour, methods, conf, budget, table = args
    net = case.network
    kw = net.base_mva * 1000.0
    out = []
    try:
        scenarios = hour_scenarios(case, sconf, hour, table)
    except SDNRError as exc:
        return [HourRecord(hour, m, math.nan, math.nan, (), None, 0, 0.0, "failed", str(exc))
                for m in methods]
    for m in methods:
        t0 = time.perf_counter()
        try:
            res = _run_method(m, case, scenarios, conf, budget)
        except BudgetExceededError as exc:
            out.append(HourRecord(hour, m, math.nan, math.nan, (), None, 0,
                                  1000 * (time.perf_counter() - t0), "budget-exceeded", str(exc),
                                  {"tree_count": exc.count}))
            continue
        except SDNRError as exc:
            out.append(HourRecord(hour, m, math.nan, math.nan, (), None, 0,
                                  1000 * (time.perf_counter() - t0), "failed", str(exc)))
            continue
        ms = 1000 * (time.perf_counter() - t0)
        opened = tuple(net.branch(b).ends for b in res.opened)
        stats = {k: v for k, v in res.stats.items()}
        out.append(HourRecord(hour, m, res.expected_loss, res.expected_loss * kw, opened,
                              None, int(res.stats.get("opf_solves", 0)), ms, stats=stats))
    return _with_relerr(out)


def _with_relerr(records: list[HourRecord]) -> list[HourRecord]:
    ref = next((r for r in records if r.method == "oracle" and r.ok), None)
    if ref is None:
        return records
    out = []
    for r in records:
        if r.ok:
            r = replace(r, relerr_pct=relative_error_pct(r.objective_pu, ref.objective_pu))
        out.append(r)
    return out


def relative_error_pct(value: float, reference: float) -> float:
    """100 (value - reference) / reference; 0 when both vanish."""
    if reference == 0:
        return 0.0 if value == 0 else math.copysign(math.inf, value)
    return 100.0 * (value - reference) / reference


def run_solve(case: CaseDocument, sconf: ScenarioConfig, methods=("proposed",),
              hours=range(24), conf: SolverConfig | None = None,
              budget: int = DEFAULT_BUDGET, jobs: int = 1) -> RunReport:
    """Solve each hour with each method; relative errors are against the oracle when run.

    Records come back ordered by hour, then by method in the order given.
    """
    conf = conf or SolverConfig()
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    hours = list(hours)
    table = None if sconf.use_case_injections else sconf.profiles()
    tasks = [(case, sconf, h, methods, conf, budget, table) for h in hours]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_solve_hour, tasks))
    else:
        chunks = [_solve_hour(t) for t in tasks]
    records = [r for chunk in chunks for r in chunk]
    meta = {
        "methods": list(methods), "hours": hours, "n_scenarios": sconf.n_scenarios,
        "k_r": sconf.k_r, "seed": sconf.seed, "budget": budget,
        "tolerance": conf.tolerance,
        "scenario_source": ("case injections" if sconf.use_case_injections else
                            "synthetic" if sconf.table is None else "table"),
    }
    return RunReport(case.network.name, records, meta)


@dataclass
class SweepReport:
    axis: str
    reports: list[tuple[float, RunReport]]

    def summary_rows(self) -> list[tuple]:
        """Mean, max and min over hours per (value, method)."""
        rows = []
        for value, rep in self.reports:
            for m in rep.meta["methods"]:
                recs = [r for r in rep.records if r.method == m and r.ok]
                errs = [r.relerr_pct for r in recs if r.relerr_pct is not None]
                kws = [r.objective_kw for r in recs]
                for stat, fn in (("mean", np.mean), ("max", np.max), ("min", np.min)):
                    rows.append((self.axis, value, m, stat,
                                 float(fn(errs)) if errs else None,
                                 float(fn(kws)) if kws else None))
        return rows

    def to_csv(self, timing: bool = True) -> str:
        """Per-hour records with the grid value prepended, then summary rows."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow((self.axis,) + REPORT_HEADER)
        for value, rep in self.reports:
            body = rep.to_csv(timing).splitlines()[1:]
            for line in body:
                buf.write(f"{_fmt(value)},{line}\n")
        buf.write("\n")
        wr.writerow(SUMMARY_HEADER)
        for row in self.summary_rows():
            wr.writerow(row[:4] + (_fmt(row[4]), _fmt(row[5])))
        return buf.getvalue()

    def to_json(self, timing: bool = True) -> str:
        doc = {
            "axis": self.axis,
            "grid": [{"value": v, **rep.to_dict(timing)} for v, rep in self.reports],
            "summary": [dict(zip(SUMMARY_HEADER, row)) for row in self.summary_rows()],
        }
        return json.dumps(doc, indent=2, default=_jsonable) + "\n"

    @property
    def failed_hours(self) -> list[int]:
        return sorted({h for _, rep in self.reports for h in rep.failed_hours})


SWEEP_AXES = ("k_r", "scenario-count")


def run_sweep(case: CaseDocument, axis: str, values, sconf: ScenarioConfig,
              methods=("proposed", "baseline", "oracle"), hours=range(24),
              conf: SolverConfig | None = None, budget: int = DEFAULT_BUDGET,
              jobs: int = 1) -> SweepReport:
    """Repeat :func:`run_solve` over a grid of penetration levels or scenario counts."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    if sconf.table is None and not sconf.use_case_injections:
        sconf = replace(sconf, table=synthetic_profiles(sconf.days, sconf.seed))
    reports = []
    for v in values:
        if axis == "k_r":
            point = replace(sconf, k_r=float(v))
        else:
            if int(v) != v or v < 1:
                raise ValueError(f"scenario count must be a positive integer, got {v}")
            point = replace(sconf, n_scenarios=int(v))
        reports.append((v, run_solve(case, point, methods, hours, conf, budget, jobs)))
    return SweepReport(axis, reports)
