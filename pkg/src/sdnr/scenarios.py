"""Uncertainty model: hourly profiles, k-medoids reduction, scenario sets."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, TextIO

import numpy as np

from .errors import DataError, SchemaError
from .network import Network

PROB_TOL = 1e-12


@dataclass(frozen=True)
class TimeSeriesTable:
    """Hourly load factor and wind/solar capacity factors (relative units)."""

    load: np.ndarray
    wind: np.ndarray
    solar: np.ndarray
    hour: np.ndarray | None = None

    def __post_init__(self):
        cols = [np.asarray(c, dtype=float) for c in (self.load, self.wind, self.solar)]
        n = len(cols[0])
        if any(len(c) != n for c in cols):
            raise DataError("columns have unequal lengths")
        if n == 0:
            raise DataError("empty time-series table")
        if any(not np.all(np.isfinite(c)) or np.any(c < 0) for c in cols):
            raise DataError("values must be finite and non-negative")
        for name, c in zip(("load", "wind", "solar"), cols):
            c.setflags(write=False)
            object.__setattr__(self, name, c)
        hour = np.arange(n) % 24 if self.hour is None else np.asarray(self.hour, dtype=int)
        if len(hour) != n:
            raise DataError("hour column length mismatch")
        hour.setflags(write=False)
        object.__setattr__(self, "hour", hour)

    def __len__(self) -> int:
        return len(self.load)

    def matrix(self) -> np.ndarray:
        return np.column_stack([self.load, self.wind, self.solar])

    def rows(self, idx) -> "TimeSeriesTable":
        idx = np.asarray(idx)
        return TimeSeriesTable(self.load[idx], self.wind[idx], self.solar[idx], self.hour[idx])

    def at_hour(self, h: int) -> "TimeSeriesTable":
        sel = np.flatnonzero(self.hour == h)
        if sel.size == 0:
            raise DataError(f"no rows for hour {h}")
        return self.rows(sel)

    def normalized(self) -> "TimeSeriesTable":
        """Scale each column by its peak so the largest value is 1."""

        def peak(c):
            m = float(np.max(c))
            return c / m if m > 0 else c.copy()

        return TimeSeriesTable(peak(self.load), peak(self.wind), peak(self.solar), self.hour)


@dataclass(frozen=True)
class Rejection:
    line: int
    column: str
    value: str


def ingest_csv(
    source: str | os.PathLike | TextIO,
    load_col: str = "load",
    wind_col: str = "wind",
    solar_col: str = "solar",
    time_col: str | None = None,
) -> tuple[TimeSeriesTable, list[Rejection]]:
    """Read an hourly CSV with a header row.

    Rows whose mapped fields are not finite non-negative numbers are dropped
    and reported by file line number (the header is line 1).
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8-sig") as fh:
            return ingest_csv(fh, load_col, wind_col, solar_col, time_col)
    reader = csv.DictReader(source)
    header = list(reader.fieldnames or [])
    wanted = [load_col, wind_col, solar_col] + ([time_col] if time_col else [])
    missing = [c for c in wanted if c not in header]
    if missing:
        raise SchemaError(f"missing column(s) {missing}; header is {header}", "line 1")
    cols: dict[str, list[float]] = {c: [] for c in (load_col, wind_col, solar_col)}
    hours: list[int] = []
    rejected: list[Rejection] = []
    for line, row in enumerate(reader, start=2):
        vals = {}
        bad = None
        for c in cols:
            raw = (row.get(c) or "").strip()
            try:
                val = float(raw)
            except ValueError:
                bad = Rejection(line, c, raw)
                break
            if not math.isfinite(val) or val < 0:
                bad = Rejection(line, c, raw)
                break
            vals[c] = val
        hour = None
        if bad is None and time_col:
            raw = (row.get(time_col) or "").strip()
            try:
                hour = datetime.fromisoformat(raw.replace("Z", "+00:00")).hour
            except ValueError:
                bad = Rejection(line, time_col, raw)
        if bad is not None:
            rejected.append(bad)
            continue
        for c, v in vals.items():
            cols[c].append(v)
        if hour is not None:
            hours.append(hour)
    if not cols[load_col]:
        raise DataError("no usable rows in CSV")
    table = TimeSeriesTable(
        np.array(cols[load_col]),
        np.array(cols[wind_col]),
        np.array(cols[solar_col]),
        np.array(hours) if time_col else None,
    )
    return table, rejected


def synthetic_profiles(days: int = 91, seed: int = 0) -> TimeSeriesTable:
    """Hourly profiles: sinusoidal daily load, clamped-noise solar and wind."""
    rng = np.random.default_rng(seed)
    n = days * 24
    hour = np.arange(n) % 24
    day = np.arange(n) // 24
    # load peaks in the evening, trough before dawn
    load = 0.75 + 0.2 * np.sin(2 * np.pi * (hour - 10) / 24) + 0.05 * np.sin(2 * np.pi * day / 7)
    load = np.clip(load + rng.normal(0, 0.04, n), 0.2, None)
    daylight = np.clip(np.sin(np.pi * (hour - 6) / 12), 0, None)
    cloud = np.clip(rng.normal(0.7, 0.25, days), 0.05, 1.0)[day]
    solar = np.clip(daylight * cloud + rng.normal(0, 0.03, n) * (daylight > 0), 0, 1)
    wind = np.empty(n)
    w = 0.35
    for t in range(n):
        w = 0.92 * w + 0.08 * 0.35 + rng.normal(0, 0.06)
        w = min(max(w, 0.0), 1.0)
        wind[t] = w
    return TimeSeriesTable(load, wind, solar, hour)


# --------------------------------------------------------------------------
# k-medoids (PAM swap with k-means++ seeding)


@dataclass(frozen=True)
class ScenarioFactors:
    """Reduced profile rows with their probabilities."""

    load: np.ndarray
    wind: np.ndarray
    solar: np.ndarray
    probabilities: np.ndarray
    medoid_rows: tuple[int, ...] = ()
    cost_history: tuple[float, ...] = ()

    def __len__(self) -> int:
        return len(self.probabilities)


def _zscore(x: np.ndarray) -> np.ndarray:
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return (x - x.mean(axis=0)) / sd


def _kmeanspp(d: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    n = len(d)
    chosen = [int(rng.integers(n))]
    near = d[chosen[0]].copy()
    while len(chosen) < k:
        w = near ** 2
        w[chosen] = 0.0
        total = w.sum()
        if total <= 0:
            pool = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(pool))
        else:
            nxt = int(rng.choice(n, p=w / total))
        chosen.append(nxt)
        near = np.minimum(near, d[nxt])
    return chosen


def pam(points: np.ndarray, k: int, seed: int = 0) -> tuple[list[int], np.ndarray, list[float]]:
    """Partitioning around medoids on Euclidean distance.

    Returns (sorted medoid row indices, label per row, total cost after the
    seeding and after each accepted swap). Each iteration applies the single
    best improving swap, so the cost sequence is non-increasing.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=-1))
    rng = np.random.default_rng(seed)
    med = _kmeanspp(d, k, rng)

    def cost_of(meds):
        return float(d[:, meds].min(axis=1).sum())

    history = [cost_of(med)]
    while k < n:
        dm = d[:, med]
        order = np.argsort(dm, axis=1, kind="stable")
        first = dm[np.arange(n), order[:, 0]]
        second = dm[np.arange(n), order[:, 1]] if k > 1 else np.full(n, np.inf)
        best = (history[-1], None, None)
        is_med = np.zeros(n, dtype=bool)
        is_med[med] = True
        for i in range(k):
            base = np.where(order[:, 0] == i, second, first)
            totals = np.minimum(d, base[:, None]).sum(axis=0)
            totals[is_med] = np.inf
            h = int(np.argmin(totals))
            if totals[h] < best[0] - 1e-12 * max(1.0, best[0]):
                best = (float(totals[h]), i, h)
        if best[1] is None:
            break
        med[best[1]] = best[2]
        history.append(cost_of(med))
    med = sorted(med)
    labels = np.argmin(d[:, med], axis=1)
    return med, labels, history


def reduce_kmedoids(table: TimeSeriesTable, k: int, seed: int = 0,
                    normalize: bool = True) -> ScenarioFactors:
    """Cluster the table's rows into ``k`` medoids weighted by cluster size."""
    n = len(table)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    x = table.matrix()
    med, labels, history = pam(_zscore(x) if normalize else x, k, seed)
    counts = np.bincount(labels, minlength=k).astype(float)
    probs = counts / n
    med_idx = np.array(med)
    return ScenarioFactors(
        load=x[med_idx, 0],
        wind=x[med_idx, 1],
        solar=x[med_idx, 2],
        probabilities=probs,
        medoid_rows=tuple(int(m) for m in med),
        cost_history=tuple(history),
    )


# --------------------------------------------------------------------------
# scenario sets


@dataclass(frozen=True)
class LoadProfile:
    p: float  # nominal active demand, per-unit


@dataclass(frozen=True)
class RenewableProfile:
    wind: float  # installed wind capacity, per-unit
    solar: float  # installed solar capacity, per-unit


@dataclass(frozen=True)
class Scenario:
    """Injections of one scenario, aligned with ``ScenarioSet.bus_ids``."""

    p_r: np.ndarray
    p_d: np.ndarray
    q_r: np.ndarray
    q_d: np.ndarray
    probability: float
    bus_ids: tuple[int, ...] = ()

    @property
    def p(self) -> np.ndarray:
        return self.p_r - self.p_d

    @property
    def q(self) -> np.ndarray:
        return self.q_r - self.q_d


@dataclass(frozen=True)
class ScenarioSet:
    """Probability-weighted scenarios; arrays have shape (n_scenarios, n_buses)."""

    bus_ids: tuple[int, ...]
    p_r: np.ndarray
    p_d: np.ndarray
    q_r: np.ndarray
    q_d: np.ndarray
    probabilities: np.ndarray
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "bus_ids", tuple(self.bus_ids))
        n_bus = len(self.bus_ids)
        probs = np.atleast_1d(np.asarray(self.probabilities, dtype=float))
        w = len(probs)
        if w == 0:
            raise ValueError("need at least one scenario")
        for name in ("p_r", "p_d", "q_r", "q_d"):
            arr = np.array(getattr(self, name), dtype=float).reshape(w, n_bus)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.p_r < 0) or np.any(self.p_d < 0):
            raise ValueError("active generation and demand must be non-negative")
        if np.any(probs <= 0) or np.any(probs > 1):
            raise ValueError("probabilities must lie in (0, 1]")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)

    def __len__(self) -> int:
        return len(self.probabilities)

    def __getitem__(self, w: int) -> Scenario:
        return Scenario(self.p_r[w], self.p_d[w], self.q_r[w], self.q_d[w],
                        float(self.probabilities[w]), self.bus_ids)

    def __iter__(self):
        return (self[w] for w in range(len(self)))

    @classmethod
    def single(cls, bus_ids: Iterable[int], p: Mapping[int, float],
               q: Mapping[int, float] | None = None) -> "ScenarioSet":
        """One certain scenario from net injections (positive = generation)."""
        return cls.from_injections(bus_ids, [p], None if q is None else [q], [1.0])

    @classmethod
    def from_injections(cls, bus_ids: Iterable[int], p: list[Mapping[int, float]],
                        q: list[Mapping[int, float]] | None,
                        probabilities) -> "ScenarioSet":
        """Build from per-scenario net injections, splitting signs into gen/demand."""
        bus_ids = tuple(bus_ids)
        w = len(p)
        pa = np.zeros((w, len(bus_ids)))
        qa = np.zeros((w, len(bus_ids)))
        pos = {b: k for k, b in enumerate(bus_ids)}
        for s in range(w):
            for b, val in p[s].items():
                pa[s, pos[b]] = val
            if q is not None:
                for b, val in q[s].items():
                    qa[s, pos[b]] = val
        return cls(
            bus_ids,
            p_r=np.clip(pa, 0, None), p_d=np.clip(-pa, 0, None),
            q_r=np.clip(qa, 0, None), q_d=np.clip(-qa, 0, None),
            probabilities=probabilities,
        )


def _tan_phi(pf: float) -> float:
    if not 0 < pf <= 1:
        raise ValueError(f"power factor must lie in (0, 1], got {pf}")
    return math.tan(math.acos(pf))


def build_scenarios(
    net: Network,
    factors: ScenarioFactors,
    assignment: Mapping[int, LoadProfile | RenewableProfile],
    k_r: float = 1.0,
    pf_load: float = 0.95,
    pf_renewable: float = 1.0,
) -> ScenarioSet:
    """Turn reduced profile rows into per-bus injections.

    Load buses draw ``load_factor * p``; renewable buses produce
    ``k_r * (wind_factor * wind + solar_factor * solar)``. Reactive power
    follows the fixed power factors: loads absorb, renewables inject.
    """
    if k_r < 0:
        raise ValueError("k_r must be non-negative")
    tan_l, tan_r = _tan_phi(pf_load), _tan_phi(pf_renewable)
    sub = net.substation
    unassigned = [b for b in net.bus_ids if b != sub and b not in assignment]
    if unassigned:
        raise SchemaError(f"bus(es) {unassigned} have no load or renewable profile",
                          "profiles")
    w, n = len(factors), len(net.bus_ids)
    p_r = np.zeros((w, n))
    p_d = np.zeros((w, n))
    for k, b in enumerate(net.bus_ids):
        if b == sub:
            continue
        prof = assignment[b]
        if isinstance(prof, LoadProfile):
            p_d[:, k] = factors.load * prof.p
        elif isinstance(prof, RenewableProfile):
            p_r[:, k] = k_r * (factors.wind * prof.wind + factors.solar * prof.solar)
        else:
            raise TypeError(f"bus {b}: unsupported profile {prof!r}")
    return ScenarioSet(
        net.bus_ids, p_r=p_r, p_d=p_d, q_r=p_r * tan_r, q_d=p_d * tan_l,
        probabilities=factors.probabilities,
        meta={"k_r": k_r, "pf_load": pf_load, "pf_renewable": pf_renewable},
    )


def factors_from_rows(table: TimeSeriesTable) -> ScenarioFactors:
    """Equiprobable factors, one per table row (no reduction)."""
    n = len(table)
    return ScenarioFactors(table.load.copy(), table.wind.copy(), table.solar.copy(),
                           np.full(n, 1.0 / n), tuple(range(n)))


def csv_text(table: TimeSeriesTable) -> str:
    """Serialize a table in the ingestion format (used for fixtures and the CLI)."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["hour", "load", "wind", "solar"])
    for h, a, b, c in zip(table.hour, table.load, table.wind, table.solar):
        wr.writerow([int(h), repr(float(a)), repr(float(b)), repr(float(c))])
    return buf.getvalue()
