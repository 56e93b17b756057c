"""Case documents: the native JSON schema and a MATPOWER-subset importer.

Native format (``"schema": "sdnr-case/1"``), all electrical values per-unit::

    {
      "schema": "sdnr-case/1",
      "name": "case33",
      "base_mva": 10.0,
      "base_kv": 12.66,
      "buses": [
        {"id": 1, "kind": "substation", "p_min": -10.0, "p_max": 10.0,
         "q_min": -10.0, "q_max": 10.0, "v_set": 1.0},
        {"id": 2, "v_min": 0.9, "v_max": 1.1}
      ],
      "branches": [
        {"id": 1, "from": 1, "to": 2, "r": 0.0058, "x": 0.0029, "status": "closed"},
        {"id": 33, "from": 8, "to": 21, "r": 0.12, "x": 0.12, "status": "open"}
      ],
      "profiles": [
        {"bus": 2, "load": 0.01},
        {"bus": 7, "wind": 0.01, "solar": 0.015}
      ],
      "injections": [
        {"probability": 1.0, "p": {"2": -0.01}, "q": {"2": -0.005}}
      ],
      "notes": "free text"
    }

``profiles``, ``injections`` and ``notes`` are optional. Optional bus and
branch fields fall back to the :class:`~sdnr.network.Bus` and
:class:`~sdnr.network.Branch` defaults and are omitted on output when they
equal them, so serialization is canonical: parse then serialize reproduces a
canonical file byte for byte.

MATPOWER subset: ``mpc.baseMVA``, ``mpc.bus`` and ``mpc.branch`` only.
Bus type 3 marks the substation; ``Pd``/``Qd`` (MW, MVAr) become load
profiles. Branch rows are numbered from 1 in file order; status 0 marks a
tie switch that starts open; ``rateA`` (MVA, 0 = unlimited) becomes
``s_max``. Other ``mpc`` fields are ignored.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

import numpy as np

from .errors import CaseReferenceError, SchemaError
from .network import (NON_SUBSTATION, SUBSTATION, Branch, Bus, Network,
                      SwitchConfiguration)
from .scenarios import LoadProfile, RenewableProfile, ScenarioSet

SCHEMA = "sdnr-case/1"

_TOP_FIELDS = {"schema", "name", "base_mva", "base_kv", "buses", "branches",
               "profiles", "injections", "notes"}
_BUS_FIELDS = {"id", "kind", "v_min", "v_max", "p_min", "p_max", "q_min", "q_max", "v_set"}
_BRANCH_FIELDS = {"id", "from", "to", "r", "x", "s_max", "p_max", "q_max", "i_max",
                  "switchable", "status"}
_PROFILE_FIELDS = {"bus", "load", "wind", "solar"}
_INJECTION_FIELDS = {"probability", "p", "q"}

_BUS_DEFAULTS = {"kind": NON_SUBSTATION, "v_min": 0.9, "v_max": 1.1}
_BRANCH_LIMITS = ("s_max", "p_max", "q_max", "i_max")


@dataclass(frozen=True)
class CaseDocument:
    """A parsed case: network, initial switch status, and optional bus data."""

    network: Network
    initial: SwitchConfiguration
    profiles: Mapping[int, LoadProfile | RenewableProfile] = field(default_factory=dict)
    injections: ScenarioSet | None = None
    source_format: str = "json"
    notes: str = ""

    @property
    def ties(self) -> tuple[int, ...]:
        """Branch ids that start open."""
        return self.initial.open_ids

    def tie_ends(self) -> list[tuple[int, int]]:
        return [self.network.branch(b).ends for b in self.ties]


# --------------------------------------------------------------------------
# native JSON


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"missing required field {key!r}", where)
    return obj[key]


def _check_fields(obj, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError("expected an object", where)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise SchemaError(f"unknown field {unknown[0]!r}", f"{where}.{unknown[0]}")


def _num(obj: dict, key: str, where: str, default=None) -> float:
    val = obj.get(key, default)
    if val is None:
        if default is None and key in obj:
            raise SchemaError("null not allowed", f"{where}.{key}")
        return default
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise SchemaError(f"expected a number, got {val!r}", f"{where}.{key}")
    return float(val)


def _int(obj: dict, key: str, where: str) -> int:
    val = _require(obj, key, where)
    if isinstance(val, bool) or not isinstance(val, int):
        raise SchemaError(f"expected an integer, got {val!r}", f"{where}.{key}")
    return val


def _build(doc: dict, fmt: str) -> CaseDocument:
    _check_fields(doc, _TOP_FIELDS, "$")
    schema = _require(doc, "schema", "$")
    if schema != SCHEMA:
        raise SchemaError(f"unsupported schema {schema!r} (expected {SCHEMA!r})", "$.schema")
    buses = []
    for k, b in enumerate(_require(doc, "buses", "$")):
        where = f"$.buses[{k}]"
        _check_fields(b, _BUS_FIELDS, where)
        try:
            buses.append(Bus(
                id=_int(b, "id", where),
                kind=b.get("kind", NON_SUBSTATION),
                v_min=_num(b, "v_min", where, 0.9),
                v_max=_num(b, "v_max", where, 1.1),
                p_min=_num(b, "p_min", where), p_max=_num(b, "p_max", where),
                q_min=_num(b, "q_min", where), q_max=_num(b, "q_max", where),
                v_set=_num(b, "v_set", where),
            ))
        except SchemaError:
            raise
        except ValueError as exc:
            raise SchemaError(str(exc), where) from None
    bus_ids = {b.id for b in buses}
    branches = []
    status = {}
    for k, br in enumerate(_require(doc, "branches", "$")):
        where = f"$.branches[{k}]"
        _check_fields(br, _BRANCH_FIELDS, where)
        bid = _int(br, "id", where)
        for end in ("from", "to"):
            ref = _int(br, end, where)
            if ref not in bus_ids:
                raise CaseReferenceError(f"branch {bid} refers to unknown bus {ref}",
                                         f"{where}.{end}")
        st = br.get("status", "closed")
        if st not in ("open", "closed"):
            raise SchemaError(f"status must be 'open' or 'closed', got {st!r}",
                              f"{where}.status")
        switchable = br.get("switchable", True)
        if not isinstance(switchable, bool):
            raise SchemaError("expected true or false", f"{where}.switchable")
        limits = {name: _num(br, name, where, math.inf) for name in _BRANCH_LIMITS}
        try:
            r, x = (_num(br, key, where, _require(br, key, where)) for key in ("r", "x"))
            branches.append(Branch(bid, br["from"], br["to"], r, x,
                                   switchable=switchable, **limits))
        except SchemaError:
            raise
        except ValueError as exc:
            raise SchemaError(str(exc), where) from None
        status[bid] = st == "closed"
    try:
        net = Network(tuple(buses), tuple(branches),
                      base_mva=_num(doc, "base_mva", "$", 1.0),
                      base_kv=_num(doc, "base_kv", "$", 12.66),
                      name=str(doc.get("name", "")))
    except ValueError as exc:
        raise SchemaError(str(exc), "$") from None

    profiles: dict[int, LoadProfile | RenewableProfile] = {}
    for k, pr in enumerate(doc.get("profiles", [])):
        where = f"$.profiles[{k}]"
        _check_fields(pr, _PROFILE_FIELDS, where)
        bus = _int(pr, "bus", where)
        if bus not in bus_ids:
            raise CaseReferenceError(f"profile for unknown bus {bus}", f"{where}.bus")
        if bus in profiles:
            raise SchemaError(f"duplicate profile for bus {bus}", where)
        if "load" in pr:
            if "wind" in pr or "solar" in pr:
                raise SchemaError("a bus carries either a load or renewables, not both", where)
            profiles[bus] = LoadProfile(_num(pr, "load", where))
        else:
            profiles[bus] = RenewableProfile(_num(pr, "wind", where, 0.0),
                                             _num(pr, "solar", where, 0.0))

    injections = None
    if "injections" in doc:
        ps, qs, probs = [], [], []
        for k, inj in enumerate(doc["injections"]):
            where = f"$.injections[{k}]"
            _check_fields(inj, _INJECTION_FIELDS, where)
            probs.append(_num(inj, "probability", where, 1.0))
            maps = []
            for key in ("p", "q"):
                m = {}
                for sb, val in inj.get(key, {}).items():
                    try:
                        bus = int(sb)
                    except ValueError:
                        raise SchemaError(f"bus key {sb!r} is not an integer",
                                          f"{where}.{key}") from None
                    if bus not in bus_ids:
                        raise CaseReferenceError(f"injection at unknown bus {bus}",
                                                 f"{where}.{key}.{sb}")
                    m[bus] = _num(inj[key], sb, f"{where}.{key}")
                maps.append(m)
            ps.append(maps[0])
            qs.append(maps[1])
        try:
            injections = ScenarioSet.from_injections(net.bus_ids, ps, qs, probs)
        except ValueError as exc:
            raise SchemaError(str(exc), "$.injections") from None

    return CaseDocument(net, SwitchConfiguration(status), profiles, injections, fmt,
                        str(doc.get("notes", "")))


def loads_case(text: str) -> CaseDocument:
    """Parse a native JSON case from a string."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    return _build(doc, "json")


def _bus_json(b: Bus) -> dict:
    out: dict = {"id": b.id}
    if b.kind != _BUS_DEFAULTS["kind"]:
        out["kind"] = b.kind
    for name in ("v_min", "v_max"):
        if getattr(b, name) != _BUS_DEFAULTS[name]:
            out[name] = getattr(b, name)
    for name in ("p_min", "p_max", "q_min", "q_max", "v_set"):
        if getattr(b, name) is not None:
            out[name] = getattr(b, name)
    return out


def _branch_json(br: Branch, closed: bool) -> dict:
    out: dict = {"id": br.id, "from": br.from_bus, "to": br.to_bus, "r": br.r, "x": br.x}
    for name in _BRANCH_LIMITS:
        if math.isfinite(getattr(br, name)):
            out[name] = getattr(br, name)
    if not br.switchable:
        out["switchable"] = False
    out["status"] = "closed" if closed else "open"
    return out


def to_dict(case: CaseDocument) -> dict:
    net = case.network
    doc: dict = {"schema": SCHEMA}
    if net.name:
        doc["name"] = net.name
    doc["base_mva"] = net.base_mva
    doc["base_kv"] = net.base_kv
    doc["buses"] = [_bus_json(b) for b in net.buses]
    doc["branches"] = [_branch_json(br, case.initial.is_closed(br.id)) for br in net.branches]
    if case.profiles:
        rows = []
        for bus in sorted(case.profiles):
            prof = case.profiles[bus]
            if isinstance(prof, LoadProfile):
                rows.append({"bus": bus, "load": prof.p})
            else:
                rows.append({"bus": bus, "wind": prof.wind, "solar": prof.solar})
        doc["profiles"] = rows
    if case.injections is not None:
        sc = case.injections
        rows = []
        for w in range(len(sc)):
            p = sc.p_r[w] - sc.p_d[w]
            q = sc.q_r[w] - sc.q_d[w]
            rows.append({
                "probability": float(sc.probabilities[w]),
                "p": {str(b): float(v) for b, v in zip(sc.bus_ids, p) if v != 0},
                "q": {str(b): float(v) for b, v in zip(sc.bus_ids, q) if v != 0},
            })
        doc["injections"] = rows
    if case.notes:
        doc["notes"] = case.notes
    return doc


def dumps_case(case: CaseDocument) -> str:
    """Canonical JSON text (two-space indent, trailing newline)."""
    return json.dumps(to_dict(case), indent=2) + "\n"


def write_case(case: CaseDocument, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_case(case))


# --------------------------------------------------------------------------
# MATPOWER subset

_ASSIGN = re.compile(r"mpc\.(\w+)\s*=\s*")
_BUS_COLS = 13
_BRANCH_COLS = 11


def _strip_comment(line: str) -> str:
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _matrix(lines: list[str], start: int, name: str) -> tuple[list[tuple[int, list[float]]], int]:
    """Read a ``[ ... ];`` block; returns rows tagged with their 1-based line numbers."""
    rows = []
    k = start
    text = _strip_comment(lines[k])
    text = text[text.index("[") + 1:]
    while True:
        done = "]" in text
        body = text.split("]")[0] if done else text
        for chunk in body.split(";"):
            tokens = chunk.replace(",", " ").split()
            if not tokens:
                continue
            try:
                rows.append((k + 1, [float(t) for t in tokens]))
            except ValueError:
                raise SchemaError(f"non-numeric entry in mpc.{name}", f"line {k + 1}") from None
        if done:
            return rows, k
        k += 1
        if k >= len(lines):
            raise SchemaError(f"unterminated matrix mpc.{name}", f"line {start + 1}")
        text = _strip_comment(lines[k])


def loads_matpower(text: str, impedance_unit: str = "pu",
                   name: str = "") -> CaseDocument:
    """Import ``mpc.bus``/``mpc.branch`` from MATPOWER text.

    ``impedance_unit="ohm"`` converts branch r and x using the from-bus base
    kV and ``mpc.baseMVA``; by default they are taken as per-unit.
    """
    if impedance_unit not in ("pu", "ohm"):
        raise ValueError("impedance_unit must be 'pu' or 'ohm'")
    lines = text.splitlines()
    base_mva = None
    mats: dict[str, list] = {}
    k = 0
    while k < len(lines):
        line = _strip_comment(lines[k])
        m = _ASSIGN.search(line)
        if m:
            key = m.group(1)
            rest = line[m.end():]
            if key == "baseMVA":
                try:
                    base_mva = float(rest.strip().rstrip(";"))
                except ValueError:
                    raise SchemaError("mpc.baseMVA is not a number", f"line {k + 1}") from None
            elif key in ("bus", "branch"):
                if "[" not in rest:
                    raise SchemaError(f"mpc.{key} must be a literal matrix", f"line {k + 1}")
                mats[key], k = _matrix(lines, k, key)
        k += 1
    if base_mva is None or base_mva <= 0:
        raise SchemaError("missing or non-positive mpc.baseMVA", "mpc.baseMVA")
    for key in ("bus", "branch"):
        if key not in mats:
            raise SchemaError(f"missing mpc.{key}", f"mpc.{key}")

    buses, profiles, base_kv = [], {}, {}
    for lineno, row in mats["bus"]:
        if len(row) < _BUS_COLS:
            raise SchemaError(f"bus row has {len(row)} columns, need {_BUS_COLS}",
                              f"line {lineno}")
        bid, btype = int(row[0]), int(row[1])
        pd, qd = row[2] / base_mva, row[3] / base_mva
        vmax, vmin = row[11], row[12]
        base_kv[bid] = row[9]
        try:
            if btype == 3:
                big = 10.0 * max(1.0, sum(r[2] for _, r in mats["bus"]) / base_mva)
                buses.append(Bus(bid, SUBSTATION, vmin, vmax, -big, big, -big, big,
                                 v_set=row[7] or 1.0))
            else:
                buses.append(Bus(bid, NON_SUBSTATION, vmin, vmax))
                profiles[bid] = LoadProfile(pd)
        except ValueError as exc:
            raise SchemaError(str(exc), f"line {lineno}") from None
        if btype != 3 and qd != 0 and pd == 0:
            raise SchemaError("reactive-only loads are not supported", f"line {lineno}")
    known = set(base_kv)
    branches, status = [], {}
    for idx, (lineno, row) in enumerate(mats["branch"], start=1):
        if len(row) < _BRANCH_COLS:
            raise SchemaError(f"branch row has {len(row)} columns, need {_BRANCH_COLS}",
                              f"line {lineno}")
        f, t = int(row[0]), int(row[1])
        for end in (f, t):
            if end not in known:
                raise CaseReferenceError(f"branch refers to unknown bus {end}", f"line {lineno}")
        r, x = row[2], row[3]
        if impedance_unit == "ohm":
            zbase = base_kv[f] ** 2 / base_mva
            r, x = r / zbase, x / zbase
        s_max = row[5] / base_mva if row[5] > 0 else math.inf
        try:
            branches.append(Branch(idx, f, t, r, x, s_max=s_max))
        except ValueError as exc:
            raise SchemaError(str(exc), f"line {lineno}") from None
        status[idx] = row[10] != 0
    kv = next(iter(base_kv.values()), 12.66) or 12.66
    try:
        net = Network(tuple(buses), tuple(branches), base_mva=base_mva, base_kv=kv, name=name)
    except ValueError as exc:
        raise SchemaError(str(exc), "mpc.bus") from None
    return CaseDocument(net, SwitchConfiguration(status), profiles, None, "matpower")


# --------------------------------------------------------------------------
# entry points


def parse_case(path: str | os.PathLike, impedance_unit: str = "pu") -> CaseDocument:
    """Parse a case file; ``.m`` files go through the MATPOWER importer."""
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SchemaError(f"cannot read case file: {exc.strerror}", path) from None
    if path.endswith(".m"):
        stem = os.path.splitext(os.path.basename(path))[0]
        return loads_matpower(text, impedance_unit, name=stem)
    return loads_case(text)


BUNDLED = ("case2", "case33", "case123", "fig2_10bus")


def bundled_path(name: str) -> str:
    if name not in BUNDLED:
        raise KeyError(f"no bundled case {name!r}; choose from {', '.join(BUNDLED)}")
    return str(resources.files("sdnr").joinpath("data", f"{name}.json"))


def load_bundled(name: str) -> CaseDocument:
    return parse_case(bundled_path(name))


def resolve_case(spec: str) -> CaseDocument:
    """A bundled case name or a filesystem path."""
    if spec in BUNDLED and not os.path.exists(spec):
        return load_bundled(spec)
    return parse_case(spec)


def profile_arrays(case: CaseDocument) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-bus nominal load, wind and solar capacity aligned with ``bus_ids``."""
    net = case.network
    load = np.zeros(len(net.bus_ids))
    wind = np.zeros_like(load)
    solar = np.zeros_like(load)
    for k, b in enumerate(net.bus_ids):
        prof = case.profiles.get(b)
        if isinstance(prof, LoadProfile):
            load[k] = prof.p
        elif isinstance(prof, RenewableProfile):
            wind[k], solar[k] = prof.wind, prof.solar
    return load, wind, solar
