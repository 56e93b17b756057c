"""Switched feeder model: buses, branches, switch configurations, radiality."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping

from .errors import ConfigurationMismatchError, TopologyError

SUBSTATION = "substation"
NON_SUBSTATION = "non-substation"
_INF = math.inf


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = NON_SUBSTATION
    v_min: float = 0.9
    v_max: float = 1.1
    # substation-only fields
    p_min: float | None = None
    p_max: float | None = None
    q_min: float | None = None
    q_max: float | None = None
    v_set: float | None = None

    def __post_init__(self):
        if self.kind not in (SUBSTATION, NON_SUBSTATION):
            raise ValueError(f"bus {self.id}: unknown kind {self.kind!r}")
        if not (0 < self.v_min <= self.v_max):
            raise ValueError(f"bus {self.id}: need 0 < v_min <= v_max")
        bounds = (self.p_min, self.p_max, self.q_min, self.q_max)
        if self.is_substation:
            if any(b is None for b in bounds):
                raise ValueError(f"substation bus {self.id} needs p/q injection bounds")
            if self.p_min > self.p_max or self.q_min > self.q_max:
                raise ValueError(f"substation bus {self.id}: min bound above max bound")
        elif any(b is not None for b in bounds) or self.v_set is not None:
            raise ValueError(f"bus {self.id}: injection bounds only allowed on substations")

    @property
    def is_substation(self) -> bool:
        return self.kind == SUBSTATION

    @property
    def voltage_setpoint(self) -> float:
        """Voltage magnitude held at a substation (1.0 pu when unset)."""
        return 1.0 if self.v_set is None else self.v_set


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    s_max: float = _INF
    p_max: float = _INF
    q_max: float = _INF
    i_max: float = _INF
    switchable: bool = True

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValueError(f"branch {self.id} is a self-loop at bus {self.from_bus}")
        if self.r < 0 or self.x < 0 or self.r + self.x <= 0:
            raise ValueError(f"branch {self.id}: need r, x >= 0 and r + x > 0")
        for name in ("s_max", "p_max", "q_max", "i_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"branch {self.id}: {name} must be positive")

    @property
    def ends(self) -> tuple[int, int]:
        return (self.from_bus, self.to_bus)

    def other(self, bus: int) -> int:
        if bus == self.from_bus:
            return self.to_bus
        if bus == self.to_bus:
            return self.from_bus
        raise ValueError(f"bus {bus} is not an end of branch {self.id}")


@dataclass(frozen=True)
class Network:
    """Immutable bus/branch graph with per-unit data.

    ``merged_substations`` records the original ids collapsed into the single
    substation bus by :func:`merge_substations`; it is empty when the input
    already had one substation.
    """

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_mva: float = 1.0
    base_kv: float = 12.66
    name: str = ""
    merged_substations: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate bus id")
        bids = [br.id for br in self.branches]
        if len(set(bids)) != len(bids):
            raise ValueError("duplicate branch id")
        known = set(ids)
        for br in self.branches:
            for end in br.ends:
                if end not in known:
                    raise ValueError(f"branch {br.id} refers to unknown bus {end}")
        if not any(b.is_substation for b in self.buses):
            raise ValueError("network has no substation bus")
        if self.base_mva <= 0 or self.base_kv <= 0:
            raise ValueError("base values must be positive")

    @cached_property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    @cached_property
    def branch_ids(self) -> tuple[int, ...]:
        return tuple(br.id for br in self.branches)

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {bid: k for k, bid in enumerate(self.bus_ids)}

    @cached_property
    def branch_index(self) -> dict[int, int]:
        return {bid: k for k, bid in enumerate(self.branch_ids)}

    @cached_property
    def _bus_map(self) -> dict[int, Bus]:
        return {b.id: b for b in self.buses}

    @cached_property
    def _branch_map(self) -> dict[int, Branch]:
        return {br.id: br for br in self.branches}

    def bus(self, bus_id: int) -> Bus:
        return self._bus_map[bus_id]

    def branch(self, branch_id: int) -> Branch:
        try:
            return self._branch_map[branch_id]
        except KeyError:
            raise ConfigurationMismatchError(f"unknown branch id {branch_id}") from None

    @cached_property
    def substation(self) -> int:
        subs = [b.id for b in self.buses if b.is_substation]
        if len(subs) != 1:
            raise TopologyError(
                f"expected exactly one substation, found {subs}; merge them first"
            )
        return subs[0]

    @cached_property
    def incident(self) -> dict[int, tuple[int, ...]]:
        """Branch ids incident to each bus, ascending."""
        inc: dict[int, list[int]] = {b: [] for b in self.bus_ids}
        for br in self.branches:
            inc[br.from_bus].append(br.id)
            inc[br.to_bus].append(br.id)
        return {b: tuple(sorted(v)) for b, v in inc.items()}

    @property
    def n_loops(self) -> int:
        """Cycle rank of the all-closed graph (assumes it is connected)."""
        return len(self.branches) - len(self.buses) + 1


@dataclass(frozen=True)
class SwitchConfiguration:
    """Open/closed status per branch id (True = closed, alpha = 1)."""

    status: Mapping[int, bool] = field(default_factory=dict)

    def __post_init__(self):
        frozen = tuple(sorted((int(k), bool(v)) for k, v in dict(self.status).items()))
        object.__setattr__(self, "status", dict(frozen))
        object.__setattr__(self, "_key", frozen)

    def __hash__(self):
        return hash(self._key)

    def __eq__(self, other):
        if not isinstance(other, SwitchConfiguration):
            return NotImplemented
        return self._key == other._key

    @classmethod
    def all_closed(cls, net: Network) -> "SwitchConfiguration":
        return cls({b: True for b in net.branch_ids})

    @classmethod
    def with_open(cls, net: Network, opened: Iterable[int]) -> "SwitchConfiguration":
        opened = set(opened)
        unknown = opened - set(net.branch_ids)
        if unknown:
            raise ConfigurationMismatchError(f"unknown branch id(s) {sorted(unknown)}")
        return cls({b: b not in opened for b in net.branch_ids})

    def is_closed(self, branch_id: int) -> bool:
        try:
            return self.status[branch_id]
        except KeyError:
            raise ConfigurationMismatchError(f"branch {branch_id} not in configuration") from None

    @property
    def open_ids(self) -> tuple[int, ...]:
        return tuple(b for b, closed in self._key if not closed)

    @property
    def closed_ids(self) -> tuple[int, ...]:
        return tuple(b for b, closed in self._key if closed)

    def check(self, net: Network) -> None:
        ours = set(self.status)
        theirs = set(net.branch_ids)
        if ours != theirs:
            extra = sorted(ours - theirs)
            missing = sorted(theirs - ours)
            raise ConfigurationMismatchError(
                f"configuration mismatch: unknown {extra}, missing {missing}"
            )


def closed_components(net: Network, closed: Iterable[int]) -> dict[int, int]:
    """Label each bus with the smallest bus id of its closed-branch component."""
    parent = {b: b for b in net.bus_ids}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for bid in closed:
        br = net.branch(bid)
        ra, rb = find(br.from_bus), find(br.to_bus)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return {b: find(b) for b in net.bus_ids}


def is_radial(net: Network, cfg: SwitchConfiguration) -> bool:
    """True iff the closed branches form a spanning tree rooted at the substation."""
    cfg.check(net)
    closed = cfg.closed_ids
    if len(closed) != len(net.buses) - 1:
        return False
    labels = closed_components(net, closed)
    root = labels[net.substation]
    return all(lab == root for lab in labels.values())


def is_connected(net: Network, closed: Iterable[int] | None = None) -> bool:
    closed = net.branch_ids if closed is None else closed
    labels = closed_components(net, closed)
    return len(set(labels.values())) == 1


def bfs_tree(net: Network, closed: Iterable[int]) -> tuple[list[int], dict[int, int]]:
    """Breadth-first order from the substation over closed branches.

    Returns the visiting order and, for every non-root bus, the id of the
    branch linking it to its parent. Neighbors are visited in ascending bus
    id (ties on parallel branches by lowest branch id).
    """
    closed = set(closed)
    root = net.substation
    order = [root]
    via: dict[int, int] = {}
    seen = {root}
    queue = deque([root])
    while queue:
        bus = queue.popleft()
        nbrs = []
        for bid in net.incident[bus]:
            if bid in closed:
                nbrs.append((net.branch(bid).other(bus), bid))
        for nb, bid in sorted(nbrs):
            if nb not in seen:
                seen.add(nb)
                via[nb] = bid
                order.append(nb)
                queue.append(nb)
    return order, via


def merge_substations(net: Network) -> Network:
    """Collapse all substation buses into the lowest-id one (zero impedance).

    Branches joining two substations become self-loops and are dropped.
    Injection bounds are summed; voltage data come from the kept bus.
    """
    subs = [b for b in net.buses if b.is_substation]
    if len(subs) <= 1:
        return net
    keep = min(subs, key=lambda b: b.id)
    sub_ids = {b.id for b in subs}
    merged_bus = replace(
        keep,
        p_min=sum(b.p_min for b in subs),
        p_max=sum(b.p_max for b in subs),
        q_min=sum(b.q_min for b in subs),
        q_max=sum(b.q_max for b in subs),
    )
    buses = [merged_bus] + [b for b in net.buses if b.id not in sub_ids]
    buses.sort(key=lambda b: net.bus_index[b.id])
    branches = []
    for br in net.branches:
        f = keep.id if br.from_bus in sub_ids else br.from_bus
        t = keep.id if br.to_bus in sub_ids else br.to_bus
        if f == t:
            continue
        branches.append(replace(br, from_bus=f, to_bus=t))
    return Network(
        buses=tuple(buses),
        branches=tuple(branches),
        base_mva=net.base_mva,
        base_kv=net.base_kv,
        name=net.name,
        merged_substations=tuple(sorted(sub_ids)),
    )
