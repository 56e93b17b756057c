"""Loops of a meshed feeder: cycle basis, merging after openings, sub-paths."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import TopologyError
from .network import Network, bfs_tree


@dataclass(frozen=True)
class Loop:
    """A simple cycle in canonical traversal order.

    Branch ``branches[k]`` joins ``buses[k]`` and ``buses[k+1]``;
    ``signs[k]`` is +1 when that traversal agrees with the branch's
    reference direction. ``buses[0] == buses[-1]`` is the lowest bus id.
    """

    branches: tuple[int, ...]
    signs: tuple[int, ...]
    buses: tuple[int, ...]

    def __post_init__(self):
        n = len(self.branches)
        if n < 2 or len(self.signs) != n or len(self.buses) != n + 1:
            raise ValueError("malformed loop")
        if self.buses[0] != self.buses[-1]:
            raise ValueError("loop must close on its first bus")
        if len(set(self.branches)) != n or len(set(self.buses[:-1])) != n:
            raise ValueError("loop must be a simple cycle")

    def __contains__(self, branch_id) -> bool:
        return branch_id in self.branch_set

    def __len__(self) -> int:
        return len(self.branches)

    @property
    def branch_set(self) -> frozenset[int]:
        return frozenset(self.branches)

    @property
    def bus_set(self) -> frozenset[int]:
        return frozenset(self.buses[:-1])

    def ends(self) -> dict[int, tuple[int, int]]:
        """Reference (from, to) of each loop branch, recovered from the signs."""
        out = {}
        for k, bid in enumerate(self.branches):
            a, b = self.buses[k], self.buses[k + 1]
            out[bid] = (a, b) if self.signs[k] > 0 else (b, a)
        return out


@dataclass(frozen=True)
class SubPath:
    """Contiguous stretch of a loop between two injecting buses."""

    branches: tuple[int, ...]
    signs: tuple[int, ...]
    buses: tuple[int, ...]

    def __post_init__(self):
        if not self.branches:
            raise ValueError("empty sub-path")

    @property
    def boundary(self) -> tuple[int, int]:
        return (self.buses[0], self.buses[-1])


def loop_from_edges(ends: dict[int, tuple[int, int]]) -> Loop:
    """Build the canonical Loop for a set of branches forming one simple cycle.

    ``ends`` maps branch id to its reference (from, to) pair.
    """
    adj: dict[int, list[tuple[int, int]]] = {}
    for bid, (f, t) in ends.items():
        adj.setdefault(f, []).append((t, bid))
        adj.setdefault(t, []).append((f, bid))
    if len(ends) < 2 or any(len(v) != 2 for v in adj.values()):
        raise TopologyError(f"branches {sorted(ends)} do not form a simple cycle")
    start = min(adj)
    first = min(adj[start])
    buses = [start]
    branches = []
    signs = []
    bus, nxt = start, first
    while True:
        nb, bid = nxt
        branches.append(bid)
        signs.append(1 if ends[bid][0] == bus else -1)
        buses.append(nb)
        if nb == start:
            break
        a, b = adj[nb]
        nxt = a if a[1] != bid else b
        bus = nb
    if len(branches) != len(ends):
        raise TopologyError(f"branches {sorted(ends)} form more than one cycle")
    return Loop(tuple(branches), tuple(signs), tuple(buses))


def _mask(branches: Iterable[int], index: dict[int, int]) -> int:
    m = 0
    for b in branches:
        m |= 1 << index.setdefault(b, len(index))
    return m


def _gf2_rank(masks: Sequence[int]) -> int:
    basis: dict[int, int] = {}
    for m in masks:
        while m:
            top = m.bit_length() - 1
            if top not in basis:
                basis[top] = m
                break
            m ^= basis[top]
    return len(basis)


def _tree_path(bus: int, via: dict[int, int], net: Network) -> list[int]:
    """Buses from ``bus`` up to the root."""
    path = [bus]
    while bus in via:
        bus = net.branch(via[bus]).other(bus)
        path.append(bus)
    return path


def _fundamental_cycle(net: Network, gen: int, via: dict[int, int]) -> dict[int, tuple[int, int]]:
    br = net.branch(gen)
    up = _tree_path(br.from_bus, via, net)
    vp = _tree_path(br.to_bus, via, net)
    vset = set(vp)
    lca = next(b for b in up if b in vset)
    edges = {gen: br.ends}
    for path in (up, vp):
        for bus in path[: path.index(lca)]:
            tb = net.branch(via[bus])
            edges[tb.id] = tb.ends
    return edges


def _remove_chords(net: Network, cycle: dict[int, tuple[int, int]], gen: int,
                   closed: set[int]) -> dict[int, tuple[int, int]]:
    while True:
        loop = loop_from_edges(cycle)
        pos = {b: k for k, b in enumerate(loop.buses[:-1])}
        n = len(loop.branches)
        chord = None
        for bid in sorted(closed - set(cycle)):
            f, t = net.branch(bid).ends
            if f in pos and t in pos:
                d = abs(pos[f] - pos[t])
                if d not in (1, n - 1):
                    chord = bid
                    break
        if chord is None:
            return cycle
        f, t = net.branch(chord).ends
        a, b = sorted((pos[f], pos[t]))
        side = set(loop.branches[a:b])
        keep = side if gen in side else set(loop.branches) - side
        cycle = {bid: cycle[bid] for bid in keep}
        cycle[chord] = net.branch(chord).ends


def find_loops(net: Network, closed: Iterable[int] | None = None) -> list[Loop]:
    """Chordless cycle basis of the closed subgraph, one loop per non-tree branch.

    The spanning tree is a BFS tree from the substation; loops are returned in
    ascending id of their generating non-tree branch.
    """
    closed = set(net.branch_ids if closed is None else closed)
    order, via = bfs_tree(net, closed)
    if len(order) != len(net.buses):
        missing = sorted(set(net.bus_ids) - set(order))
        raise TopologyError(f"network is disconnected; unreachable buses {missing}")
    tree = set(via.values())
    index: dict[int, int] = {}
    loops: list[Loop] = []
    masks: list[int] = []
    for gen in sorted(closed - tree):
        raw = _fundamental_cycle(net, gen, via)
        cyc = _remove_chords(net, raw, gen, closed)
        m = _mask(cyc, index)
        if _gf2_rank(masks + [m]) != len(masks) + 1:
            cyc = raw
            m = _mask(cyc, index)
        loops.append(loop_from_edges(cyc))
        masks.append(m)
    return loops


def _cycles_in(ends: dict[int, tuple[int, int]]) -> list[dict[int, tuple[int, int]]]:
    """Split an edge set with even degrees into simple cycles (basis of its cycle space)."""
    adj: dict[int, list[tuple[int, int]]] = {}
    for bid in sorted(ends):
        f, t = ends[bid]
        adj.setdefault(f, []).append((t, bid))
        adj.setdefault(t, []).append((f, bid))
    via: dict[int, tuple[int, int]] = {}
    seen: set[int] = set()
    tree: set[int] = set()
    for root in sorted(adj):
        if root in seen:
            continue
        seen.add(root)
        stack = [root]
        while stack:
            bus = stack.pop()
            for nb, bid in sorted(adj[bus]):
                if nb not in seen:
                    seen.add(nb)
                    via[nb] = (bus, bid)
                    tree.add(bid)
                    stack.append(nb)

    def up(bus):
        path = [bus]
        while bus in via:
            bus = via[bus][0]
            path.append(bus)
        return path

    out = []
    for gen in sorted(set(ends) - tree):
        f, t = ends[gen]
        a, b = up(f), up(t)
        bset = set(b)
        lca = next(x for x in a if x in bset)
        cyc = {gen: ends[gen]}
        for path in (a, b):
            for bus in path[: path.index(lca)]:
                bid = via[bus][1]
                cyc[bid] = ends[bid]
        out.append(cyc)
    return out


def update_loop_after_opening(loops: Sequence[Loop], opened: int) -> list[Loop]:
    """Remove the first loop containing ``opened`` and fold it into the others.

    Every other loop through ``opened`` is replaced by its symmetric
    difference with the removed loop, i.e. the larger loop that survives once
    the shared branch is open. The result has one loop fewer. If no loop
    contains ``opened`` the list is returned unchanged with a warning, since
    opening such a branch would disconnect the network.
    """
    loops = list(loops)
    hit = [k for k, lp in enumerate(loops) if opened in lp]
    if not hit:
        warnings.warn(f"branch {opened} lies in no loop; loops unchanged", RuntimeWarning,
                      stacklevel=2)
        return loops
    pivot = loops[hit[0]]
    pivot_ends = pivot.ends()
    index: dict[int, int] = {}
    out: list[Loop] = []
    for k, lp in enumerate(loops):
        if k == hit[0]:
            continue
        if opened not in lp:
            out.append(lp)
            continue
        ends = {**pivot_ends, **lp.ends()}
        diff = pivot.branch_set ^ lp.branch_set
        sym = {b: ends[b] for b in diff}
        try:
            out.append(loop_from_edges(sym))
            continue
        except TopologyError:
            pass
        # figure-eight or disjoint union: keep any piece that stays independent
        others = [_mask(o.branches, index) for o in out] + [
            _mask(o.branches, index) for j, o in enumerate(loops) if j > k and j != hit[0]
        ]
        for piece in _cycles_in(sym):
            if _gf2_rank(others + [_mask(piece, index)]) == len(others) + 1:
                out.append(loop_from_edges(piece))
                break
        else:
            raise TopologyError(f"cannot update loop {lp.branches} after opening {opened}")
    return out


def divide_into_subpaths(loop: Loop, injecting_buses: Iterable[int]) -> list[SubPath]:
    """Cut ``loop`` at each injecting bus; sub-paths follow the loop traversal.

    With a single injecting bus the only sub-path is the whole loop, starting
    and ending at that bus.
    """
    inj = set(injecting_buses)
    if not inj:
        raise ValueError("need at least one injecting bus")
    stray = inj - loop.bus_set
    if stray:
        raise ValueError(f"bus(es) {sorted(stray)} not on the loop")
    n = len(loop.branches)
    cuts = sorted(k for k, b in enumerate(loop.buses[:-1]) if b in inj)
    out = []
    for j, start in enumerate(cuts):
        stop = cuts[(j + 1) % len(cuts)]
        length = (stop - start) % n or n
        idx = [(start + s) % n for s in range(length)]
        buses = tuple(loop.buses[i] for i in idx) + (loop.buses[(start + length) % n],)
        out.append(SubPath(
            branches=tuple(loop.branches[i] for i in idx),
            signs=tuple(loop.signs[i] for i in idx),
            buses=buses,
        ))
    return out
