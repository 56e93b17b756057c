"""Spanning-tree counting (matrix-tree theorem) and enumeration."""

from __future__ import annotations

from typing import Iterator, Sequence

from .network import Network


def _bareiss_det(m: list[list[int]]) -> int:
    """Exact integer determinant by fraction-free elimination."""
    n = len(m)
    if n == 0:
        return 1
    a = [row[:] for row in m]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def count_spanning_trees(net: Network, branches: Sequence[int] | None = None) -> int:
    """Number of spanning trees of the graph on ``branches`` (default: all).

    Parallel branches count as distinct edges. Uses the reduced Laplacian
    with the substation row/column removed.
    """
    branches = net.branch_ids if branches is None else branches
    idx = net.bus_index
    n = len(net.buses)
    lap = [[0] * n for _ in range(n)]
    for bid in branches:
        br = net.branch(bid)
        i, j = idx[br.from_bus], idx[br.to_bus]
        lap[i][i] += 1
        lap[j][j] += 1
        lap[i][j] -= 1
        lap[j][i] -= 1
    root = idx[net.substation]
    keep = [k for k in range(n) if k != root]
    reduced = [[lap[i][j] for j in keep] for i in keep]
    return _bareiss_det(reduced)


def enumerate_spanning_trees(net: Network) -> Iterator[frozenset[int]]:
    """Yield every spanning tree of the all-closed graph as a set of branch ids.

    Include/exclude backtracking over branches in ascending id: a branch is
    included only if it joins two components, excluded only if the remaining
    candidate graph stays connected. Every leaf is therefore a spanning tree
    and no tree is produced twice.
    """
    bus_ids = net.bus_ids
    n = len(bus_ids)
    edges = [(br.id, br.from_bus, br.to_bus) for br in sorted(net.branches, key=lambda b: b.id)]
    m = len(edges)

    def connected(avail: list[bool]) -> bool:
        parent = {b: b for b in bus_ids}

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        comps = n
        for k, (_, f, t) in enumerate(edges):
            if avail[k]:
                rf, rt = find(f), find(t)
                if rf != rt:
                    parent[rf] = rt
                    comps -= 1
        return comps == 1

    if n == 1:
        yield frozenset()
        return
    avail = [True] * m
    if not connected(avail):
        return
    chosen: list[int] = []

    # union-find with rollback for the included-branch forest
    parent = {b: b for b in bus_ids}
    rank = {b: 0 for b in bus_ids}

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    def rec(k: int):
        if len(chosen) == n - 1:
            yield frozenset(chosen)
            return
        if k == m:
            return
        bid, f, t = edges[k]
        rf, rt = find(f), find(t)
        if rf != rt:
            if rank[rf] > rank[rt]:
                rf, rt = rt, rf
            parent[rf] = rt
            bumped = rank[rf] == rank[rt]
            if bumped:
                rank[rt] += 1
            chosen.append(bid)
            yield from rec(k + 1)
            chosen.pop()
            if bumped:
                rank[rt] -= 1
            parent[rf] = rf
        avail[k] = False
        if connected(avail):
            yield from rec(k + 1)
        avail[k] = True

    yield from rec(0)
