from __future__ import annotations

import numpy as np
import pytest

from sdnr.casefile import load_bundled
from sdnr.network import SUBSTATION, Branch, Bus, Network
from sdnr.scenarios import ScenarioSet


def substation(bus_id: int = 0, cap: float = 10.0) -> Bus:
    return Bus(bus_id, SUBSTATION, p_min=-cap, p_max=cap, q_min=-cap, q_max=cap)


def make_network(edges, rx=(0.01, 0.01), root: int = 0, name: str = "") -> Network:
    """Branch ids follow the edge order from 1; an edge may carry its own (r, x)."""
    ids = sorted({b for e in edges for b in e[:2]})
    buses = tuple(substation(b) if b == root else Bus(b) for b in ids)
    branches = []
    for k, e in enumerate(edges, start=1):
        r, x = e[2:4] if len(e) >= 4 else rx
        branches.append(Branch(k, e[0], e[1], r, x))
    return Network(buses, tuple(branches), name=name)


@pytest.fixture
def triangle():
    # substation 0, symmetric paths to bus 2
    return make_network([(0, 1), (1, 2), (0, 2, 0.02, 0.02)])


@pytest.fixture
def fig2():
    return load_bundled("fig2_10bus")


@pytest.fixture
def case33():
    return load_bundled("case33")


def single(net: Network, p: dict, q: dict | None = None) -> ScenarioSet:
    return ScenarioSet.single(net.bus_ids, p, q or {})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
