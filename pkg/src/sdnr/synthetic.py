"""Seeded random feeders and scenario sets for property and acceptance tests."""

from __future__ import annotations

import numpy as np

from .network import SUBSTATION, Branch, Bus, Network
from .scenarios import ScenarioSet


def random_network(rng: np.random.Generator, n_bus: int, n_loops: int,
                   r_range=(0.01, 0.1), x_range=(0.01, 0.1), name: str = "") -> Network:
    """Random tree on ``n_bus`` buses (substation 0) plus ``n_loops`` extra branches.

    Extra branches join distinct non-adjacent bus pairs, so every loop has
    at least three branches and no parallel branches appear.
    """
    if n_bus < 3:
        raise ValueError("need at least three buses")
    max_extra = n_bus * (n_bus - 1) // 2 - (n_bus - 1)
    if not 0 <= n_loops <= max_extra:
        raise ValueError(f"cannot add {n_loops} loops to {n_bus} buses")
    edges = []
    for b in range(1, n_bus):
        # bias toward recent buses to get feeder-like depth
        lo = max(0, b - 4)
        edges.append((int(rng.integers(lo, b)), b))
    present = {frozenset(e) for e in edges}
    while len(edges) < n_bus - 1 + n_loops:
        a, b = sorted(int(v) for v in rng.choice(n_bus, 2, replace=False))
        if frozenset((a, b)) in present:
            continue
        present.add(frozenset((a, b)))
        edges.append((a, b))
    cap = 10.0
    buses = (Bus(0, SUBSTATION, p_min=-cap, p_max=cap, q_min=-cap, q_max=cap),)
    buses += tuple(Bus(b) for b in range(1, n_bus))
    branches = tuple(
        Branch(k, f, t, float(rng.uniform(*r_range)), float(rng.uniform(*x_range)))
        for k, (f, t) in enumerate(edges, start=1)
    )
    return Network(buses, branches, name=name)


def random_scenarios(rng: np.random.Generator, net: Network, n_scenarios: int,
                     renewable_share: float = 0.3, load_range=(0.01, 0.05),
                     capacity_range=(0.02, 0.1), pf_load: float = 0.95) -> ScenarioSet:
    """Mixed load/renewable buses with scenario-wise random levels.

    Each non-substation bus is a load with probability ``1 - renewable_share``
    and a renewable source otherwise. Loads vary within +-30% of a nominal
    value; renewables produce a uniform fraction of their capacity.
    Probabilities are drawn from a flat Dirichlet.
    """
    ids = net.bus_ids
    n = len(ids)
    sub = net.bus_index[net.substation]
    is_ren = rng.random(n) < renewable_share
    is_ren[sub] = False
    nominal = rng.uniform(*load_range, n)
    capacity = rng.uniform(*capacity_range, n)
    p_d = np.zeros((n_scenarios, n))
    p_r = np.zeros((n_scenarios, n))
    for w in range(n_scenarios):
        p_d[w] = np.where(is_ren, 0.0, nominal * rng.uniform(0.7, 1.3, n))
        p_r[w] = np.where(is_ren, capacity * rng.uniform(0.0, 1.0, n), 0.0)
    p_d[:, sub] = 0.0
    tan = np.tan(np.arccos(pf_load))
    probs = rng.dirichlet(np.ones(n_scenarios))
    probs[-1] = 1.0 - probs[:-1].sum()
    return ScenarioSet(ids, p_r=p_r, p_d=p_d, q_r=np.zeros_like(p_r), q_d=p_d * tan,
                       probabilities=probs, meta={"renewable_buses": [ids[k] for k in
                                                                      np.flatnonzero(is_ren)]})
