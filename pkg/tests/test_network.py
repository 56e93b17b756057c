from __future__ import annotations

import pytest

from conftest import make_network, substation
from sdnr.errors import ConfigurationMismatchError, TopologyError
from sdnr.network import (SUBSTATION, Branch, Bus, Network, SwitchConfiguration, bfs_tree,
                          closed_components, is_connected, is_radial, merge_substations)


def test_bus_requires_bounds_only_on_substation():
    with pytest.raises(ValueError):
        Bus(0, SUBSTATION)
    with pytest.raises(ValueError):
        Bus(1, p_min=0.0, p_max=1.0, q_min=0.0, q_max=1.0)
    with pytest.raises(ValueError):
        Bus(1, v_min=1.1, v_max=0.9)
    assert substation().voltage_setpoint == 1.0


def test_branch_validation():
    with pytest.raises(ValueError):
        Branch(1, 2, 2, 0.1, 0.1)
    with pytest.raises(ValueError):
        Branch(1, 1, 2, -0.1, 0.1)
    with pytest.raises(ValueError):
        Branch(1, 1, 2, 0.0, 0.0)
    br = Branch(1, 1, 2, 0.1, 0.2)
    assert br.other(1) == 2 and br.other(2) == 1
    with pytest.raises(ValueError):
        br.other(3)


def test_network_rejects_bad_graphs():
    with pytest.raises(ValueError, match="duplicate bus"):
        Network((substation(0), Bus(0)), ())
    with pytest.raises(ValueError, match="unknown bus"):
        Network((substation(0), Bus(1)), (Branch(1, 0, 5, 0.1, 0.1),))
    with pytest.raises(ValueError, match="no substation"):
        Network((Bus(0), Bus(1)), (Branch(1, 0, 1, 0.1, 0.1),))
    two = Network((substation(0), substation(1)), (Branch(1, 0, 1, 0.1, 0.1),))
    with pytest.raises(TopologyError):
        two.substation


def test_switch_configuration_identity_and_errors(triangle):
    a = SwitchConfiguration.with_open(triangle, [3])
    b = SwitchConfiguration({1: True, 2: True, 3: False})
    assert a == b and hash(a) == hash(b)
    assert a.open_ids == (3,) and a.closed_ids == (1, 2)
    with pytest.raises(ConfigurationMismatchError):
        SwitchConfiguration.with_open(triangle, [9])
    with pytest.raises(ConfigurationMismatchError):
        SwitchConfiguration({1: True}).check(triangle)
    with pytest.raises(ConfigurationMismatchError):
        a.is_closed(7)


def test_radiality(triangle):
    assert not is_radial(triangle, SwitchConfiguration.all_closed(triangle))
    for b in (1, 2, 3):
        assert is_radial(triangle, SwitchConfiguration.with_open(triangle, [b]))
    assert not is_radial(triangle, SwitchConfiguration.with_open(triangle, [1, 2]))
    assert not is_connected(triangle, [1])
    assert closed_components(triangle, [2]) == {0: 0, 1: 1, 2: 1}


def test_bfs_tree_visits_ascending():
    net = make_network([(0, 2), (0, 1), (1, 3), (2, 3)])
    order, via = bfs_tree(net, net.branch_ids)
    assert order == [0, 1, 2, 3]
    # bus 3 is reached first through bus 1
    assert via == {1: 2, 2: 1, 3: 3}


def test_merge_substations_turns_path_into_loop():
    # two substations at the ends of a path: one redundant branch
    buses = (substation(0, 1.0), Bus(1), Bus(2), substation(3, 2.0))
    branches = (Branch(1, 0, 1, 0.01, 0.01), Branch(2, 1, 2, 0.01, 0.01),
                Branch(3, 2, 3, 0.01, 0.01), Branch(4, 0, 3, 0.01, 0.01))
    merged = merge_substations(Network(buses, branches))
    assert merged.merged_substations == (0, 3)
    assert merged.substation == 0
    assert merged.bus(0).p_max == 3.0
    # the branch joining the two substations disappears
    assert merged.branch_ids == (1, 2, 3)
    assert merged.branch(3).ends == (2, 0)
    assert merged.n_loops == 1
