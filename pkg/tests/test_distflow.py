from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from acpf import ac_power_flow
from conftest import make_network, single, substation
from sdnr.casefile import load_bundled
from sdnr.distflow import (REJECT, SolverConfig, loop_injections, power_balance_residual,
                           soc_exactness_residual, solve_opf_r, solve_sopf_r)
from sdnr.errors import InfeasibleError, ScenarioSolveError, TopologyError
from sdnr.loops import find_loops
from sdnr.network import Branch, Bus, Network, SwitchConfiguration
from sdnr.scenarios import ScenarioSet
from sdnr.synthetic import random_network, random_scenarios


def test_two_bus_closed_form():
    doc = load_bundled("case2")
    net = doc.network
    sol = solve_opf_r(net, SwitchConfiguration.all_closed(net), doc.injections[0])
    # l solves 0.0002 l^2 - 0.998 l + 0.01 = 0 (smaller root)
    a, b, c = 0.0002, -0.998, 0.01
    ell = (-b - math.sqrt(b * b - 4 * a * c)) / (2 * a)
    assert sol.objective == pytest.approx(0.1 + 0.01 * ell, abs=1e-10)
    assert sol.objective == pytest.approx(0.10010020060200733, abs=1e-10)
    assert sol.l[0] == pytest.approx(ell, abs=1e-10)
    assert sol.method == "sweep"


def test_zero_load_gives_flat_profile(triangle):
    cfg = SwitchConfiguration.with_open(triangle, [3])
    sol = solve_opf_r(triangle, cfg, single(triangle, {})[0])
    assert sol.objective == 0.0
    np.testing.assert_allclose(sol.v, 1.0)
    np.testing.assert_allclose(sol.l, 0.0)


def test_triangle_symmetric_split(triangle):
    # both paths to bus 2 have impedance 0.02 + 0.02j
    sol = solve_opf_r(triangle, SwitchConfiguration.all_closed(triangle),
                      single(triangle, {2: -0.2}, {2: -0.05})[0])
    assert sol.method == "newton"
    assert sol.p[0] == pytest.approx(sol.p[2], rel=1e-9)
    assert sol.p[1] == pytest.approx(sol.p[0] - 0.01 * sol.l[0], rel=1e-9)


def _compare_with_ac(net, closed, p, q, tol=1e-8):
    cfg = SwitchConfiguration({b: b in closed for b in net.branch_ids})
    sol = solve_opf_r(net, cfg, ScenarioSet.single(
        net.bus_ids, dict(zip(net.bus_ids, p)), dict(zip(net.bus_ids, q)))[0])
    v, flows = ac_power_flow(net, closed, p, q)
    np.testing.assert_allclose(sol.v, np.abs(v) ** 2, atol=tol)
    for bid in closed:
        k = net.branch_index[bid]
        ps, qs, ll = flows[bid]
        assert sol.p[k] == pytest.approx(ps, abs=tol)
        assert sol.q[k] == pytest.approx(qs, abs=tol)
        assert sol.l[k] == pytest.approx(ll, abs=tol)
    return sol


def test_meshed_triangle_matches_ac_power_flow(triangle):
    p = [0.0, -0.1, -0.2]
    q = [0.0, -0.03, -0.06]
    _compare_with_ac(triangle, [1, 2, 3], p, q)


def test_fig2_all_closed_matches_ac_power_flow(fig2):
    net = fig2.network
    inj = fig2.injections
    p = inj.p_r[0] - inj.p_d[0]
    q = inj.q_r[0] - inj.q_d[0]
    sol = _compare_with_ac(net, list(net.branch_ids), p, q)
    assert soc_exactness_residual(sol) < 1e-8
    assert power_balance_residual(sol, net) < 1e-8


@pytest.mark.parametrize("seed", range(6))
def test_random_meshed_matches_ac_power_flow(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 10, 3)
    sc = random_scenarios(rng, net, 1)
    _compare_with_ac(net, list(net.branch_ids), sc.p_r[0] - sc.p_d[0], sc.q_r[0] - sc.q_d[0])


def test_radial_matches_ac_power_flow(fig2):
    net = fig2.network
    closed = [b for b in net.branch_ids if b not in (6, 10)]
    inj = fig2.injections
    sol = _compare_with_ac(net, closed, inj.p_r[0] - inj.p_d[0], inj.q_r[0] - inj.q_d[0])
    assert sol.method == "sweep"
    assert sol.p[net.branch_index[6]] == 0.0 and sol.l[net.branch_index[10]] == 0.0


def test_loop_injections_sum_to_loop_losses(fig2):
    net = fig2.network
    sol = solve_sopf_r(net, SwitchConfiguration.all_closed(net), fig2.injections)
    for lp in find_loops(net):
        inj = loop_injections(net, sol, lp)
        assert set(inj) == set(lp.buses)
        s = sol.solutions[0]
        losses = sum(net.branch(b).r * s.l[net.branch_index[b]] for b in lp.branches)
        assert sum(inj.values()) == pytest.approx(losses, abs=1e-10)


def test_loop_injections_reject_open_loop(fig2):
    net = fig2.network
    cfg = SwitchConfiguration.with_open(net, [6])
    sol = solve_sopf_r(net, cfg, fig2.injections)
    with pytest.raises(ValueError):
        loop_injections(net, sol, find_loops(net)[0])


def test_soc_is_tight_and_perturbation_detected(fig2):
    net = fig2.network
    sol = solve_opf_r(net, SwitchConfiguration.all_closed(net), fig2.injections[0])
    assert np.max(sol.soc_residuals()) < 1e-9
    bumped = sol.l.copy()
    bumped[0] *= 1.01
    res = np.abs(bumped * sol.v[sol.from_idx] - sol.p ** 2 - sol.q ** 2)
    assert res[0] > 1e-6


def test_stochastic_weighting(triangle):
    cfg = SwitchConfiguration.with_open(triangle, [3])
    sc = ScenarioSet.from_injections(triangle.bus_ids, [{2: -0.1}, {2: -0.3}], None,
                                     [0.3, 0.7])
    st = solve_sopf_r(triangle, cfg, sc)
    one = [solve_opf_r(triangle, cfg, s).objective for s in sc]
    assert st.expected_objective == pytest.approx(0.3 * one[0] + 0.7 * one[1], rel=1e-12)
    assert st.opf_solves == 2
    np.testing.assert_allclose(st.expected_flows,
                               0.3 * st.solutions[0].p + 0.7 * st.solutions[1].p)
    with ThreadPoolExecutor(2) as ex:
        par = solve_sopf_r(triangle, cfg, sc, executor=ex)
    assert par.expected_objective == st.expected_objective


def test_loss_grows_with_load(triangle):
    cfg = SwitchConfiguration.with_open(triangle, [2])
    losses = [solve_opf_r(triangle, cfg, single(triangle, {1: -0.05 * k, 2: -0.05 * k})[0]).loss
              for k in range(1, 6)]
    assert all(a < b for a, b in zip(losses, losses[1:]))


def test_reject_mode_raises_on_voltage_violation():
    buses = (substation(0), Bus(1, v_min=0.95))
    net = Network(buses, (Branch(1, 0, 1, 0.1, 0.1),))
    cfg = SwitchConfiguration.all_closed(net)
    heavy = single(net, {1: -0.5})
    sol = solve_opf_r(net, cfg, heavy[0])
    assert sol.violations["voltage"] > 0
    with pytest.raises(InfeasibleError) as info:
        solve_opf_r(net, cfg, heavy[0], SolverConfig(limit_mode=REJECT))
    assert info.value.constraint == "voltage"
    with pytest.raises(ScenarioSolveError) as agg:
        solve_sopf_r(net, cfg, heavy, SolverConfig(limit_mode=REJECT))
    assert agg.value.only_infeasible


def test_islanded_configuration_rejected(triangle):
    with pytest.raises(TopologyError):
        solve_opf_r(triangle, SwitchConfiguration.with_open(triangle, [1, 3]),
                    single(triangle, {2: -0.1})[0])


def test_solver_config_validation(triangle):
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0)
    with pytest.raises(ValueError):
        SolverConfig(limit_mode="bogus")
    with pytest.raises(ValueError):
        SolverConfig(big_m=0.01).check_big_m(make_network([(0, 1)]))
