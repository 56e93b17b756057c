from __future__ import annotations

import io
import itertools
import math

import numpy as np
import pytest

from conftest import make_network
from sdnr.errors import DataError, SchemaError
from sdnr.scenarios import (LoadProfile, RenewableProfile, ScenarioFactors, ScenarioSet,
                            TimeSeriesTable, build_scenarios, csv_text, factors_from_rows,
                            ingest_csv, pam, reduce_kmedoids, synthetic_profiles)


def _dist(points):
    return np.sqrt(((points[:, None] - points[None]) ** 2).sum(-1))


def _cost(d, meds):
    return d[:, list(meds)].min(axis=1).sum()


def test_ingest_reports_bad_rows_by_line():
    text = "load,wind,solar\n1,0.5,0\nx,0.1,0\n0.8,-1,0\n0.7,nan,0.2\n0.9,0.2,0.3\n"
    table, rejected = ingest_csv(io.StringIO(text))
    assert len(table) == 2
    assert [(r.line, r.column) for r in rejected] == [(3, "load"), (4, "wind"), (5, "wind")]
    np.testing.assert_array_equal(table.load, [1.0, 0.9])


def test_ingest_custom_columns_and_timestamps():
    text = ("ts,demand,w,s\n2024-01-01T05:00:00Z,1,0,0\n2024-01-01T06:00,2,0,0\n"
            "bad,3,0,0\n")
    table, rejected = ingest_csv(io.StringIO(text), "demand", "w", "s", time_col="ts")
    assert list(table.hour) == [5, 6]
    assert rejected[0].line == 4


def test_ingest_missing_column_and_empty():
    with pytest.raises(SchemaError, match="missing column"):
        ingest_csv(io.StringIO("load,wind\n1,2\n"))
    with pytest.raises(DataError):
        ingest_csv(io.StringIO("load,wind,solar\n-1,0,0\n"))


def test_csv_text_round_trip():
    table = synthetic_profiles(days=2, seed=3)
    back, rejected = ingest_csv(io.StringIO(csv_text(table)))
    assert rejected == []
    for col in ("load", "wind", "solar"):
        np.testing.assert_array_equal(getattr(back, col), getattr(table, col))


def test_synthetic_profiles_shape_and_determinism():
    a = synthetic_profiles(days=7, seed=1)
    b = synthetic_profiles(days=7, seed=1)
    assert len(a) == 168
    np.testing.assert_array_equal(a.matrix(), b.matrix())
    assert np.all(a.solar[a.hour < 6] == 0)
    assert np.all((a.wind >= 0) & (a.wind <= 1))
    assert len(a.at_hour(12)) == 7
    n = a.normalized()
    assert n.load.max() == pytest.approx(1.0)


def test_table_validation():
    with pytest.raises(DataError):
        TimeSeriesTable(np.array([1.0]), np.array([1.0, 2.0]), np.array([1.0]))
    with pytest.raises(DataError):
        TimeSeriesTable(np.array([-1.0]), np.array([0.0]), np.array([0.0]))


def test_pam_single_medoid_is_brute_force_minimizer(rng):
    pts = rng.normal(size=(40, 3))
    med, labels, history = pam(pts, 1, seed=7)
    d = _dist(pts)
    assert med == [int(np.argmin(d.sum(axis=0)))]
    assert np.all(labels == 0)
    assert history[-1] == pytest.approx(d.sum(axis=0).min())


@pytest.mark.parametrize("seed", range(5))
def test_pam_two_medoids_are_swap_optimal(seed):
    pts = np.random.default_rng(seed).normal(size=(30, 2))
    med, labels, history = pam(pts, 2, seed=seed)
    d = _dist(pts)
    best = _cost(d, med)
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
    assert history[-1] == pytest.approx(best)
    for i, h in itertools.product(range(2), range(len(pts))):
        if h in med:
            continue
        trial = list(med)
        trial[i] = h
        assert _cost(d, trial) >= best - 1e-9
    assert np.array_equal(labels, np.argmin(d[:, med], axis=1))


def test_pam_k_equals_n_and_bad_k(rng):
    pts = rng.normal(size=(5, 2))
    med, _, history = pam(pts, 5)
    assert med == [0, 1, 2, 3, 4] and history[-1] == 0.0
    with pytest.raises(ValueError):
        pam(pts, 0)
    with pytest.raises(ValueError):
        pam(pts, 6)


def test_reduce_kmedoids_probabilities():
    table = synthetic_profiles(days=30, seed=2).at_hour(12)
    f = reduce_kmedoids(table, 5, seed=0)
    assert len(f) == 5
    assert f.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    counts = np.round(f.probabilities * len(table))
    np.testing.assert_allclose(counts, f.probabilities * len(table))
    for k, row in enumerate(f.medoid_rows):
        assert f.load[k] == table.load[row]
    again = reduce_kmedoids(table, 5, seed=0)
    assert again.medoid_rows == f.medoid_rows


def _net():
    return make_network([(0, 1), (1, 2), (2, 3)])


def test_build_scenarios_signs_and_power_factors():
    net = _net()
    f = ScenarioFactors(np.array([1.0, 0.5]), np.array([0.2, 0.8]), np.array([0.0, 0.5]),
                        np.array([0.25, 0.75]))
    assign = {1: LoadProfile(0.1), 2: RenewableProfile(0.3, 0.2), 3: LoadProfile(0.05)}
    s = build_scenarios(net, f, assign, k_r=2.0, pf_load=0.9, pf_renewable=0.95)
    tan_l = math.tan(math.acos(0.9))
    tan_r = math.tan(math.acos(0.95))
    np.testing.assert_allclose(s.p_d[:, 1], [0.1, 0.05])
    np.testing.assert_allclose(s.p_r[:, 2], [2 * 0.2 * 0.3, 2 * (0.8 * 0.3 + 0.5 * 0.2)])
    np.testing.assert_allclose(s.q_d, s.p_d * tan_l)
    np.testing.assert_allclose(s.q_r, s.p_r * tan_r)
    assert np.all(s[1].p[[1, 3]] < 0) and s[1].p[2] > 0
    assert s.probabilities.sum() == pytest.approx(1.0)
    assert np.all(s.p_r[:, 0] == 0) and np.all(s.p_d[:, 0] == 0)


def test_build_scenarios_rejects_unassigned_bus_and_bad_inputs():
    net = _net()
    f = factors_from_rows(TimeSeriesTable(np.ones(2), np.ones(2), np.ones(2)))
    with pytest.raises(SchemaError):
        build_scenarios(net, f, {1: LoadProfile(0.1)})
    full = {b: LoadProfile(0.1) for b in (1, 2, 3)}
    with pytest.raises(ValueError):
        build_scenarios(net, f, full, k_r=-1)
    with pytest.raises(ValueError):
        build_scenarios(net, f, full, pf_load=0.0)


def test_scenario_set_validation():
    ids = (0, 1)
    with pytest.raises(ValueError, match="sum"):
        ScenarioSet.from_injections(ids, [{1: -0.1}, {1: -0.2}], None, [0.5, 0.6])
    with pytest.raises(ValueError):
        ScenarioSet.from_injections(ids, [{1: -0.1}], None, [0.0])
    s = ScenarioSet.from_injections(ids, [{1: -0.1}, {1: 0.2}], [{1: 0.05}, {}], [0.4, 0.6])
    assert s.p_d[0, 1] == 0.1 and s.p_r[1, 1] == 0.2 and s.q_r[0, 1] == 0.05
    assert len(s) == 2 and [sc.probability for sc in s] == [0.4, 0.6]
