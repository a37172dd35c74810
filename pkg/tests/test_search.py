import logging
import math

import numpy as np
import pytest

from oracle import succ_threshold
from relayrates import rates
from relayrates.instances import random_discrete_network
from relayrates.model import GaussianNetwork, InputSpec, RelayAssignment, ResourceCapError
from relayrates.search import (
    InfeasibleGridError,
    SearchConfig,
    enumerate_assignments,
    gaussian_input,
    optimize_params,
    rank_strategies,
    ranking_csv,
)


def _gauss(g, n=1):
    return GaussianNetwork(n, np.asarray(g, dtype=float), (1.0,) * n + (1.0,), (1.0,) * (n + 1))


@pytest.mark.parametrize("n, count", [(0, 1), (1, 2), (2, 5), (3, 16)])
def test_assignment_counts(n, count):
    got = enumerate_assignments(n)
    assert len(got) == count
    assert len({a.order for a in got}) == count
    assert [a.M for a in got] == sorted(a.M for a in got)


def test_enumeration_bound():
    with pytest.raises(ResourceCapError):
        enumerate_assignments(4, max_relays=3)


def test_gaussian_input_is_psd_for_every_grid_point():
    net = _gauss([[1.0, 0.5, 0.3], [0.0, 1.0, 0.4], [0.0, 0.0, 1.0]], n=2)
    a = RelayAssignment.from_order((0, 2, 1, 3))
    for r1 in (-1.0, -0.3, 0.0, 0.7, 1.0):
        for r2 in (-1.0, 0.0, 0.9):
            f = gaussian_input(net, a, {"rho[1]": r1, "rho[2]": r2})
            assert np.linalg.eigvalsh(f.cov_df)[0] >= -1e-12
            assert np.allclose(np.diag(f.cov_df), 1.0)


def test_single_point_grid_is_plain_evaluation():
    net = _gauss([[2.0, 1.0], [0.0, 1.0]])
    a = RelayAssignment.all_df(1)
    res = optimize_params(net, a, SearchConfig(rho_grid=(0.3,)))
    direct = rates.unified_rate_thm1(net, a, InputSpec.single(gaussian_input(net, a, {"rho[1]": 0.3})))
    assert res.evaluated == 1
    assert res.rate == direct.rate


def test_anchor_grid_optimum():
    net = _gauss([[2.0, 1.0], [0.0, 1.0]])
    res = optimize_params(net, RelayAssignment.all_df(1))
    assert res.params == {"rho[1]": 0.5}
    assert res.rate == pytest.approx(1.0, abs=1e-9)


def test_quantization_grid_across_feasibility_threshold(caplog):
    kw = dict(g01=1.5, g02=0.6, g12=1.0, p=(1.0, 1.0), noise=(1.0, 1.0))
    q_star = succ_threshold(**kw)
    net = _gauss([[1.5, 0.6], [0.0, 1.0]])
    grid = tuple(q_star * f for f in (0.25, 0.5, 0.8, 1.25, 2.0, 4.0))
    cfg = SearchConfig(objective="cf_successive", cf_power_grid=(1.0,), quant_grid=grid)
    with caplog.at_level(logging.INFO, logger="relayrates.search"):
        res = optimize_params(net, RelayAssignment.all_cf(1), cfg)
    # finer compression helps as long as it can still be recovered
    assert res.params["quantNoise[1]"] == pytest.approx(q_star * 1.25)
    assert sorted(p["quantNoise[1]"] for p, _ in res.infeasible) == pytest.approx(list(grid[:3]))
    assert sum("infeasible point" in r.message for r in caplog.records) == 3
    with pytest.raises(InfeasibleGridError):
        optimize_params(net, RelayAssignment.all_cf(1), SearchConfig(
            objective="cf_successive", cf_power_grid=(1.0,), quant_grid=grid[:3]))


def test_relay_near_source_prefers_decoding():
    ranked = rank_strategies(_gauss([[10.0, 0.1], [0.0, 1.0]]))
    assert ranked[0].assignment.M == 1
    assert ranked[0].rate > ranked[1].rate


def test_relay_near_destination_prefers_compression():
    ranked = rank_strategies(_gauss([[0.1, 0.5], [0.0, 10.0]]))
    assert ranked[0].assignment.M == 0
    assert ranked[0].rate >= ranked[1].rate


def test_no_relays_is_point_to_point():
    net = GaussianNetwork(0, np.array([[math.sqrt(3.0)]]), (1.0,), (1.0,))
    ranked = rank_strategies(net)
    assert len(ranked) == 1
    assert ranked[0].rate == pytest.approx(1.0, abs=1e-12)


def test_best_strategy_beats_silent_relays():
    net = _gauss([[0.7, 0.9, 0.4], [0.0, 0.8, 0.6], [0.0, 0.0, 1.2]], n=2)
    direct = 0.5 * math.log2(1 + 0.4**2)
    ranked = rank_strategies(net, SearchConfig(rho_grid=(0.0, 0.5)))
    assert ranked[0].rate >= direct - 1e-9


def test_ranking_is_deterministic_across_threads():
    net = _gauss([[0.7, 0.9, 0.4], [0.0, 0.8, 0.6], [0.0, 0.0, 1.2]], n=2)
    cfg = SearchConfig(rho_grid=(0.0, 0.5), quant_grid=(0.3, 3.0))
    one = rank_strategies(net, cfg)
    many = rank_strategies(net, cfg, threads=4)
    assert [r.assignment.order for r in one] == [r.assignment.order for r in many]
    assert ranking_csv(one) == ranking_csv(many)


def test_ties_ordered_by_size_then_order():
    # relays that hear nothing: every D-F strategy ties at rate 0
    g = np.zeros((3, 3))
    g[0, 2] = 1.0
    net = GaussianNetwork(2, g, (1.0, 1.0, 1.0), (1.0, 1.0, 1.0))
    ranked = rank_strategies(net, SearchConfig(rho_grid=(0.0,), cf_power_grid=(0.0,), quant_grid=(1.0,)))
    assert ranked[0].assignment.M == 0 and ranked[0].rate == pytest.approx(0.5)
    tied = ranked[1:]
    assert len(tied) == 4 and all(abs(r.rate) < 1e-12 for r in tied)
    keys = [(r.assignment.M, r.assignment.order) for r in tied]
    assert keys == sorted(keys)


def test_coordinate_mode_reaches_grid_optimum():
    net = _gauss([[2.0, 1.0], [0.0, 1.0]])
    a = RelayAssignment.all_df(1)
    grid = optimize_params(net, a)
    coord = optimize_params(net, a, SearchConfig(mode="coordinate"))
    assert coord.rate >= grid.rate - 1e-12
    assert coord.evaluated < 100
    assert optimize_params(net, a, SearchConfig(mode="coordinate")).params == coord.params


def test_coordinate_mode_refines_between_grid_points():
    net = _gauss([[2.0, 1.0], [0.0, 1.0]])
    a = RelayAssignment.all_df(1)
    coarse = SearchConfig(rho_grid=(0.0, 0.4, 0.8))
    grid = optimize_params(net, a, coarse)
    coord = optimize_params(net, a, SearchConfig(rho_grid=(0.0, 0.4, 0.8), mode="coordinate"))
    assert coord.rate > grid.rate


def test_discrete_search_uses_default_candidates():
    rng = np.random.default_rng(2)
    net = random_discrete_network(rng, 1)
    ranked = rank_strategies(net)
    assert {r.assignment.order for r in ranked} == {(0, 2), (0, 1, 2)}
    assert all(r.rate >= -1e-9 for r in ranked)


@pytest.mark.parametrize("kw", [
    dict(rho_grid=()),
    dict(rho_grid=(1.5,)),
    dict(cf_power_grid=(1.2,)),
    dict(quant_grid=(0.0,)),
    dict(mode="random"),
    dict(objective="best"),
    dict(sweeps=0),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SearchConfig(**kw)


def test_grid_size_cap():
    net = _gauss([[1.0, 0.5, 0.3], [0.0, 1.0, 0.4], [0.0, 0.0, 1.0]], n=2)
    with pytest.raises(ResourceCapError):
        optimize_params(net, RelayAssignment.all_cf(2), SearchConfig(max_points=10))


def test_objective_must_fit_assignment():
    net = _gauss([[2.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        optimize_params(net, RelayAssignment.all_df(1), SearchConfig(objective="cf_joint"))


def test_ranking_csv_units():
    ranked = rank_strategies(_gauss([[2.0, 1.0], [0.0, 1.0]]))
    lines = ranking_csv(ranked).split("\r\n")
    assert "rate [bits/use]" in lines[0]
    assert len([x for x in lines if x]) == 1 + len(ranked)
