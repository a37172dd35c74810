import math

import numpy as np
import pytest

from oracle import BruteEvaluator, succ_threshold
from relayrates import rates
from relayrates.infocalc import Evaluator
from relayrates.instances import (
    random_discrete_network,
    random_gaussian_network,
    random_input,
)
from relayrates.model import (
    DiscreteInput,
    DiscreteNetwork,
    GaussianInput,
    GaussianNetwork,
    InputSpec,
    RelayAssignment,
    ResourceCapError,
)
from relayrates.search import gaussian_input

TOL = 1e-9


def _anchor():
    net = GaussianNetwork(1, np.array([[2.0, 1.0], [0.0, 1.0]]), (1.0, 1.0), (1.0, 1.0))
    return net, RelayAssignment.all_df(1)


def _cf_gaussian(g01=1.5, g02=0.6, g12=1.0, p=(1.0, 1.0), noise=(1.0, 1.0), q=1.0):
    net = GaussianNetwork(1, np.array([[g01, g02], [0.0, g12]]), noise, p)
    return net, InputSpec.single(GaussianInput([[p[0]]], {1: p[1]}, {1: q}))


# ----------------------------------------------------------------------------
# Multi-level D-F
# ----------------------------------------------------------------------------


def test_point_to_point_without_relays():
    rng = np.random.default_rng(0)
    net = random_discrete_network(rng, 0)
    a = RelayAssignment.all_df(0)
    ins = random_input(rng, net, a)
    direct = BruteEvaluator(net, a, ins).mi({"X0"}, {"Y1"})
    assert rates.df_multilevel_rate(net, a, ins).rate == pytest.approx(direct, abs=1e-12)
    assert rates.unified_rate_thm1(net, a, ins).rate == pytest.approx(direct, abs=1e-12)
    assert rates.nnc_rate_subset(net, ins, ()) == pytest.approx(direct, abs=1e-12)


@pytest.mark.parametrize("rho", [0.0, 0.3, 0.5, 0.8])
def test_single_relay_df_closed_form(rho):
    net, a = _anchor()
    ins = InputSpec.single(gaussian_input(net, a, {"rho[1]": rho}))
    first = 0.5 * math.log2(1 + 4 * (1 - rho * rho))
    second = 0.5 * math.log2(1 + 2 + 2 * rho)
    rep = rates.df_multilevel_rate(net, a, ins)
    assert [c.value for c in rep.per_node] == pytest.approx([first, second], abs=1e-12)
    assert rep.rate == pytest.approx(min(first, second), abs=1e-12)


def test_df_anchor_is_one_bit():
    net, a = _anchor()
    ins = InputSpec.single(gaussian_input(net, a, {"rho[1]": 0.5}))
    assert abs(rates.df_multilevel_rate(net, a, ins).rate - 1.0) <= TOL
    assert abs(rates.classic_single_relay_rates(net, a, ins).df - 1.0) <= TOL


def test_useless_relay_gives_zero_rate():
    ch = np.zeros((2, 2, 2, 2))
    ch[..., 0, :] = 0.5 * np.array([0.9, 0.1])  # Y1 is a fair coin, independent of everything
    ch[..., 1, :] = 0.5 * np.array([0.9, 0.1])
    net = DiscreteNetwork(1, (2, 2), (2, 2), ch)
    a = RelayAssignment.all_df(1)
    ins = InputSpec.single(DiscreteInput([0.5, 0.5], np.full((2, 2), 0.5), {}, {}))
    rep = rates.df_multilevel_rate(net, a, ins)
    assert rep.rate == pytest.approx(0.0, abs=1e-12)
    assert rep.binding.level == 2


def test_df_requires_every_relay_decoding():
    rng = np.random.default_rng(1)
    net = random_discrete_network(rng, 2)
    a = RelayAssignment.from_order((0, 1, 3))
    with pytest.raises(ValueError):
        rates.df_multilevel_rate(net, a, random_input(rng, net, a))


# ----------------------------------------------------------------------------
# Unified rates against hand-specialized formulas
# ----------------------------------------------------------------------------


def test_single_relay_decoding_specializes():
    rng = np.random.default_rng(2)
    for _ in range(10):
        net = random_discrete_network(rng, 1)
        a = RelayAssignment.all_df(1)
        ins = random_input(rng, net, a, 2)
        b = BruteEvaluator(net, a, ins)
        expected = min(b.mi({"X0"}, {"Y1"}, {"X1"}), b.mi({"X0", "X1"}, {"Y2"}))
        assert rates.unified_rate_thm1(net, a, ins).rate == pytest.approx(expected, abs=1e-12)


def _hand_two_relay(b: BruteEvaluator, tol=TOL):
    """Order (0, 1, 3): relay 1 decodes, relay 2 compresses."""
    levels = []
    # level 2: relay 1 decodes with X1 known, source cooperating
    dec = b.mi({"X2"}, {"Y1"}, {"X0", "X1"}) - b.mi({"Y2"}, {"Yh2"}, {"X0", "X1", "X2", "Y1"})
    with_d = min(
        b.mi({"X0"}, {"Yh2", "Y1"}, {"X2", "X1"}),
        b.mi({"X0", "X2"}, {"Y1"}, {"X1"}) - b.mi({"Y2"}, {"Yh2"}, {"X0", "X1", "X2", "Y1"}),
    )
    levels.append(with_d if dec > tol else b.mi({"X0"}, {"Y1"}, {"X1"}))
    # level 3: destination, source and relay 1 cooperating
    dec = b.mi({"X2"}, {"Y3"}, {"X0", "X1"}) - b.mi({"Y2"}, {"Yh2"}, {"X0", "X1", "X2", "Y3"})
    with_d = min(
        b.mi({"X0", "X1"}, {"Yh2", "Y3"}, {"X2"}),
        b.mi({"X0", "X1", "X2"}, {"Y3"}) - b.mi({"Y2"}, {"Yh2"}, {"X0", "X1", "X2", "Y3"}),
    )
    levels.append(with_d if dec > tol else b.mi({"X0", "X1"}, {"Y3"}))
    return levels


def test_two_relay_mixed_matches_hand_formula():
    rng = np.random.default_rng(3)
    a = RelayAssignment.from_order((0, 1, 3))
    used_d = 0
    for _ in range(40):
        net = random_discrete_network(rng, 2, alpha=0.3)
        ins = random_input(rng, net, a, int(rng.integers(1, 3)))
        rep = rates.unified_rate_thm1(net, a, ins)
        expected = _hand_two_relay(BruteEvaluator(net, a, ins))
        assert [c.value for c in rep.per_node] == pytest.approx(expected, abs=1e-10)
        used_d += sum(1 for c in rep.per_node if c.decoding_set)
    assert used_d > 0  # the compressing relay is decodable somewhere


def test_thm2_without_cf_relays_is_df():
    rng = np.random.default_rng(4)
    net = random_gaussian_network(rng, 3)
    a = RelayAssignment.from_order((0, 2, 3, 1, 4))
    ins = random_input(rng, net, a)
    assert rates.unified_rate_thm2(net, a, ins).rate == pytest.approx(
        rates.df_multilevel_rate(net, a, ins).rate, abs=1e-12
    )
    assert rates.verify_theorem3(net, a, ins).ok


def test_decodable_set_maximizes_on_small_instances():
    rng = np.random.default_rng(5)
    for _ in range(20):
        net = random_discrete_network(rng, 2)
        a = RelayAssignment.from_order((0, 2, 3))
        ins = random_input(rng, net, a)
        assert rates.verify_theorem3(net, a, ins).ok
    net = random_gaussian_network(rng, 3)
    a = RelayAssignment.from_order((0, 2, 4))
    report = rates.verify_theorem3(net, a, random_input(rng, net, a))
    assert report.ok and all(len(lv.values) == 4 for lv in report.levels)


def test_thm2_reports_maximizers():
    rng = np.random.default_rng(6)
    net = random_gaussian_network(rng, 2)
    a = RelayAssignment.all_cf(2)
    ins = random_input(rng, net, a)
    r1 = rates.unified_rate_thm1(net, a, ins)
    r2 = rates.unified_rate_thm2(net, a, ins)
    assert r1.per_node[0].decoding_set in r2.per_node[0].maximizers
    assert r2.to_dict()["perNode"][0]["maximizers"]


def test_pool_cap():
    rng = np.random.default_rng(0)
    net = random_gaussian_network(rng, 13)
    a = RelayAssignment.all_cf(13)
    ins = random_input(rng, net, a)
    with pytest.raises(ResourceCapError):
        rates.unified_rate_thm2(net, a, ins)


# ----------------------------------------------------------------------------
# Decodable sets
# ----------------------------------------------------------------------------


def test_empty_pool_gives_empty_set():
    rng = np.random.default_rng(7)
    net = random_discrete_network(rng, 2)
    a = RelayAssignment.all_df(2)
    sets = rates.decodable_sets(net, a, random_input(rng, net, a))
    assert all(D == frozenset() for D in sets.values())


def test_silent_relay_excluded():
    # relay 2 reaches nobody; relay 1 has a strong link to the destination
    g = np.array([[1.0, 0.8, 0.3], [0.0, 0.5, 2.0], [0.0, 0.0, 0.0]])
    net = GaussianNetwork(2, g, (1.0, 1.0, 1.0), (1.0, 1.0, 1.0))
    ins = InputSpec.single(GaussianInput([[1.0]], {1: 1.0, 2: 1.0}, {1: 0.5, 2: 0.5}))
    ev = Evaluator(net, RelayAssignment.all_cf(2), ins)
    ctx = rates.level_context(RelayAssignment.all_cf(2), 2, 2)
    assert rates.decodability(ev, ctx, frozenset({2}), frozenset({2})) < 0
    D, Dp = rates.cf_decodable_sets(net, ins)
    assert 2 not in D and 2 not in Dp


class _StubEvaluator:
    """Decodability of every single relay is 1 but the pair costs 5."""

    def mi(self, A, B, C=()):
        A = set(A)
        if all(v.startswith("Y") for v in A):
            return 5.0 if len(A) == 2 else 0.0
        return 1.0


def test_degenerate_union_is_reported():
    ctx = rates.SubsetContext(3, frozenset({0}), frozenset(), frozenset({1, 2}))
    with pytest.raises(rates.UniquenessError):
        rates.largest_decodable_set(ctx, _StubEvaluator())


def test_subsets_order():
    got = [tuple(sorted(s)) for s in rates.subsets({3, 1, 2})]
    assert got == [(), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]


# ----------------------------------------------------------------------------
# Compress-and-forward family
# ----------------------------------------------------------------------------


def _nnc_literal(b: BruteEvaluator, n: int, T):
    d = n + 1
    best = math.inf
    T = sorted(T)
    for r in range(len(T) + 1):
        for S in map(set, __import__("itertools").combinations(T, r)):
            rest = set(T) - S
            v = b.mi({"X0"} | {f"X{i}" for i in S}, {f"Yh{i}" for i in rest} | {f"Y{d}"}, {f"X{i}" for i in rest})
            if S:
                v -= b.mi(
                    {f"Y{i}" for i in S},
                    {f"Yh{i}" for i in S},
                    {"X0", f"Y{d}"} | {f"X{i}" for i in T} | {f"Yh{i}" for i in rest},
                )
            best = min(best, v)
    return best


@pytest.mark.parametrize("n", [1, 2, 3])
def test_nnc_matches_literal_transcription(n):
    rng = np.random.default_rng(10 + n)
    a = RelayAssignment.all_cf(n)
    for _ in range(5 if n < 3 else 2):
        net = random_discrete_network(rng, n)
        ins = random_input(rng, net, a)
        b = BruteEvaluator(net, a, ins)
        full = tuple(range(1, n + 1))
        assert rates.nnc_rate_subset(net, ins, full) == pytest.approx(_nnc_literal(b, n, full), abs=1e-10)


def test_nnc_empty_subset_is_direct_link():
    rng = np.random.default_rng(20)
    net = random_discrete_network(rng, 2)
    a = RelayAssignment.all_cf(2)
    ins = random_input(rng, net, a)
    direct = BruteEvaluator(net, a, ins).mi({"X0"}, {"Y3"})
    assert rates.nnc_rate_subset(net, ins, ()) == pytest.approx(direct, abs=1e-12)


def _noiseless_two_hop():
    ch = np.zeros((2, 2, 2, 2))
    for x0 in range(2):
        for x1 in range(2):
            ch[x0, x1, x0, x1] = 1.0
    ident = np.stack([np.eye(2)] * 2, axis=1)
    net = DiscreteNetwork(1, (2, 2), (2, 2), ch)
    return net, InputSpec.single(DiscreteInput([0.5, 0.5], None, {1: [0.5, 0.5]}, {1: ident}))


def test_noiseless_two_hop_all_cf_rates():
    net, ins = _noiseless_two_hop()
    assert rates.cf_successive_rate(net, ins).rate == pytest.approx(1.0, abs=1e-12)
    assert rates.nnc_rate_subset(net, ins, (1,)) == pytest.approx(1.0, abs=1e-12)
    assert rates.cf_joint_rate(net, ins).rate == pytest.approx(1.0, abs=1e-12)
    c = rates.classic_single_relay_rates(net, RelayAssignment.all_cf(1), ins)
    assert c.compression_cost == pytest.approx(c.relay_link, abs=1e-12)
    assert c.cf_successive_feasible


def test_successive_feasibility_threshold():
    kw = dict(g01=1.5, g02=0.6, g12=1.0, p=(1.0, 1.0), noise=(1.0, 1.0))
    q_star = succ_threshold(**kw)
    net, ins = _cf_gaussian(**kw, q=q_star * 0.9)
    bad = rates.cf_successive_rate(net, ins)
    assert isinstance(bad, rates.Infeasible) and bad.violating_subset == frozenset({1})
    assert bad.slack < 0
    net, ins = _cf_gaussian(**kw, q=q_star * 1.1)
    assert not isinstance(rates.cf_successive_rate(net, ins), rates.Infeasible)


def test_coarse_compression_limit():
    limit = 0.5 * math.log2(1 + 0.6**2 * 1.0 / 1.0)
    gaps = []
    for q in (1e2, 1e4, 1e6):
        net, ins = _cf_gaussian(q=q)
        gaps.append(rates.cf_successive_rate(net, ins).rate - limit)
    assert gaps[0] > gaps[1] > gaps[2] >= 0
    assert gaps[2] < 1e-5


def test_cf_joint_without_decodable_relay_is_direct_link():
    net, ins = _cf_gaussian(g12=0.0, q=0.5)
    D, _ = rates.cf_decodable_sets(net, ins)
    assert D == frozenset()
    direct = 0.5 * math.log2(1 + 0.36)
    assert rates.cf_joint_rate(net, ins).rate == pytest.approx(direct, abs=1e-12)


def test_single_relay_joint_decoding_closed_form():
    """With relay 1 decodable the joint rate is the successive rate minus the
    excess compression cost; otherwise the relay input is treated as noise."""
    rng = np.random.default_rng(30)
    a = RelayAssignment.all_cf(1)
    seen = set()
    for _ in range(40):
        net = random_discrete_network(rng, 1, alpha=0.3)
        ins = random_input(rng, net, a)
        b = BruteEvaluator(net, a, ins)
        succ = b.mi({"X0"}, {"Yh1", "Y2"}, {"X1"})
        excess = b.mi({"Y1"}, {"Yh1"}, {"X1", "Y2"}) - b.mi({"X1"}, {"Y2"})
        closed = succ - max(0.0, excess)
        D, _ = rates.cf_decodable_sets(net, ins)
        joint = rates.cf_joint_rate(net, ins).rate
        if D:
            assert joint == pytest.approx(closed, abs=1e-10)
        else:
            assert joint == pytest.approx(b.mi({"X0"}, {"Y2"}), abs=1e-10)
        assert joint == pytest.approx(max(closed, b.mi({"X0"}, {"Y2"})), abs=1e-10)
        seen.add(bool(D))
    assert seen == {True, False}


def test_classic_rates_with_useless_compression():
    rng = np.random.default_rng(31)
    net = random_discrete_network(rng, 1)
    a = RelayAssignment.all_cf(1)
    f = DiscreteInput([0.4, 0.6], None, {1: [0.5, 0.5]}, {1: np.full((2, 2, 2), 0.5)})
    ins = InputSpec.single(f)
    c = rates.classic_single_relay_rates(net, a, ins)
    b = BruteEvaluator(net, a, ins)
    assert c.cf_joint == pytest.approx(b.mi({"X0"}, {"Y2"}, {"X1"}), abs=1e-12)
    assert c.compression_cost == pytest.approx(0.0, abs=1e-12)


def test_classic_joint_equals_successive_when_feasible():
    net, ins = _noiseless_two_hop()
    c = rates.classic_single_relay_rates(net, RelayAssignment.all_cf(1), ins)
    assert c.cf_successive_feasible
    assert c.cf_joint == pytest.approx(c.cf_successive, abs=1e-12)


def test_classic_cf_entries_absent_for_decoding_relay():
    net, a = _anchor()
    ins = InputSpec.single(gaussian_input(net, a, {"rho[1]": 0.5}))
    c = rates.classic_single_relay_rates(net, a, ins)
    assert c.cf_joint is None and c.cf_successive_feasible is None


# ----------------------------------------------------------------------------
# Compression noise
# ----------------------------------------------------------------------------


def test_direct_cut_nonincreasing_in_compression_noise():
    """At a fixed decoding set, the S = {} term can only lose information as
    the compression gets noisier."""
    rng = np.random.default_rng(40)
    for _ in range(10):
        net = random_gaussian_network(rng, 2)
        a = RelayAssignment.all_cf(2)
        base = random_input(rng, net, a).components[0][1]
        ctx = rates.level_context(a, 2, 2)
        prev = math.inf
        for q in (0.05, 0.2, 1.0, 5.0, 25.0):
            f = GaussianInput(base.cov_df, base.cf_power, {1: q, 2: base.quant_noise[2]})
            ev = Evaluator(net, a, InputSpec.single(f))
            v = rates.constraint_term(ev, ctx, frozenset({1, 2}), frozenset())
            assert v <= prev + TOL
            prev = v


def test_finer_compression_can_shrink_decodable_set():
    """Counterexample to rate monotonicity in the compression noise: very fine
    compression makes the relay undecodable and the rate can jump."""
    net, coarse = _cf_gaussian(g01=1.0, g02=0.2, g12=1.0, q=2.0)
    _, fine = _cf_gaussian(g01=1.0, g02=0.2, g12=1.0, q=0.01)
    assert rates.cf_decodable_sets(net, coarse)[0] == frozenset({1})
    assert rates.cf_decodable_sets(net, fine)[0] == frozenset()
    r_coarse = rates.cf_joint_rate(net, coarse).rate
    r_fine = rates.cf_joint_rate(net, fine).rate
    assert r_coarse > r_fine + 1e-3
