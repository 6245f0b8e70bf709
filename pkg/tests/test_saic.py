import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infmax import DirectedGraph, Streams
from infmax import _kernels as K
from infmax.oracle import FixedWorlds, definition_prr, exact_sigma_b, exhaustive_opt
from infmax.saic import (DelayDist, EdgeDelays, PIMPool, PossibleWorld, PRRPool,
                         SelfActivationProfile, boosted_active_set, estimate_objective,
                         generate_q, gen_prr, imm_bim, imm_bpim, imm_pim, parse_profile,
                         preemptive_credit, sample_world, _seed)

from helpers import small_graph

UV = DirectedGraph(2, [0], [1], [1.0], labels=["u", "v"])
EXP1 = DelayDist("exp", 1.0)


def _uv():
    return SelfActivationProfile.uniform(2, 1.0, EXP1), EdgeDelays.uniform(1, EXP1)


def test_delay_dist_parsing():
    d = DelayDist.parse("exp:2")
    assert (d.kind, d.param, d.mean()) == ("exp", 2.0, 0.5)
    assert DelayDist.parse("const:0.5").mean() == 0.5
    assert str(d) == "exp:2"
    for bad in ("exp", "gamma:1", "exp:0", "const:-1"):
        with pytest.raises(ValueError):
            DelayDist.parse(bad)


def test_profile_validation():
    with pytest.raises(ValueError):
        SelfActivationProfile.uniform(2, 1.5)
    prof = SelfActivationProfile.uniform(3, 0.2).boosted([1])
    assert prof.q.tolist() == [0.2, 1.0, 0.2]


def test_exponential_self_delay_mean():
    g = DirectedGraph(1, [], [], [])
    prof = SelfActivationProfile.uniform(1, 1.0, EXP1)
    ed = EdgeDelays.uniform(0)
    N = 100_000
    fw = FixedWorlds(g, prof.q, prof.kind, prof.param, ed.kind, ed.param, N, 3)
    x = np.array([w.sdelay[0] for w in fw.worlds])
    assert abs(x.mean() - 1.0) <= 4 * x.std() / math.sqrt(N)


def test_worlds_are_reproducible():
    prof, ed = _uv()
    a = sample_world(UV, prof, ed, Streams(1), index=5)
    b = sample_world(UV, prof, ed, Streams(1), index=5)
    assert np.array_equal(a.self_delay, b.self_delay) and np.array_equal(a.edge_delay, b.edge_delay)


def _world(du, dv, d=0.3, active=(True, True), live=True):
    return PossibleWorld(np.array(active), np.array([du, dv]), np.array([live]), np.array([d]))


def test_preemptive_credit_hand_cases():
    assert preemptive_credit(UV, _world(0.5, 2.0), {0}) == {0, 1}
    assert preemptive_credit(UV, _world(0.5, 0.6), {0}) == {0}
    # a tie goes to the competitor
    assert preemptive_credit(UV, _world(0.5, 0.8), {0}) == {0}
    # a source that did not self-activate needs boosting
    w = _world(0.5, 2.0, active=(False, True))
    assert preemptive_credit(UV, w, {0}) == set()
    assert preemptive_credit(UV, w, {0}, boosted=True) == {0, 1}


def test_boosted_active_set():
    w = _world(0.5, 2.0, active=(False, False))
    assert boosted_active_set(UV, w, []) == set()
    assert boosted_active_set(UV, w, [0]) == {0, 1}
    w = _world(0.5, 2.0, active=(False, True), live=False)
    assert boosted_active_set(UV, w, [0]) == {0, 1}


def test_prr_hand_trace():
    w = _world(0.5, 2.0, active=(True, False))
    prof, ed = _uv()
    res = gen_prr(UV, prof, ed, root=1, world=w)
    assert res.members == frozenset({0})
    assert res.source == 0
    assert res.trace[0] == 0.0 and res.trace[-1] == pytest.approx(0.8)
    assert list(res.trace) == sorted(res.trace)
    with pytest.raises(ValueError):
        gen_prr(UV, prof, ed, world=w)


def test_prr_without_sources_keeps_everything_reachable():
    w = _world(0.5, 2.0, active=(False, False))
    prof, ed = _uv()
    res = gen_prr(UV, prof, ed, root=1, world=w)
    assert res.members == frozenset({0, 1}) and res.source is None


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_sampled_worlds_match_definition(seed):
    rs = np.random.default_rng(seed)
    n = int(rs.integers(1, 10))
    g = small_graph(rs, n, max_stochastic=40)
    prof = SelfActivationProfile(rs.uniform(0, 1, n), np.zeros(n, np.int64), rs.uniform(0.5, 2, n))
    ed = EdgeDelays(np.zeros(g.m, np.int64), rs.uniform(0.5, 2, g.m))
    w = sample_world(g, prof, ed, Streams(seed), index=int(rs.integers(0, 1000)))
    root = int(rs.integers(0, n))
    res = gen_prr(g, prof, ed, root=root, world=w)
    members, src = definition_prr(n, g.src, g.dst, w.active, w.self_delay, w.live,
                                  w.edge_delay, root)
    assert res.members == members
    assert res.source == (None if src < 0 else src)


def test_lazy_prr_matches_pinned_world():
    rs = np.random.default_rng(4)
    g = small_graph(rs, 8, max_stochastic=30)
    prof = SelfActivationProfile(rs.uniform(0, 1, 8), np.zeros(8, np.int64), np.ones(8))
    ed = EdgeDelays.uniform(g.m, EXP1)
    for i in range(30):
        root = i % 8
        lazy = gen_prr(g, prof, ed, root=root, rng=Streams(2), index=i)
        # the pinned world with the same seed label and index
        arrs = K.world_arrays(g.n, g.m, g.src, g.prob, prof.q, prof.kind, prof.param, ed.kind,
                              ed.param, _seed(Streams(2), "prr"), i)
        pinned = gen_prr(g, prof, ed, root=root, world=PossibleWorld(*arrs))
        assert lazy.members == pinned.members and lazy.source == pinned.source


def test_closed_form_rho():
    prof, ed = _uv()
    ru = estimate_objective(UV, prof, ed, "rho", [0], 100_000, Streams(11))
    rv = estimate_objective(UV, prof, ed, "rho", [1], 100_000, Streams(12))
    assert abs(ru.mean - 1.25) <= 4 * ru.stderr
    assert abs(rv.mean - 0.75) <= 4 * rv.stderr
    both = estimate_objective(UV, prof, ed, "rho", [0, 1], 1000, Streams(13))
    assert both.mean == 2.0
    with pytest.raises(ValueError):
        estimate_objective(UV, prof, ed, "spread", [0], 10)


def test_sigma_b_forward_matches_oracle():
    rs = np.random.default_rng(8)
    g = small_graph(rs, 5, max_stochastic=8)
    q = rs.uniform(0, 1, 5)
    prof = SelfActivationProfile.uniform(5, 0.0)
    prof = SelfActivationProfile(q, prof.kind, prof.param)
    est = estimate_objective(g, prof, EdgeDelays.uniform(g.m), "sigma_b", [1], 50_000, Streams(3))
    assert abs(est.mean - exact_sigma_b(g, q, [1])) <= 4 * est.stderr


def test_pim_estimates_follow_closed_form():
    prof, ed = _uv()
    pool = PIMPool(UV, prof, ed, Streams(5))
    pool.draw(200_000)
    assert pool.est.sum() == 200_000
    ratio = pool.est[0] / pool.est[1]
    assert ratio == pytest.approx(1.25 / 0.75, rel=0.03)
    assert pool.statistic(1) == pool.est[0] / pool.count


def test_imm_pim_picks_u():
    prof, ed = _uv()
    res = imm_pim(UV, prof, ed, 1, eps=0.1, rng=Streams(1))
    assert res.seeds == [0]
    assert res.estimate == pytest.approx(1.25, rel=0.05)
    assert res.samples >= res.theta


def test_imm_pim_without_sources_warns(caplog):
    prof = SelfActivationProfile.uniform(2, 0.0, EXP1)
    with caplog.at_level(logging.WARNING):
        res = imm_pim(UV, prof, EdgeDelays.uniform(1), 1, eps=0.5, rng=Streams(1))
    assert res.seeds == [0] and res.warnings
    assert "self-activated" in caplog.text


def test_bpim_prefers_the_uncontested_clique():
    # clique A = {0,1,2} self-activates early; clique B = {3,4,5} never does
    edges = [(u, v) for c in ((0, 1, 2), (3, 4, 5)) for u in c for v in c if u != v]
    g = DirectedGraph(6, [u for u, _ in edges], [v for _, v in edges], [1.0] * len(edges))
    q = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    prof = SelfActivationProfile(q, np.zeros(6, np.int64), np.array([10.0] * 3 + [1.0] * 3))
    ed = EdgeDelays.uniform(g.m, DelayDist("const", 0.1))
    fw = FixedWorlds(g, prof.q, prof.kind, prof.param, ed.kind, ed.param, 2000, 1)
    assert fw.rho_b([3]) > fw.rho_b([0])
    assert fw.rho_b([3]) == pytest.approx(3.0)
    res = imm_bpim(g, prof, ed, 1, eps=0.3, rng=Streams(1))
    assert res.seeds[0] in (3, 4, 5)
    opt, best = exhaustive_opt("bpim", g, 1, evaluator=fw.rho_b)
    assert set(best) <= {3, 4, 5}


def test_prr_pool_estimates_rho_b():
    prof, ed = _uv()
    pool = PRRPool(UV, prof.boosted([]), ed, Streams(6))
    pool.draw(100_000)
    est = 2 * pool.store.fraction(np.array([True, False]))
    fw = estimate_objective(UV, prof, ed, "rho_b", [0], 100_000, Streams(7))
    assert abs(est - fw.mean) <= 4 * math.hypot(fw.stderr, 2 * math.sqrt(0.25 / 100_000))


def test_imm_bim_matches_exhaustive_optimum():
    rs = np.random.default_rng(21)
    g = small_graph(rs, 6, max_stochastic=8)
    q = np.full(6, 0.1)
    prof = SelfActivationProfile(q, np.zeros(6, np.int64), np.ones(6))
    res = imm_bim(g, prof, 2, eps=0.2, rng=Streams(3))
    opt, _ = exhaustive_opt("bim", g, 2, q=q)
    assert exact_sigma_b(g, q, res.seeds) >= (1 - 1 / math.e - 0.2) * opt
    assert len(res.seeds) == 2
    with pytest.raises(ValueError):
        imm_bim(g, prof, 0)


def test_generate_q_cases():
    g = DirectedGraph(4, [0, 0, 1], [1, 2, 2], [1.0] * 3)
    for case in range(5):
        q = generate_q(case, 2.0, g, Streams(case))
        assert q.shape == (4,) and q.min() >= 0 and q.max() <= 1
    q0 = generate_q(0, 0.5, g, Streams(1))
    q1 = generate_q(1, 0.5, g, Streams(1))
    q2 = generate_q(2, 0.5, g, Streams(1))
    assert np.all(q0 <= 0.5)
    assert q1[3] == 0.0  # out-degree 0
    assert q1[0] <= 1.0 and q1[2] == 0.0
    assert q2[3] > 0  # out-degree 0 is treated as 1
    empty = DirectedGraph(10, [], [], [])
    q3 = generate_q(3, 0.5, empty, Streams(2))
    assert int((q3 > 0).sum()) == 5
    with pytest.raises(ValueError):
        generate_q(5, 1.0, g)
    with pytest.raises(ValueError):
        generate_q(0, -1.0, g)


def test_parse_profile():
    prof, ed = parse_profile(["q = 0.3", "q[v] = 0.9  # override", "node_delay = const:2",
                              "edge_delay = exp:4"], UV)
    assert prof.q.tolist() == [0.3, 0.9]
    assert prof.kind.tolist() == [1, 1] and prof.param.tolist() == [2.0, 2.0]
    assert ed.kind.tolist() == [0] and ed.param.tolist() == [4.0]
    prof, _ = parse_profile(["q_case = 0", "q_base = 0.5"], UV, Streams(1))
    assert np.all(prof.q <= 0.5)
    for bad in (["q 0.3"], ["speed = 1"], ["q = 1", "q_case = 0"], ["q[w] = 1"]):
        with pytest.raises((ValueError, KeyError)):
            parse_profile(bad, UV)
