import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infmax import DirectedGraph, SeedSchedule, Streams, estimate_rho, random_graph
from infmax.adaptive import (AdaGreedyPolicy, AdaIMMPolicy, Environment, Feedback, SchedulePolicy,
                             ada_greedy_round, ada_imm_round, gen_weighted_rr, marginal_gain,
                             run_adaptive, trace_records, write_trace)

from helpers import chain, small_graph

ABC = DirectedGraph(3, [0], [1], [1.0], labels=["a", "b", "c"])


def test_marginal_gain_counts_only_new_nodes():
    g = chain(1.0)
    assert marginal_gain(g, {1}, [0], R=100, rng=Streams(1)) == 1.0
    assert marginal_gain(g, {1}, [0], exact=True) == 1.0
    assert marginal_gain(g, set(), [], R=10) == 0.0


def test_ada_greedy_rounds_on_fixture():
    assert ada_greedy_round(ABC, set(), 1, 200, Streams(1)) == [0]
    assert ada_greedy_round(ABC, {0, 1}, 1, 200, Streams(1)) == [2]
    assert ada_greedy_round(ABC, {0, 1, 2}, 2, 50, Streams(1), exact=True) == [0, 1]
    with pytest.raises(ValueError):
        ada_greedy_round(ABC, set(), 4, 10)


def test_ada_greedy_policy_total_three():
    summary = run_adaptive(ABC, AdaGreedyPolicy(R=500), 2, 1, trials=3, rng=Streams(2))
    assert summary.mean == 3.0 and summary.stderr == 0.0
    assert summary.runs[0].schedule.as_lists() == [[0], [2]]
    assert summary.runs[0].gains == [2, 1]


def test_weighted_rr_roots_avoid_active_nodes():
    g = chain(1.0)
    for i in range(20):
        rr = gen_weighted_rr(g, {1}, Streams(i))
        assert rr.root == 0 and rr.members == frozenset({0})
    with pytest.raises(ValueError):
        gen_weighted_rr(g, {0, 1})


def test_ada_imm_second_round_picks_c():
    seeds, res, pool = ada_imm_round(ABC, {0, 1}, 1, 0.5, 1.0, 2, Streams(1))
    assert seeds == [2]
    members, _, roots = pool.store.flat()
    assert np.all(roots == 2) and np.all(members == 2)
    assert pool.total >= res.params.theta


def test_ada_imm_policy_on_fixture():
    pol = AdaIMMPolicy(0.5, 1.0, 2)
    summary = run_adaptive(ABC, pol, 2, 1, trials=2, rng=Streams(3))
    assert summary.mean == 3.0
    assert len(pol.log) == 4
    assert all(rec["samples"] >= rec["theta"] for rec in pol.log)


def test_incremental_reuse_keeps_only_valid_samples():
    g = random_graph(60, 240, np.random.default_rng(1))
    _, _, first = ada_imm_round(g, set(), 3, 0.5, 1.0, 2, Streams(1))
    A = {0, 1, 2, 3}
    _, _, second = ada_imm_round(g, A, 3, 0.5, 1.0, 2, Streams(2), reuse=first)
    roots = second.store.flat()[2]
    assert not np.isin(roots, list(A)).any()
    pol = AdaIMMPolicy(0.5, 1.0, 3, incremental=True)
    summary = run_adaptive(g, pol, 3, 3, trials=1, rng=Streams(4))
    assert summary.runs[0].total_active >= 3


def test_environment_is_consistent_within_a_round():
    g = small_graph(np.random.default_rng(3), 6, max_stochastic=20)
    env = Environment(g, np.random.default_rng(0))
    a = env.play(1, [0])
    b = env.play(1, [0])
    assert a == b
    for e, ok in a.edge_status.items():
        assert g.src[e] in a.activated
        if ok:
            assert g.dst[e] in a.activated


def test_feedback_accumulates():
    fb = Feedback()
    env = Environment(ABC, np.random.default_rng(0))
    fb = fb.observe(env.play(1, [0]))
    fb = fb.observe(env.play(2, [2]))
    assert fb.round == 2 and fb.cumulative_active == {0, 1, 2}
    assert len(fb.per_round_trace) == 2


def test_schedule_policy_matches_nonadaptive_estimate():
    g = chain(0.5, 3)
    sched = SeedSchedule([[0], [0]])
    summary = run_adaptive(g, SchedulePolicy(sched), 2, 1, trials=4000, rng=Streams(5))
    est = estimate_rho(g, sched, 50_000, Streams(6))
    joint = np.hypot(summary.stderr, est.stderr)
    assert abs(summary.mean - est.mean) <= 4 * joint


def test_policy_over_budget_is_rejected():
    class Greedy:
        def __call__(self, g, fb, k, t, rng):
            return [0, 1]
    with pytest.raises(ValueError):
        run_adaptive(ABC, Greedy(), 1, 1)
    with pytest.raises(ValueError):
        run_adaptive(ABC, SchedulePolicy(SeedSchedule([[0]])), 1, 1, trials=0)


def test_trace_output():
    summary = run_adaptive(ABC, SchedulePolicy(SeedSchedule([[0], [2]])), 2, 1, 1, Streams(1))
    recs = list(trace_records(summary))
    assert recs == [
        {"trial": 0, "round": 1, "seeds": [0], "newly_activated": [0, 1], "cumulative": 2},
        {"trial": 0, "round": 2, "seeds": [2], "newly_activated": [2], "cumulative": 3},
    ]
    buf = io.StringIO()
    write_trace(summary, buf)
    assert [json.loads(x) for x in buf.getvalue().splitlines()] == recs


def test_all_active_returns_lowest_ids():
    pol = AdaIMMPolicy(0.5, 1.0, 2)
    fb = Feedback(1, frozenset({0, 1, 2}))
    assert pol(ABC, fb, 2, 2, Streams(1)) == [0, 1]


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_adaptive_runs_respect_budget_and_monotonicity(seed):
    rs = np.random.default_rng(seed)
    n = int(rs.integers(2, 8))
    g = small_graph(rs, n, max_stochastic=20)
    k = int(rs.integers(1, n + 1))
    summary = run_adaptive(g, AdaGreedyPolicy(R=100), 2, k, trials=1, rng=Streams(seed))
    run = summary.runs[0]
    assert all(len(r) <= k for r in run.schedule.rounds)
    assert all(x >= 0 for x in run.gains)
    assert sum(run.gains) == run.total_active <= n
