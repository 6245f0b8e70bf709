import io
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infmax import DirectedGraph, from_edge_list, random_graph, read_edge_list
from infmax.graph import (EdgeListError, LiveEdgeGraph, ProbabilityError, reach, reverse_reach,
                          sample_live_edges, write_label_table)


def test_weighted_cascade_indegree_four():
    lines = ["a v", "b v", "c v", "d v", "v a"]
    g = from_edge_list(lines, weighted_cascade=True)
    v = g.node("v")
    probs = g.prob[g.in_edges(v)]
    assert probs.tolist() == [0.25] * 4
    assert g.prob[g.in_edges(g.node("a"))].tolist() == [1.0]


def test_weighted_cascade_counts_after_dedup():
    g = from_edge_list(["a c", "b c", "a c"], weighted_cascade=True)
    assert g.m == 2
    assert g.prob.tolist() == [0.5, 0.5]


def test_labels_are_dense_in_first_seen_order():
    g = from_edge_list(["x y 0.5", "# comment", "", "z   # isolated", "y x 1"])
    assert g.labels == ["x", "y", "z"]
    assert g.n == 3 and g.m == 2
    assert g.node("z") == 2
    with pytest.raises(KeyError):
        g.node("w")


def test_duplicate_edges_keep_first(caplog):
    with caplog.at_level(logging.WARNING):
        g = from_edge_list(["a b 0.2", "a b 0.9"])
    assert g.m == 1 and g.prob[0] == 0.2
    assert g.duplicates_dropped == 1
    assert "duplicate" in caplog.text


@pytest.mark.parametrize("bad", ["a b 0", "a b 1.5", "a b -0.1"])
def test_probability_out_of_range(bad):
    with pytest.raises(ProbabilityError):
        from_edge_list([bad])


def test_malformed_lines_report_line_number():
    with pytest.raises(EdgeListError) as err:
        from_edge_list(["a b 0.5", "a b c d"])
    assert err.value.lineno == 2
    with pytest.raises(EdgeListError):
        from_edge_list(["a b x"])


def test_missing_probability_needs_a_default():
    with pytest.raises(EdgeListError):
        from_edge_list(["a b"])
    g = from_edge_list(["a b"], default_p=0.3)
    assert g.prob.tolist() == [0.3]


def test_zero_probability_edges_are_absent():
    g = DirectedGraph.from_edges(3, [(0, 1, 0.0), (1, 2, 0.4)])
    assert g.m == 1 and g.src.tolist() == [1]


def test_constructor_validation():
    with pytest.raises(ValueError):
        DirectedGraph(2, [0], [2], [0.5])
    with pytest.raises(ValueError):
        DirectedGraph(2, [0], [1], [0.5, 0.5])
    with pytest.raises(ProbabilityError):
        DirectedGraph(2, [0], [1], [float("nan")])


def test_graph_arrays_are_read_only():
    g = DirectedGraph(2, [0], [1], [0.5])
    with pytest.raises(ValueError):
        g.prob[0] = 1.0


def test_live_fraction_matches_probability():
    g = DirectedGraph(2, [0], [1], [0.5])
    gen = np.random.default_rng(5)
    N = 100_000
    live = sum(bool(sample_live_edges(g, gen).mask[0]) for _ in range(N))
    sd = np.sqrt(0.25 / N)
    assert abs(live / N - 0.5) <= 3 * sd


def test_reach_and_reverse_reach():
    g = DirectedGraph(4, [0, 1, 2], [1, 2, 3], [1.0, 1.0, 1.0])
    live = LiveEdgeGraph(g, np.array([True, False, True]))
    assert reach(live, [0]) == {0, 1}
    assert reach(live, [2]) == {2, 3}
    assert reverse_reach(live, 3) == {2, 3}
    with pytest.raises(ValueError):
        LiveEdgeGraph(g, np.ones(2, dtype=bool))


def test_read_edge_list_and_label_table(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("alice bob 0.5\nbob carol 0.25\n")
    g = read_edge_list(path)
    out = tmp_path / "labels.tsv"
    write_label_table(g, out)
    rows = [line.split() for line in out.read_text().splitlines()]
    assert rows == [["0", "alice"], ["1", "bob"], ["2", "carol"]]


def test_random_graph_shape():
    g = random_graph(50, 200, np.random.default_rng(1))
    assert g.n == 50 and g.m == 200
    assert not np.any(g.src == g.dst)
    assert len(set(zip(g.src.tolist(), g.dst.tolist()))) == 200
    indeg = g.in_degree()
    assert np.allclose(g.prob, 1.0 / indeg[g.dst])
    with pytest.raises(ValueError):
        random_graph(3, 7, np.random.default_rng(0))


edge_lists = st.integers(1, 8).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1),
                       st.floats(0.01, 1.0)), max_size=20)))


@given(edge_lists)
def test_csr_views_are_consistent(data):
    n, edges = data
    g = DirectedGraph.from_edges(n, edges)
    assert g.out_degree().sum() == g.m == g.in_degree().sum()
    for u in range(n):
        assert all(g.src[e] == u for e in g.out_edges(u))
        assert all(g.dst[e] == u for e in g.in_edges(u))
    assert sorted(g.out_eid.tolist()) == list(range(g.m))
    assert np.array_equal(g.in_src, g.src[g.in_eid])


@settings(max_examples=50)
@given(edge_lists, st.integers(0, 2**32 - 1))
def test_reach_is_closed_and_dual(data, seed):
    n, edges = data
    g = DirectedGraph.from_edges(n, edges)
    live = sample_live_edges(g, np.random.default_rng(seed))
    seeds = {0}
    r = reach(live, seeds)
    assert seeds <= r
    for e in np.flatnonzero(live.mask):
        if g.src[e] in r:
            assert g.dst[e] in r
    for v in range(n):
        assert (v in r) == (0 in reverse_reach(live, v))


def test_round_trip_through_text():
    text = io.StringIO("1 2 0.5\n2 3 0.75\n")
    g = from_edge_list(text)
    assert g.labels == ["1", "2", "3"]
    assert list(g.edges()) == [(0, 1, 0.5), (1, 2, 0.75)]
