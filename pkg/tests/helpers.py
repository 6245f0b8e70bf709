"""Small random instances shared by the test modules."""

import itertools

import numpy as np

from infmax import DirectedGraph


def small_graph(rs: np.random.Generator, n: int, max_edges: int | None = None,
                max_stochastic: int = 10, p_certain: float = 0.3) -> DirectedGraph:
    """Random digraph with at most ``max_stochastic`` edges of 0 < p < 1."""
    pairs = [(u, v) for u, v in itertools.permutations(range(n), 2)]
    cap = len(pairs) if max_edges is None else min(max_edges, len(pairs))
    m = int(rs.integers(0, cap + 1))
    pick = rs.permutation(len(pairs))[:m]
    src, dst, prob = [], [], []
    stoch = 0
    for j in pick:
        u, v = pairs[j]
        if rs.random() < p_certain or stoch >= max_stochastic:
            p = 1.0
        else:
            p = float(rs.uniform(0.1, 0.9))
            stoch += 1
        src.append(u)
        dst.append(v)
        prob.append(p)
    return DirectedGraph(n, src, dst, prob)


def random_subset(rs: np.random.Generator, pool, lo: int, hi: int) -> list[int]:
    pool = list(pool)
    size = int(rs.integers(lo, min(hi, len(pool)) + 1))
    return sorted(int(v) for v in rs.choice(pool, size=size, replace=False))


def chain(p: float = 1.0, n: int = 2) -> DirectedGraph:
    """0 -> 1 -> ... -> n-1 with a common probability."""
    return DirectedGraph(n, list(range(n - 1)), list(range(1, n)), [p] * (n - 1))


def star() -> DirectedGraph:
    """a -> {b, c} with p = 1 plus an isolated node d."""
    return DirectedGraph(4, [0, 0], [1, 2], [1.0, 1.0], labels=["a", "b", "c", "d"])
