"""Immutable weighted digraph, edge-list ingestion and live-edge sampling."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "DirectedGraph",
    "LiveEdgeGraph",
    "EdgeListError",
    "ProbabilityError",
    "from_edge_list",
    "read_edge_list",
    "write_label_table",
    "sample_live_edges",
    "reach",
    "reverse_reach",
    "random_graph",
]


class EdgeListError(ValueError):
    """Malformed edge-list record."""

    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line.strip()!r}")
        self.lineno = lineno


class ProbabilityError(ValueError):
    """Edge probability outside (0, 1]."""


def _csr(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind="stable")
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=ptr[1:])
    return ptr, order.astype(np.int64)


class DirectedGraph:
    """Directed graph with IC propagation probabilities.

    Nodes are ``0..n-1``.  Edges keep their insertion index; ``out_ptr`` /
    ``out_eid`` and ``in_ptr`` / ``in_eid`` are CSR views listing edge ids by
    tail and by head respectively.  Instances are never mutated after
    construction, so they may be shared freely between threads.
    """

    def __init__(self, n: int, src, dst, prob, labels: Sequence[str] | None = None):
        src = np.asarray(src, dtype=np.int64).reshape(-1)
        dst = np.asarray(dst, dtype=np.int64).reshape(-1)
        prob = np.asarray(prob, dtype=np.float64).reshape(-1)
        if not (src.size == dst.size == prob.size):
            raise ValueError("src, dst and prob must have equal length")
        if n < 0:
            raise ValueError("node count must be non-negative")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("edge endpoint out of range")
        if prob.size and (np.any(prob <= 0) or np.any(prob > 1) or np.any(np.isnan(prob))):
            raise ProbabilityError("edge probabilities must lie in (0, 1]")
        self.n = int(n)
        self.src, self.dst, self.prob = src, dst, prob
        for arr in (src, dst, prob):
            arr.flags.writeable = False
        self.out_ptr, self.out_eid = _csr(src, self.n)
        self.in_ptr, self.in_eid = _csr(dst, self.n)
        # contiguous per-direction copies used by the numba kernels
        self.out_dst = dst[self.out_eid]
        self.out_prob = prob[self.out_eid]
        self.in_src = src[self.in_eid]
        self.in_prob = prob[self.in_eid]
        self.labels = list(labels) if labels is not None else [str(i) for i in range(self.n)]
        if len(self.labels) != self.n:
            raise ValueError("label table length must equal n")
        self._label_index = None
        self.duplicates_dropped = 0

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple], labels=None) -> "DirectedGraph":
        """Build from ``(u, v, p)`` triples; ``p == 0`` edges are absent from the model."""
        triples = [(int(u), int(v), float(p)) for u, v, p in edges if float(p) != 0.0]
        if not triples:
            return cls(n, [], [], [], labels)
        u, v, p = zip(*triples)
        return cls(n, u, v, p, labels)

    @property
    def m(self) -> int:
        return int(self.src.size)

    def edges(self):
        return zip(self.src.tolist(), self.dst.tolist(), self.prob.tolist())

    def out_edges(self, u: int) -> np.ndarray:
        return self.out_eid[self.out_ptr[u]:self.out_ptr[u + 1]]

    def in_edges(self, v: int) -> np.ndarray:
        return self.in_eid[self.in_ptr[v]:self.in_ptr[v + 1]]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_ptr)

    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_ptr)

    def node(self, label: str) -> int:
        if self._label_index is None:
            self._label_index = {lab: i for i, lab in enumerate(self.labels)}
        try:
            return self._label_index[str(label)]
        except KeyError:
            raise KeyError(f"unknown node label {label!r}") from None

    def __repr__(self) -> str:
        return f"DirectedGraph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class LiveEdgeGraph:
    """One realisation of every edge coin, aligned with ``graph`` edge ids."""

    graph: DirectedGraph
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.mask.shape != (self.graph.m,):
            raise ValueError("live mask must have one entry per edge")


def from_edge_list(lines: Iterable[str], weighted_cascade: bool = False,
                   default_p: float | None = None) -> DirectedGraph:
    """Parse whitespace separated ``u v [p]`` records.

    ``#`` starts a comment.  A record holding a single label declares an
    isolated node.  Labels are remapped to dense ids in order of first
    appearance (see ``graph.labels``).  Duplicate ``(u, v)`` records keep the
    first occurrence.  Under ``weighted_cascade`` every edge gets
    ``p = 1 / indegree(v)`` and record probabilities are ignored.
    """
    ids: dict[str, int] = {}
    seen: set[tuple[int, int]] = set()
    src, dst, prob = [], [], []
    dropped = 0

    def node_id(label: str) -> int:
        if label not in ids:
            ids[label] = len(ids)
        return ids[label]

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 1:
            node_id(parts[0])
            continue
        if len(parts) > 3:
            raise EdgeListError(lineno, raw, "expected 'u v [p]'")
        p = None
        if len(parts) == 3:
            try:
                p = float(parts[2])
            except ValueError:
                raise EdgeListError(lineno, raw, "probability is not a number") from None
            if not weighted_cascade and not (0.0 < p <= 1.0):
                raise ProbabilityError(f"line {lineno}: probability {p} outside (0, 1]")
        elif not weighted_cascade:
            if default_p is None:
                raise EdgeListError(lineno, raw, "missing probability (use weighted cascade or a default)")
            p = default_p
        u, v = node_id(parts[0]), node_id(parts[1])
        if (u, v) in seen:
            dropped += 1
            continue
        seen.add((u, v))
        src.append(u)
        dst.append(v)
        prob.append(p if p is not None else 1.0)

    n = len(ids)
    if weighted_cascade and src:
        indeg = np.bincount(np.asarray(dst, dtype=np.int64), minlength=n)
        prob = (1.0 / indeg[np.asarray(dst)]).tolist()
    if default_p is not None and not (0.0 < default_p <= 1.0):
        raise ProbabilityError(f"default probability {default_p} outside (0, 1]")
    labels = [None] * n
    for lab, i in ids.items():
        labels[i] = lab
    g = DirectedGraph(n, src, dst, prob, labels)
    g.duplicates_dropped = dropped
    if dropped:
        log.warning("dropped %d duplicate edge record(s)", dropped)
    return g


def read_edge_list(path, weighted_cascade: bool = False, default_p: float | None = None) -> DirectedGraph:
    with open(path, encoding="utf-8") as fh:
        return from_edge_list(fh, weighted_cascade=weighted_cascade, default_p=default_p)


def write_label_table(g: DirectedGraph, path) -> None:
    """Two-column ``id label`` text file."""
    Path(path).write_text("".join(f"{i} {lab}\n" for i, lab in enumerate(g.labels)), encoding="utf-8")


def sample_live_edges(g: DirectedGraph, rng: np.random.Generator) -> LiveEdgeGraph:
    return LiveEdgeGraph(g, rng.random(g.m) < g.prob)


def _closure(ptr, eid, other, mask, start) -> set[int]:
    seen = set(start)
    queue = deque(seen)
    while queue:
        x = queue.popleft()
        for e in eid[ptr[x]:ptr[x + 1]]:
            if mask[e]:
                y = int(other[e])
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
    return seen


def reach(live: LiveEdgeGraph, seeds) -> set[int]:
    """Nodes reachable from ``seeds`` along live edges (seeds included)."""
    g = live.graph
    return _closure(g.out_ptr, g.out_eid, g.dst, live.mask, (int(s) for s in seeds))


def reverse_reach(live: LiveEdgeGraph, root: int) -> set[int]:
    """Nodes with a live path to ``root`` (root included)."""
    g = live.graph
    return _closure(g.in_ptr, g.in_eid, g.src, live.mask, (int(root),))


def random_graph(n: int, m: int, rng: np.random.Generator, weighted_cascade: bool = True,
                 p: float = 0.1) -> DirectedGraph:
    """Uniform random digraph with ``m`` distinct non-loop edges."""
    if m > n * (n - 1):
        raise ValueError("too many edges requested")
    chosen: set[int] = set()
    while len(chosen) < m:
        need = m - len(chosen)
        draw = rng.integers(0, n * n, size=2 * need + 16)
        draw = draw[(draw // n) != (draw % n)]
        for k in draw.tolist():
            if len(chosen) == m:
                break
            chosen.add(k)
    keys = np.fromiter(chosen, dtype=np.int64, count=m)
    keys.sort()
    src, dst = keys // n, keys % n
    if weighted_cascade:
        indeg = np.bincount(dst, minlength=n)
        prob = 1.0 / indeg[dst]
    else:
        prob = np.full(m, p)
    return DirectedGraph(n, src, dst, prob)
