"""Non-adaptive multi-round greedy solvers (per-round and cross-round)."""

from __future__ import annotations

import heapq
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .graph import DirectedGraph
from .mrt import SeedSchedule, estimate_rho
from .rng import as_streams

log = logging.getLogger(__name__)

__all__ = ["ExactEvaluator", "MCEvaluator", "Pick", "GreedyResult", "double_greedy",
           "global_greedy"]

TIE_TOL = 1e-12


class ExactEvaluator:
    """Exact multi-round spread by enumeration (small graphs only)."""

    tol = TIE_TOL

    def __init__(self, g: DirectedGraph):
        from .oracle import exact_rho_mrt
        self._f = lambda s: exact_rho_mrt(g, s)
        self.calls = 0

    def __call__(self, sched: SeedSchedule) -> float:
        self.calls += 1
        return self._f(sched)

    def batch(self, scheds):
        return [self(s) for s in scheds]


class MCEvaluator:
    """Monte Carlo spread with ``R`` fresh simulations per evaluation.

    ``crn=True`` reuses one world stream for every evaluation (common random
    numbers); the default draws new worlds for each candidate.
    """

    tol = 0.0

    def __init__(self, g: DirectedGraph, R: int, rng=None, crn: bool = False, threads: int = 1):
        self.g, self.R = g, int(R)
        self.streams = as_streams(rng)
        self.crn_seed = self.streams.kernel_seed("crn") if crn else None
        self.threads = max(1, int(threads))
        self.calls = 0

    def _one(self, sched, idx):
        return estimate_rho(self.g, sched, self.R, self.streams.child(("eval", idx)),
                            crn_seed=self.crn_seed).mean

    def __call__(self, sched: SeedSchedule) -> float:
        self.calls += 1
        return self._one(sched, self.calls)

    def batch(self, scheds):
        base = self.calls
        self.calls += len(scheds)
        idx = range(base + 1, base + 1 + len(scheds))
        if self.threads == 1 or len(scheds) < 2:
            return [self._one(s, i) for s, i in zip(scheds, idx)]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(self._one, scheds, idx))


@dataclass(frozen=True)
class Pick:
    node: int
    round: int
    gain: float
    zero_gain: bool


@dataclass
class GreedyResult:
    schedule: SeedSchedule
    value: float
    picks: list[Pick] = field(default_factory=list)
    evaluations: int = 0


def _argmax(vals, tol):
    """Index of the first value within ``tol`` of the maximum."""
    best = max(vals)
    for i, v in enumerate(vals):
        if v >= best - tol:
            return i
    raise AssertionError("unreachable")


def _check(g, T, k):
    if T < 1:
        raise ValueError("T must be at least 1")
    if not 1 <= k <= max(g.n, 1):
        raise ValueError(f"budget k={k} must lie in 1..n={g.n}")


def double_greedy(g: DirectedGraph, T: int, k: int, evaluator, lazy: bool = False) -> GreedyResult:
    """Round-by-round greedy: fill ``S_1`` with ``k`` picks, then ``S_2``, and so on."""
    _check(g, T, k)
    rounds = [set() for _ in range(T)]
    cur = 0.0
    picks: list[Pick] = []
    tol = getattr(evaluator, "tol", 0.0)
    for t in range(1, T + 1):
        if lazy:
            cur = _lazy_fill(g, rounds, [t], k, evaluator, cur, picks)
            continue
        for _ in range(k):
            cands = [u for u in range(g.n) if u not in rounds[t - 1]]
            if not cands:
                break
            vals = evaluator.batch([_with(rounds, u, t) for u in cands])
            i = _argmax(vals, tol)
            gain = vals[i] - cur
            rounds[t - 1].add(cands[i])
            picks.append(Pick(cands[i], t, gain, gain <= tol))
            cur = vals[i]
    return GreedyResult(SeedSchedule(rounds, k), cur, picks, getattr(evaluator, "calls", 0))


def global_greedy(g: DirectedGraph, T: int, k: int, evaluator, lazy: bool = False) -> GreedyResult:
    """Greedy over node-round pairs under the per-round budget (partition matroid)."""
    _check(g, T, k)
    rounds = [set() for _ in range(T)]
    cur = 0.0
    picks: list[Pick] = []
    tol = getattr(evaluator, "tol", 0.0)
    if lazy:
        cur = _lazy_fill(g, rounds, list(range(1, T + 1)), k, evaluator, cur, picks)
        return GreedyResult(SeedSchedule(rounds, k), cur, picks, getattr(evaluator, "calls", 0))
    for _ in range(T * k):
        cands = [(t, u) for t in range(1, T + 1) if len(rounds[t - 1]) < k
                 for u in range(g.n) if u not in rounds[t - 1]]
        if not cands:
            break
        vals = evaluator.batch([_with(rounds, u, t) for t, u in cands])
        i = _argmax(vals, tol)
        t, u = cands[i]
        gain = vals[i] - cur
        rounds[t - 1].add(u)
        picks.append(Pick(u, t, gain, gain <= tol))
        cur = vals[i]
    return GreedyResult(SeedSchedule(rounds, k), cur, picks, getattr(evaluator, "calls", 0))


def _with(rounds, u, t) -> SeedSchedule:
    rs = [set(r) for r in rounds]
    rs[t - 1].add(u)
    return SeedSchedule(rs)


def _lazy_fill(g, rounds, allowed, k, evaluator, cur, picks):
    """CELF: stale marginal gains are upper bounds under submodularity."""
    tol = getattr(evaluator, "tol", 0.0)
    heap = []
    for t in allowed:
        for u in range(g.n):
            if u not in rounds[t - 1]:
                heap.append((-(evaluator(_with(rounds, u, t)) - cur), t, u, 0))
    heapq.heapify(heap)
    stamp = 0
    budget = sum(k - len(rounds[t - 1]) for t in allowed)
    while heap and budget > 0:
        neg, t, u, at = heapq.heappop(heap)
        if len(rounds[t - 1]) >= k:
            continue
        if at != stamp:
            val = evaluator(_with(rounds, u, t))
            heapq.heappush(heap, (-(val - cur), t, u, stamp))
            continue
        gain = -neg
        rounds[t - 1].add(u)
        picks.append(Pick(u, t, gain, gain <= tol))
        cur += gain
        stamp += 1
        budget -= 1
    return cur
