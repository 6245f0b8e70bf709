"""Exact and fixed-world reference computations.

Everything here is brute force: enumeration over the live/blocked status of
every edge with ``0 < p < 1`` (edges with ``p == 1`` are always live and do
not enter the exponent), and over self-activation outcomes of nodes with
``0 < q < 1``.  Reach sets are stored as ``uint64`` bitmasks, so graphs are
limited to 64 nodes.  Intended for tests and small reproductions only.
"""

from __future__ import annotations

import itertools
import math
import weakref
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .graph import DirectedGraph
from .mrt import SeedSchedule

__all__ = [
    "EnumerationCapError",
    "DEFAULT_CAP",
    "live_table",
    "reach_bits",
    "exact_sigma",
    "exact_reach_probs",
    "exact_rho_mrt",
    "mrt_value_table",
    "exact_sigma_b",
    "exhaustive_opt",
    "FixedWorlds",
    "world_delay_matrix",
    "definition_prr",
    "definition_credit",
    "exact_conditional_gain",
]

DEFAULT_CAP = 1 << 20


class EnumerationCapError(RuntimeError):
    """Raised instead of silently truncating an enumeration."""


_tables: "weakref.WeakKeyDictionary[DirectedGraph, tuple]" = weakref.WeakKeyDictionary()


def _bits(nodes) -> int:
    b = 0
    for v in nodes:
        b |= 1 << int(v)
    return b


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x).astype(np.int64)


def live_table(g: DirectedGraph, cap: int = DEFAULT_CAP):
    """All live-edge graphs with their probabilities: ``(prob[M], live[M, m])``."""
    stoch = np.flatnonzero(g.prob < 1.0)
    M = 1 << stoch.size
    if stoch.size > 62 or M > cap:
        raise EnumerationCapError(f"{stoch.size} stochastic edges exceed the cap {cap}")
    codes = np.arange(M, dtype=np.int64)
    live = np.ones((M, g.m), dtype=bool)
    prob = np.ones(M)
    for j, e in enumerate(stoch):
        bit = ((codes >> j) & 1).astype(bool)
        live[:, e] = bit
        prob *= np.where(bit, g.prob[e], 1.0 - g.prob[e])
    return prob, live


def reach_bits(g: DirectedGraph, live: np.ndarray) -> np.ndarray:
    """``R[w, v]`` = bitmask of reach({v}) in live-edge graph ``w``."""
    if g.n > 64:
        raise EnumerationCapError("bitmask oracle supports at most 64 nodes")
    M = live.shape[0]
    R = np.tile(np.left_shift(np.uint64(1), np.arange(g.n, dtype=np.uint64)), (M, 1))
    zero = np.uint64(0)
    for _ in range(max(g.n, 1)):
        before = R.copy()
        for e in range(g.m):
            s, d = g.src[e], g.dst[e]
            R[:, s] |= np.where(live[:, e], R[:, d], zero)
        if np.array_equal(before, R):
            break
    return R


def _table(g: DirectedGraph, cap: int):
    hit = _tables.get(g)
    if hit is None:
        prob, live = live_table(g, cap)
        hit = (prob, reach_bits(g, live))
        _tables[g] = hit
    return hit[0], hit[1]


def _union(R: np.ndarray, nodes) -> np.ndarray:
    out = np.zeros(R.shape[0], dtype=np.uint64)
    for v in nodes:
        out |= R[:, int(v)]
    return out


def exact_sigma(g: DirectedGraph, S, cap: int = DEFAULT_CAP) -> float:
    """Expected single-round IC spread of ``S``."""
    S = list(S)
    if not S:
        return 0.0
    prob, R = _table(g, cap)
    return float(prob @ _popcount(_union(R, S)))


def exact_reach_probs(g: DirectedGraph, S, cap: int = DEFAULT_CAP) -> np.ndarray:
    """``P[v in reach(L, S)]`` for every node ``v``."""
    prob, R = _table(g, cap)
    U = _union(R, S)
    shifts = np.arange(g.n, dtype=np.uint64)
    hits = ((U[:, None] >> shifts[None, :]) & np.uint64(1)).astype(float)
    return prob @ hits


def exact_rho_mrt(g: DirectedGraph, sched: SeedSchedule, cap: int = DEFAULT_CAP) -> float:
    """Exact multi-round spread.

    Rounds are independent, so ``P[v activated] = 1 - prod_t (1 - P[v in
    reach(L_t, S_t)])``; only one round's worth of live-edge graphs is
    enumerated.
    """
    miss = np.ones(g.n)
    for S in sched.rounds:
        if S:
            miss *= 1.0 - exact_reach_probs(g, S, cap)
    return float(np.sum(1.0 - miss))


def subset_reach_probs(g: DirectedGraph, cap: int = DEFAULT_CAP) -> np.ndarray:
    """``P[mask, v]`` for every node subset ``mask`` (bit ``v`` = node ``v``)."""
    if g.n > 16:
        raise EnumerationCapError("subset table limited to 16 nodes")
    prob, R = _table(g, cap)
    N = 1 << g.n
    U = np.zeros((N, R.shape[0]), dtype=np.uint64)
    for s in range(1, N):
        low = (s & -s).bit_length() - 1
        U[s] = U[s & (s - 1)] | R[:, low]
    shifts = np.arange(g.n, dtype=np.uint64)
    out = np.empty((N, g.n))
    for v in range(g.n):
        out[:, v] = ((U >> shifts[v]) & np.uint64(1)).astype(float) @ prob
    return out


def mrt_value_table(g: DirectedGraph, T: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Exact spread for every schedule, as a flat array over node-round masks.

    Index ``x`` encodes the pair set: bit ``(t-1)*n + v`` set iff ``(v, t)``
    is in the schedule.  Size ``2^(nT)``.
    """
    N = 1 << g.n
    if N ** T > cap * 16:
        raise EnumerationCapError(f"2^{g.n * T} schedules exceed the cap")
    P = subset_reach_probs(g, cap)
    miss = np.ones((1, g.n))
    for _ in range(T):
        # new round occupies the high bits of the index
        miss = (miss[None, :, :] * (1.0 - P)[:, None, :]).reshape(-1, g.n)
    return np.sum(1.0 - miss, axis=1)


def _q_table(q: np.ndarray, forced_bits: int):
    """All self-activation outcomes: ``(prob[A], bits[A])``."""
    stoch = [v for v in range(q.size) if 0.0 < q[v] < 1.0]
    base = forced_bits | _bits(v for v in range(q.size) if q[v] >= 1.0)
    probs, bits = [], []
    for combo in itertools.product((False, True), repeat=len(stoch)):
        p, b = 1.0, base
        for v, on in zip(stoch, combo):
            p *= q[v] if on else 1.0 - q[v]
            if on:
                b |= 1 << v
        probs.append(p)
        bits.append(b)
    return np.array(probs), bits


def exact_sigma_b(g: DirectedGraph, q, S, cap: int = DEFAULT_CAP) -> float:
    """Expected ``|reach(L, S u A_W)|`` under self-activation probabilities ``q``."""
    q = np.asarray(q, dtype=float)
    n_q = int(np.sum((q > 0) & (q < 1)))
    prob, R = _table(g, cap)
    if prob.size * (1 << n_q) > cap:
        raise EnumerationCapError("joint edge and self-activation enumeration exceeds the cap")
    qp, qbits = _q_table(q, 0)
    S_bits = _bits(S)
    total = 0.0
    for pa, ab in zip(qp, qbits):
        seeds = [v for v in range(g.n) if (ab | S_bits) >> v & 1]
        if not seeds:
            continue
        total += pa * float(prob @ _popcount(_union(R, seeds)))
    return total


def _subsets_upto(n: int, k: int):
    for size in range(0, min(k, n) + 1):
        yield from itertools.combinations(range(n), size)


def exhaustive_opt(problem: str, g: DirectedGraph, k: int, T: int = 1, evaluator=None,
                   q=None, additive: bool = False, max_candidates: int = 10 ** 6):
    """Optimum value and an argmax by full enumeration.

    problem: ``mrim-wr`` / ``mrim-cr`` (per-round budget ``k`` over ``T``
    rounds, exact oracle unless ``evaluator`` maps a schedule to a value),
    ``bim`` (``q`` required unless ``evaluator``), ``bpim`` / ``pim``
    (``evaluator`` maps a node set to a value).  ``pim`` with ``additive``
    scores each node once and takes the top ``k``.
    """
    n = g.n
    n_sets = sum(math.comb(n, s) for s in range(0, min(k, n) + 1))
    if problem in ("mrim-wr", "mrim-cr"):
        space = n_sets ** T
        if space > max_candidates:
            raise EnumerationCapError(f"{space} schedules exceed {max_candidates}")
        sets = list(_subsets_upto(n, k))
        if evaluator is None:
            P = subset_reach_probs(g)
            idx = np.array([_bits(s) for s in sets])
            miss = np.ones((1, n))
            for _ in range(T):
                miss = (miss[:, None, :] * (1.0 - P[idx])[None, :, :]).reshape(-1, n)
            vals = np.sum(1.0 - miss, axis=1)
            best = int(np.argmax(vals))
            choice = []
            for _ in range(T):
                choice.append(sets[best % len(sets)])
                best //= len(sets)
            choice.reverse()
            return float(vals.max()), SeedSchedule(choice)
        best_v, best_s = -math.inf, None
        for combo in itertools.product(sets, repeat=T):
            sched = SeedSchedule(combo)
            v = evaluator(sched)
            if v > best_v:
                best_v, best_s = v, sched
        return float(best_v), best_s
    if problem not in ("bim", "bpim", "pim"):
        raise ValueError(f"unknown problem {problem!r}")
    if problem == "bim" and evaluator is None:
        if q is None:
            raise ValueError("bim needs q or an evaluator")
        evaluator = lambda S: exact_sigma_b(g, q, S)  # noqa: E731
    if evaluator is None:
        raise ValueError(f"{problem} needs an evaluator")
    if problem == "pim" and additive:
        single = np.array([evaluator(frozenset([v])) for v in range(n)])
        order = np.lexsort((np.arange(n), -single))[:k]
        return float(single[order].sum()), frozenset(order.tolist())
    if n_sets > max_candidates:
        raise EnumerationCapError(f"{n_sets} seed sets exceed {max_candidates}")
    best_v, best_s = -math.inf, None
    for s in _subsets_upto(n, k):
        v = evaluator(frozenset(s))
        if v > best_v:
            best_v, best_s = v, frozenset(s)
    return float(best_v), best_s


# ---------------------------------------------------------------- delay worlds

@dataclass
class _World:
    active: np.ndarray
    sdelay: np.ndarray
    live: np.ndarray
    edelay: np.ndarray


class FixedWorlds:
    """A frozen batch of SAIC possible worlds.

    Objectives averaged over the batch are exact for the batch, so different
    seed sets are compared on common random numbers.  World ``i`` is the same
    world the sampling kernels see for ``(seed, i)``.
    """

    def __init__(self, g: DirectedGraph, q, nkind, nparam, ekind, eparam, count: int, seed: int):
        self.g = g
        self.worlds = [
            _World(*K.world_arrays(g.n, g.m, g.src, g.prob, np.asarray(q, float), nkind, nparam,
                                   ekind, eparam, np.uint64(seed), i))
            for i in range(count)
        ]
        self._buf = (np.empty(g.n), np.empty(g.n), np.empty(g.n, dtype=np.int64))

    def _mean(self, S, target: int) -> float:
        g = self.g
        mask = np.zeros(g.n, dtype=bool)
        mask[list(S)] = True
        tot = 0
        for w in self.worlds:
            tot += K.saic_count(g.n, g.out_ptr, g.out_dst, g.out_eid, w.active, w.sdelay, w.live,
                                w.edelay, mask, target, *self._buf)
        return tot / len(self.worlds)

    def sigma_b(self, S) -> float:
        return self._mean(S, 0)

    def rho(self, A) -> float:
        return self._mean(A, 1)

    def rho_b(self, S) -> float:
        return self._mean(S, 2)


def world_delay_matrix(n: int, src, dst, live, edelay) -> np.ndarray:
    """All-pairs minimum live-path delay by Floyd-Warshall (``inf`` if unreachable)."""
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    for s, d, ok, w in zip(src, dst, live, edelay):
        if ok and s != d:
            D[s, d] = min(D[s, d], w)
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D


def definition_prr(n, src, dst, active, sdelay, live, edelay, root):
    """P-RR set and first source of ``root`` straight from the definition.

    Members are nodes ``u`` with a live path to the root whose total delay
    ``sdelay[u] + dist(u, root)`` does not exceed the smallest such delay over
    self-activated nodes.
    """
    D = world_delay_matrix(n, src, dst, live, edelay)
    tot = np.asarray(sdelay) + D[:, root]
    reachable = np.isfinite(D[:, root])
    cand = [u for u in range(n) if reachable[u] and active[u]]
    if not cand:
        return frozenset(np.flatnonzero(reachable).tolist()), -1
    best = min(tot[u] for u in cand)
    source = min((u for u in cand if tot[u] == best))
    members = frozenset(u for u in range(n) if reachable[u] and tot[u] <= best)
    return members, source


def definition_credit(n, src, dst, active, sdelay, live, edelay, A, boosted=False):
    """Nodes preemptively credited to ``A`` (strictly earliest arrival)."""
    D = world_delay_matrix(n, src, dst, live, edelay)
    T = np.asarray(sdelay)[:, None] + D
    A = set(A)
    ins = [u for u in range(n) if u in A and (boosted or active[u])]
    outs = [u for u in range(n) if u not in A and active[u]]
    t_in = T[ins].min(axis=0) if ins else np.full(n, np.inf)
    t_out = T[outs].min(axis=0) if outs else np.full(n, np.inf)
    return frozenset(np.flatnonzero(t_in < t_out).tolist())


# ---------------------------------------------------------------- adaptive

def exact_conditional_gain(g: DirectedGraph, observations, seeds, round_: int,
                           cap: int = DEFAULT_CAP) -> float:
    """Conditional expected marginal gain of playing ``seeds`` in ``round_``.

    ``observations`` is an iterable of objects with ``round``, ``seeds``
    and ``edge_status`` (edge id -> live flag for every edge leaving a
    reached node).  All joint realisations of the observed rounds plus
    ``round_`` are enumerated, filtered for consistency with the
    observations, and the gain ``f(dom + item) - f(dom)`` is averaged under
    the conditional distribution.
    """
    obs = sorted(observations, key=lambda o: o.round)
    if any(o.round == round_ for o in obs):
        raise ValueError("round already observed")
    prob, live = live_table(g, cap)
    M = prob.size
    rounds = len(obs) + 1
    if M ** rounds > cap:
        raise EnumerationCapError(f"{M}^{rounds} joint realisations exceed the cap")
    R = reach_bits(g, live)
    weight = np.ones(1)
    base = np.zeros(1, dtype=np.uint64)
    for o in obs:
        ok = np.ones(M, dtype=bool)
        for e, status in o.edge_status.items():
            ok &= live[:, e] == bool(status)
        weight = np.multiply.outer(weight, prob * ok).reshape(-1)
        base = (base[:, None] | _union(R, o.seeds)[None, :]).reshape(-1)
    new = _union(R, seeds)
    weight = np.multiply.outer(weight, prob)
    both = base[:, None] | new[None, :]
    gain = _popcount(both) - _popcount(base)[:, None]
    return float((weight * gain).sum() / weight.sum())
