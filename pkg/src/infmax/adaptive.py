"""Adaptive multi-round seeding: feedback, policies and the evaluation harness."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph import DirectedGraph
from .mrt import SeedSchedule, spread_samples
from .ris import RRPool, _offsets, compute_params, imm_phase1, node_selection
from .rng import as_streams

__all__ = [
    "RoundObservation", "Feedback", "Environment", "AdaptiveRunResult", "AdaptiveSummary",
    "marginal_gain", "ada_greedy_round", "gen_weighted_rr", "ada_imm_round",
    "AdaGreedyPolicy", "AdaIMMPolicy", "SchedulePolicy", "run_adaptive", "write_trace",
]


@dataclass(frozen=True)
class RoundObservation:
    """What one round reveals: the seeds, the reached nodes and the status of
    every edge leaving a reached node."""

    round: int
    seeds: frozenset
    activated: frozenset
    edge_status: dict


@dataclass
class Feedback:
    round: int = 0
    cumulative_active: frozenset = frozenset()
    per_round_trace: list = field(default_factory=list)

    def observe(self, obs: RoundObservation) -> "Feedback":
        return Feedback(obs.round, self.cumulative_active | obs.activated,
                        self.per_round_trace + [obs])


class Environment:
    """Hidden realisation of all rounds for one trial.

    Edge statuses are drawn on first inspection and memoised, so the world
    is consistent while nothing outside the explored subgraph is ever
    materialised.
    """

    def __init__(self, g: DirectedGraph, rng: np.random.Generator):
        self.g = g
        self._gen = rng
        self._status: dict[tuple[int, int], bool] = {}

    def _live(self, t: int, e: int) -> bool:
        key = (t, e)
        s = self._status.get(key)
        if s is None:
            s = bool(self._gen.random() < self.g.prob[e])
            self._status[key] = s
        return s

    def play(self, t: int, seeds) -> RoundObservation:
        g = self.g
        seen = set(int(v) for v in seeds)
        queue = deque(seen)
        status = {}
        while queue:
            v = queue.popleft()
            for e in g.out_edges(v):
                e = int(e)
                ok = self._live(t, e)
                status[e] = ok
                u = int(g.dst[e])
                if ok and u not in seen:
                    seen.add(u)
                    queue.append(u)
        return RoundObservation(t, frozenset(int(v) for v in seeds), frozenset(seen), status)


def _countable(n, A_prev):
    mask = np.ones(n, dtype=bool)
    mask[list(A_prev)] = False
    return mask


def marginal_gain(g: DirectedGraph, A_prev, S, R: int | None = 10000, rng=None,
                  exact: bool = False) -> float:
    """Expected number of nodes reached by ``S`` outside ``A_prev``."""
    S = list(S)
    if not S:
        return 0.0
    if exact:
        from .oracle import exact_reach_probs
        return float(exact_reach_probs(g, S)[_countable(g.n, A_prev)].sum())
    seed = as_streams(rng).kernel_seed("gain")
    x = spread_samples(g, SeedSchedule([S]), R, seed, countable=_countable(g.n, A_prev))
    return float(x.mean())


def ada_greedy_round(g: DirectedGraph, A_prev, k: int, R: int, rng=None,
                     exact: bool = False) -> list[int]:
    """k-step greedy on the residual spread; ties go to the lowest id."""
    if not 1 <= k <= g.n:
        raise ValueError(f"budget k={k} must lie in 1..n={g.n}")
    st = as_streams(rng)
    S: list[int] = []
    calls = 0
    for _ in range(k):
        best, best_v = -1, -math.inf
        for u in range(g.n):
            if u in S:
                continue
            calls += 1
            v = marginal_gain(g, A_prev, S + [u], R, st.child(("cand", calls)), exact)
            if v > best_v + (1e-12 if exact else 0.0):
                best, best_v = u, v
        S.append(best)
    return S


def gen_weighted_rr(g: DirectedGraph, A_prev, rng=None):
    """RR set rooted uniformly outside ``A_prev``."""
    cands = sorted(set(range(g.n)) - set(A_prev))
    if not cands:
        raise ValueError("every node is already active; no root available")
    pool = RRPool(g, rng, candidates=cands)
    pool.draw(1)
    return pool.store.sample(0)


def ada_imm_round(g: DirectedGraph, A_prev, k: int, eps: float, ell: float, T: int, rng=None,
                  reuse: RRPool | None = None, first: int = 1):
    """One round of adaptive IMM.  Returns ``(seeds, Phase1Result, pool)``.

    ``reuse`` seeds the new store with the samples of an earlier pool whose
    root is still inactive; conditioned on that, their roots are uniform over
    the current candidates, so they remain valid samples.  ``first`` starts
    the halving search at step ``first``.
    """
    if not 1 <= k <= g.n:
        raise ValueError(f"budget k={k} must lie in 1..n={g.n}")
    A_prev = set(A_prev)
    cands = sorted(set(range(g.n)) - A_prev)
    if not cands:
        raise ValueError("every node is already active; no root available")
    n_a = len(cands)
    params = compute_params(eps, ell, k, g.n, T, "adaptive")
    pool = RRPool(g, rng, candidates=cands)
    if reuse is not None and len(reuse.store):
        members, offsets, roots = reuse.store.flat()
        keep = ~np.isin(roots, list(A_prev))
        sizes = np.diff(offsets)
        pool.store.append(members[np.repeat(keep, sizes)], _offsets(sizes[keep]), roots[keep])
    iters = int(math.floor(math.log2(n_a - 1))) if n_a > 2 else 0
    res = imm_phase1(pool, params, n_a, k, iterations=iters, first=first)
    seeds, _ = node_selection(pool.store, k)
    return seeds, res, pool


# ---------------------------------------------------------------- policies

class AdaGreedyPolicy:
    name = "ada-greedy"

    def __init__(self, R: int, exact: bool = False):
        self.R, self.exact = R, exact

    def reset(self):
        pass

    def __call__(self, g, feedback: Feedback, k, t, rng):
        return ada_greedy_round(g, feedback.cumulative_active, k, self.R, rng, self.exact)


class AdaIMMPolicy:
    """Adaptive IMM.  ``incremental`` carries still-valid RR sets into the
    next round and starts the halving search where the previous round
    stopped."""

    name = "ada-imm"

    def __init__(self, eps: float, ell: float, T: int, incremental: bool = False):
        self.eps, self.ell, self.T = eps, ell, T
        self.incremental = incremental
        self.log: list[dict] = []
        self.reset()

    def reset(self):
        self._pool = None
        self._first = 1

    def __call__(self, g, feedback: Feedback, k, t, rng):
        A = feedback.cumulative_active
        if len(A) >= g.n:
            return list(range(min(k, g.n)))
        seeds, res, pool = ada_imm_round(
            g, A, k, self.eps, self.ell, self.T, rng,
            reuse=self._pool if self.incremental else None,
            first=self._first if self.incremental else 1)
        if self.incremental:
            self._pool = pool
            self._first = max(res.iterations, 1)
        self.log.append({"round": t, "theta": res.params.theta, "LB": res.params.LB,
                         "samples": pool.total, "lam_star": res.params.lam_star})
        return seeds


class SchedulePolicy:
    """A fixed non-adaptive schedule played regardless of feedback."""

    name = "schedule"

    def __init__(self, sched: SeedSchedule):
        self.sched = sched

    def reset(self):
        pass

    def __call__(self, g, feedback, k, t, rng):
        return sorted(self.sched.rounds[t - 1]) if t <= self.sched.T else []


# ---------------------------------------------------------------- harness

@dataclass
class AdaptiveRunResult:
    schedule: SeedSchedule
    total_active: int
    gains: list[int]
    trace: list[RoundObservation]


@dataclass
class AdaptiveSummary:
    mean: float
    stderr: float
    runs: list[AdaptiveRunResult]


def run_adaptive(g: DirectedGraph, policy, T: int, k: int, trials: int = 1, rng=None) -> AdaptiveSummary:
    """Average final active count of ``policy`` over independent trials."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    st = as_streams(rng)
    runs = []
    for trial in range(trials):
        ts = st.child(("trial", trial))
        env = Environment(g, ts.generator("env"))
        fb = Feedback()
        if hasattr(policy, "reset"):
            policy.reset()
        rounds, gains = [], []
        for t in range(1, T + 1):
            seeds = list(policy(g, fb, k, t, ts.child(("policy", t))))
            if len(seeds) > k:
                raise ValueError(f"policy returned {len(seeds)} seeds, budget is {k}")
            obs = env.play(t, seeds)
            new = fb.observe(obs)
            gains.append(len(new.cumulative_active) - len(fb.cumulative_active))
            fb = new
            rounds.append(seeds)
        runs.append(AdaptiveRunResult(SeedSchedule(rounds), len(fb.cumulative_active), gains,
                                      fb.per_round_trace))
    vals = np.array([r.total_active for r in runs], dtype=float)
    sd = float(vals.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
    return AdaptiveSummary(float(vals.mean()), sd, runs)


def trace_records(summary: AdaptiveSummary):
    for i, run in enumerate(summary.runs):
        cum: set[int] = set()
        for obs in run.trace:
            new = sorted(obs.activated - cum)
            cum |= obs.activated
            yield {"trial": i, "round": obs.round, "seeds": sorted(obs.seeds),
                   "newly_activated": new, "cumulative": len(cum)}


def write_trace(summary: AdaptiveSummary, fh) -> None:
    """One JSON record per trial round."""
    for rec in trace_records(summary):
        fh.write(json.dumps(rec) + "\n")
