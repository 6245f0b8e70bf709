"""Multi-round triggering (IC) model: schedules, simulation, spread estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels as K
from .graph import DirectedGraph, reach, sample_live_edges
from .rng import Streams, as_streams

__all__ = ["SeedSchedule", "SpreadEstimate", "simulate_schedule", "estimate_rho",
           "simulation_count", "spread_samples"]


@dataclass(frozen=True)
class SeedSchedule:
    """Per-round seed sets ``S_1..S_T`` (round ``t`` is ``rounds[t-1]``)."""

    rounds: tuple[frozenset, ...]
    budget: int | None = None

    def __init__(self, rounds: Iterable[Iterable[int]], budget: int | None = None):
        rs = tuple(frozenset(int(v) for v in r) for r in rounds)
        if budget is not None and any(len(r) > budget for r in rs):
            raise ValueError(f"a round exceeds the budget k={budget}")
        object.__setattr__(self, "rounds", rs)
        object.__setattr__(self, "budget", budget)

    @classmethod
    def empty(cls, T: int, budget: int | None = None) -> "SeedSchedule":
        return cls([()] * T, budget)

    @property
    def T(self) -> int:
        return len(self.rounds)

    def pairs(self) -> set[tuple[int, int]]:
        """Node-round pairs ``(v, t)`` with 1-based rounds."""
        return {(v, t + 1) for t, r in enumerate(self.rounds) for v in r}

    @classmethod
    def from_pairs(cls, pairs, T: int, budget: int | None = None) -> "SeedSchedule":
        rounds = [set() for _ in range(T)]
        for v, t in pairs:
            if not 1 <= t <= T:
                raise ValueError(f"round {t} outside 1..{T}")
            rounds[t - 1].add(v)
        return cls(rounds, budget)

    def with_pair(self, v: int, t: int) -> "SeedSchedule":
        rounds = [set(r) for r in self.rounds]
        rounds[t - 1].add(v)
        return SeedSchedule(rounds)

    def validate(self, g: DirectedGraph) -> None:
        for r in self.rounds:
            for v in r:
                if not 0 <= v < g.n:
                    raise ValueError(f"seed {v} is not a node of the graph")

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        lens = [len(r) for r in self.rounds]
        ptr = np.zeros(len(lens) + 1, dtype=np.int64)
        np.cumsum(lens, out=ptr[1:])
        nodes = np.fromiter((v for r in self.rounds for v in sorted(r)), dtype=np.int64,
                            count=int(ptr[-1]))
        return ptr, nodes

    def as_lists(self) -> list[list[int]]:
        return [sorted(r) for r in self.rounds]


@dataclass(frozen=True)
class SpreadEstimate:
    mean: float
    stderr: float
    samples: int

    def ci(self, z: float = 4.0) -> tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr


def simulate_schedule(g: DirectedGraph, sched: SeedSchedule, rng) -> set[int]:
    """One MRT outcome: union over rounds of reach(L_t, S_t) with fresh L_t."""
    if isinstance(rng, (Streams, int)) or rng is None:
        rng = as_streams(rng).generator("simulate")
    out: set[int] = set()
    for seeds in sched.rounds:
        if seeds:
            out |= reach(sample_live_edges(g, rng), seeds)
    return out


def spread_samples(g: DirectedGraph, sched: SeedSchedule, R: int, seed: int,
                   start: int = 0, countable=None) -> np.ndarray:
    """Per-simulation activated counts from the compiled kernel.

    Samples are keyed by ``(seed, index)``: reusing ``seed`` across schedules
    gives common random numbers.  ``countable`` (boolean per node) restricts
    which activated nodes are counted.
    """
    sched.validate(g)
    ptr, nodes = sched.csr()
    if countable is None:
        countable = np.ones(g.n, dtype=bool)
    return K.mrt_forward(g.n, g.out_ptr, g.out_dst, g.out_eid, g.out_prob, ptr, nodes,
                         np.asarray(countable, dtype=bool), np.uint64(seed), start, int(R))


def estimate_rho(g: DirectedGraph, sched: SeedSchedule, R: int, rng=None,
                 crn_seed: int | None = None) -> SpreadEstimate:
    """Monte Carlo estimate of the multi-round spread.

    By default every call draws fresh worlds from ``rng``.  ``crn_seed`` pins
    the world stream so that different schedules are compared on identical
    live-edge draws (variance reduction, off by default).
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    if not any(sched.rounds):
        return SpreadEstimate(0.0, 0.0, int(R))
    seed = crn_seed if crn_seed is not None else as_streams(rng).kernel_seed("rho")
    x = spread_samples(g, sched, R, seed)
    sd = float(x.std(ddof=1)) if R > 1 else 0.0
    return SpreadEstimate(float(x.mean()), sd / math.sqrt(R), int(R))


def simulation_count(k: int, n: int, ell: float, T: int, eps: float,
                     t_squared: bool = False) -> int:
    """Monte Carlo simulations per greedy evaluation for DoubleGreedy.

    ``ceil(31 k^2 n ln(2 k n^(l+1) T) / eps^2)``; ``t_squared`` multiplies the
    leading factor by ``T^2`` (the variant appearing in the proof).
    """
    if min(k, n, T) < 1 or ell <= 0 or eps <= 0:
        raise ValueError("all inputs must be positive")
    lead = 31 * k * k * n * (T * T if t_squared else 1)
    log_term = math.log(2 * k * T) + (ell + 1) * math.log(n)
    return math.ceil(lead * log_term / eps ** 2)

