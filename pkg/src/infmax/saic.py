"""Self-activation independent cascade: worlds, objectives, P-RR sampling and IMM solvers."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .graph import DirectedGraph, LiveEdgeGraph, reach
from .mrt import SpreadEstimate
from .ris import RRPool, RRStore, compute_params, imm_phase1, node_selection
from .rng import as_streams

log = logging.getLogger(__name__)

__all__ = [
    "DelayDist", "SelfActivationProfile", "EdgeDelays", "PossibleWorld", "PRRResult",
    "SolverResult", "sample_world", "boosted_active_set", "preemptive_credit",
    "estimate_objective", "gen_prr", "imm_bim", "imm_bpim", "imm_pim", "generate_q",
    "parse_profile", "PRRPool", "PIMPool",
]

_KINDS = {"exp": 0, "const": 1}


@dataclass(frozen=True)
class DelayDist:
    """``exp`` with ``param`` = rate, or ``const`` with ``param`` = value."""

    kind: str = "exp"
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown delay kind {self.kind!r}")
        if self.kind == "exp" and not self.param > 0:
            raise ValueError("exponential rate must be positive")
        if self.kind == "const" and not self.param >= 0:
            raise ValueError("constant delay must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "DelayDist":
        kind, _, val = text.strip().partition(":")
        if not val:
            raise ValueError(f"delay spec {text!r} must look like exp:<rate> or const:<value>")
        return cls(kind, float(val))

    @property
    def code(self) -> int:
        return _KINDS[self.kind]

    def mean(self) -> float:
        return 1.0 / self.param if self.kind == "exp" else self.param

    def __str__(self) -> str:
        return f"{self.kind}:{self.param:g}"


@dataclass
class SelfActivationProfile:
    q: np.ndarray
    kind: np.ndarray
    param: np.ndarray

    @classmethod
    def uniform(cls, n: int, q, delay: DelayDist = DelayDist()) -> "SelfActivationProfile":
        qa = np.broadcast_to(np.asarray(q, dtype=float), (n,)).copy()
        return cls(qa, np.full(n, delay.code, dtype=np.int64), np.full(n, float(delay.param)))

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.q.size and (self.q.min() < 0 or self.q.max() > 1):
            raise ValueError("self-activation probabilities must lie in [0, 1]")
        if not (self.q.size == self.kind.size == self.param.size):
            raise ValueError("profile arrays must have length n")

    @property
    def n(self) -> int:
        return self.q.size

    def boosted(self, S) -> "SelfActivationProfile":
        q = self.q.copy()
        q[list(S)] = 1.0
        return SelfActivationProfile(q, self.kind, self.param)


@dataclass
class EdgeDelays:
    kind: np.ndarray
    param: np.ndarray

    @classmethod
    def uniform(cls, m: int, delay: DelayDist = DelayDist()) -> "EdgeDelays":
        return cls(np.full(m, delay.code, dtype=np.int64), np.full(m, float(delay.param)))


@dataclass
class PossibleWorld:
    """Self-activation flags/delays per node, liveness/delay per edge id."""

    active: np.ndarray
    self_delay: np.ndarray
    live: np.ndarray
    edge_delay: np.ndarray


@dataclass(frozen=True)
class PRRResult:
    members: frozenset
    source: int | None
    trace: tuple = ()


@dataclass
class SolverResult:
    seeds: list[int]
    estimate: float
    theta: float
    LB: float
    samples: int
    params: object = None
    est: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)


def _seed(rng, label):
    return np.uint64(as_streams(rng).kernel_seed(label))


def sample_world(g: DirectedGraph, profile: SelfActivationProfile, edge_delays: EdgeDelays,
                 rng=None, index: int = 0) -> PossibleWorld:
    """Possible world ``index`` of the stream; the samplers see the same world
    for the same seed and index."""
    arrs = K.world_arrays(g.n, g.m, g.src, g.prob, profile.q, profile.kind, profile.param,
                          edge_delays.kind, edge_delays.param, _seed(rng, "world"), index)
    return PossibleWorld(*arrs)


def boosted_active_set(g: DirectedGraph, world: PossibleWorld, S) -> set[int]:
    """Final active set with seeds boosted; delays play no role in membership."""
    start = set(int(v) for v in S) | set(np.flatnonzero(world.active).tolist())
    return reach(LiveEdgeGraph(g, world.live), start)


def preemptive_credit(g: DirectedGraph, world: PossibleWorld, A, boosted: bool = False) -> set[int]:
    """Nodes whose earliest activation comes from ``A``.

    Sources in ``A`` count only if self-activated, unless ``boosted`` (then
    every member of ``A`` starts at its own self-delay).  Competitors are the
    self-activated nodes outside ``A``; ties go to the competitors.
    """
    mask = np.zeros(g.n, dtype=bool)
    mask[list(A)] = True
    got = K.credit_mask(g.n, g.out_ptr, g.out_dst, g.out_eid, world.active, world.self_delay,
                        world.live, world.edge_delay, mask, boosted)
    return set(np.flatnonzero(got).tolist())


_TARGETS = {"sigma_b": 0, "rho": 1, "rho_b": 2}


def estimate_objective(g: DirectedGraph, profile: SelfActivationProfile, edge_delays: EdgeDelays,
                       target: str, S, R: int, rng=None) -> SpreadEstimate:
    """Forward Monte Carlo estimate of ``sigma_b(S)``, ``rho(S)`` or ``rho_b(S)``."""
    if target not in _TARGETS:
        raise ValueError(f"unknown target {target!r}")
    if R < 1:
        raise ValueError("R must be at least 1")
    mask = np.zeros(g.n, dtype=bool)
    mask[list(S)] = True
    x = K.saic_forward(g.n, g.src, g.prob, g.out_ptr, g.out_dst, g.out_eid, profile.q,
                       profile.kind, profile.param, edge_delays.kind, edge_delays.param, mask,
                       _TARGETS[target], _seed(rng, ("objective", target)), 0, int(R))
    sd = float(x.std(ddof=1)) if R > 1 else 0.0
    return SpreadEstimate(float(x.mean()), sd / math.sqrt(R), int(R))


def gen_prr(g: DirectedGraph, profile: SelfActivationProfile, edge_delays: EdgeDelays,
            root: int | None = None, rng=None, world: PossibleWorld | None = None,
            index: int = 0) -> PRRResult:
    """One preemptive RR set.

    With ``world`` the search reads pinned coins and delays and also returns
    the sequence of popped delays; otherwise randomness is drawn lazily.
    """
    if world is not None:
        if root is None:
            raise ValueError("a pinned world needs an explicit root")
        members, src, trace = K.prr_fixed(g.n, g.in_ptr, g.in_src, g.in_eid, world.self_delay,
                                          world.active, world.live, world.edge_delay, int(root))
        return PRRResult(frozenset(members.tolist()), None if src < 0 else int(src),
                         tuple(trace.tolist()))
    roots = np.empty(0, np.int64) if root is None else np.array([root], dtype=np.int64)
    members, _, _, sources = K.prr_batch(
        g.n, g.in_ptr, g.in_src, g.in_eid, g.in_prob, profile.q, profile.kind, profile.param,
        edge_delays.kind, edge_delays.param, _seed(rng, "prr"), index, 1, True, roots)
    src = int(sources[0])
    return PRRResult(frozenset(members.tolist()), None if src < 0 else src)


class PRRPool:
    """P-RR sets stored for coverage (the boosted preemptive problem)."""

    def __init__(self, g, profile, edge_delays, rng=None, batch: int = 1 << 13):
        self.g, self.profile, self.ed = g, profile, edge_delays
        self.seed = _seed(rng, "prr-pool")
        self.store = RRStore(g.n)
        self.next_index = 0
        self.batch = batch

    @property
    def total(self) -> int:
        return self.store.total

    def _call(self, count, keep):
        g, p, ed = self.g, self.profile, self.ed
        out = K.prr_batch(g.n, g.in_ptr, g.in_src, g.in_eid, g.in_prob, p.q, p.kind, p.param,
                          ed.kind, ed.param, self.seed, self.next_index, count, keep,
                          np.empty(0, np.int64))
        self.next_index += count
        return out

    def draw(self, count: int) -> None:
        while count > 0:
            c = min(count, self.batch)
            members, offsets, roots, _ = self._call(c, True)
            self.store.append(members, offsets, roots)
            count -= c

    def fill_to(self, target: float, inclusive: bool = False) -> None:
        need = (math.floor(target) + 1 if inclusive else math.ceil(target)) - self.total
        if need > 0:
            self.draw(int(need))

    def statistic(self, k: int) -> float:
        return node_selection(self.store, k)[1]


class PIMPool(PRRPool):
    """Only the first self-activated source of each P-RR set is kept."""

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.est = np.zeros(self.g.n, dtype=np.int64)
        self.count = 0

    @property
    def total(self) -> int:
        return self.count

    def draw(self, count: int) -> None:
        while count > 0:
            c = min(count, self.batch)
            _, _, _, sources = self._call(c, False)
            hit = sources[sources >= 0]
            self.est += np.bincount(hit, minlength=self.g.n)
            self.count += c
            count -= c

    def topk(self, k: int) -> int:
        return int(np.sort(self.est)[::-1][:k].sum())

    def statistic(self, k: int) -> float:
        return self.topk(k) / self.count if self.count else 0.0


def _check_k(g, k):
    if not 1 <= k <= g.n:
        raise ValueError(f"budget k={k} must lie in 1..n={g.n}")


def imm_bim(g: DirectedGraph, profile: SelfActivationProfile, k: int, eps: float = 0.1,
            ell: float = 1.0, rng=None) -> SolverResult:
    """IMM with RR sets already covered by a self-activated member counted separately."""
    _check_k(g, k)
    params = compute_params(eps, ell, k, g.n, 1, "standard")
    pool = RRPool(g, rng, q=profile.q)
    res = imm_phase1(pool, params, g.n, k)
    seeds, frac = node_selection(pool.store, k)
    return SolverResult(seeds, g.n * frac, res.params.theta, res.params.LB, pool.total, res.params)


def imm_bpim(g: DirectedGraph, profile: SelfActivationProfile, edge_delays: EdgeDelays, k: int,
             eps: float = 0.1, ell: float = 1.0, rng=None) -> SolverResult:
    """IMM over preemptive RR sets."""
    _check_k(g, k)
    params = compute_params(eps, ell, k, g.n, 1, "standard")
    pool = PRRPool(g, profile, edge_delays, rng)
    res = imm_phase1(pool, params, g.n, k)
    seeds, frac = node_selection(pool.store, k)
    return SolverResult(seeds, g.n * frac, res.params.theta, res.params.LB, pool.total, res.params)


def imm_pim(g: DirectedGraph, profile: SelfActivationProfile, edge_delays: EdgeDelays, k: int,
            eps: float = 0.1, ell: float = 1.0, rng=None) -> SolverResult:
    """Top-``k`` nodes by how often they are the first source of a P-RR set.

    The search loop runs ``floor(log2 n) - 1`` times with ``<=`` fill
    conditions; the stopping statistic is the top-``k`` count as a fraction
    of the samples drawn.
    """
    _check_k(g, k)
    params = compute_params(eps, ell, k, g.n, 1, "pim")
    pool = PIMPool(g, profile, edge_delays, rng)
    iters = max(int(math.floor(math.log2(g.n))) - 1, 0) if g.n > 1 else 0
    res = imm_phase1(pool, params, g.n, k, iterations=iters, inclusive=(True, True))
    est = pool.est
    warnings = []
    if not est.any():
        seeds = list(range(k))
        msg = "no P-RR sample found a self-activated source; returning the lowest ids"
        log.warning(msg)
        warnings.append(msg)
    else:
        seeds = np.lexsort((np.arange(g.n), -est))[:k].tolist()
    estimate = g.n * est[seeds].sum() / pool.total
    return SolverResult(seeds, float(estimate), res.params.theta, res.params.LB, pool.total,
                        res.params, est.copy(), warnings)


# ---------------------------------------------------------------- profiles

def generate_q(case: int, c: float, g: DirectedGraph, rng=None) -> np.ndarray:
    """Self-activation probabilities for the synthetic cases 0-4.

    ``beta_u ~ U[0, c]``.  0: ``beta_u``; 1: ``beta_u * outdeg``; 2:
    ``beta_u / outdeg``; 3 and 4 assign case 0 to a random half of the nodes
    and case 1 (resp. 2) to the rest.  Values are clipped to ``[0, 1]``;
    a node without out-edges uses out-degree 1 in case 2.
    """
    if case not in range(5):
        raise ValueError("q case must be 0..4")
    if c < 0:
        raise ValueError("base value bound must be non-negative")
    gen = as_streams(rng).generator(("q", case))
    beta = gen.uniform(0.0, c, size=g.n)
    d = g.out_degree().astype(float)
    uni = beta
    pos = beta * d
    neg = beta / np.maximum(d, 1.0)
    if case == 0:
        q = uni
    elif case == 1:
        q = pos
    elif case == 2:
        q = neg
    else:
        half = np.zeros(g.n, dtype=bool)
        half[gen.permutation(g.n)[: g.n // 2]] = True
        q = np.where(half, uni, pos if case == 3 else neg)
    return np.clip(q, 0.0, 1.0)


def parse_profile(lines, g: DirectedGraph, rng=None):
    """Read a key-value profile file.

    Recognised keys (``#`` comments, one ``key = value`` per line)::

        q = 0.3              # same probability for every node
        q_case = 1           # or a synthetic case ...
        q_base = 2           # ... with its base bound c
        q[<label>] = 0.9     # per-node override, applied last
        node_delay = exp:1
        edge_delay = const:0.5

    Returns ``(SelfActivationProfile, EdgeDelays)``.
    """
    conf: dict[str, str] = {}
    overrides: dict[str, float] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"profile line {lineno}: expected key = value")
        key, val = key.strip(), val.strip()
        if key.startswith("q[") and key.endswith("]"):
            overrides[key[2:-1]] = float(val)
        elif key in ("q", "q_case", "q_base", "node_delay", "edge_delay"):
            conf[key] = val
        else:
            raise ValueError(f"profile line {lineno}: unknown key {key!r}")
    if "q" in conf and "q_case" in conf:
        raise ValueError("profile sets both q and q_case")
    if "q_case" in conf:
        q = generate_q(int(conf["q_case"]), float(conf.get("q_base", 1.0)), g, rng)
    else:
        q = np.full(g.n, float(conf.get("q", 0.0)))
    for lab, val in overrides.items():
        q[g.node(lab)] = val
    nd = DelayDist.parse(conf.get("node_delay", "exp:1"))
    ed = DelayDist.parse(conf.get("edge_delay", "exp:1"))
    prof = SelfActivationProfile.uniform(g.n, 0.0, nd)
    prof = SelfActivationProfile(q, prof.kind, prof.param)
    return prof, EdgeDelays.uniform(g.m, ed)
