"""Reverse influence sampling: RR sets, RR sequences, coverage and IMM sizing."""

from __future__ import annotations

import io
import logging
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from .graph import DirectedGraph
from .mrt import SeedSchedule
from .rng import as_streams

log = logging.getLogger(__name__)

__all__ = [
    "RRSet", "RRSequence", "RRStore", "RRPool", "ImmParams", "Phase1Result",
    "gen_rr", "gen_rr_sequence", "estimate_rho_rr", "node_selection",
    "compute_params", "imm_phase1", "imm_mrim", "log_binom",
]

ONE_MINUS_INV_E = 1.0 - 1.0 / math.e


@dataclass(frozen=True)
class RRSet:
    root: int
    members: frozenset


@dataclass(frozen=True)
class RRSequence:
    root: int
    per_round: tuple[frozenset, ...]


class RRStore:
    """Append-only collection of RR samples in flat CSR form.

    A sample spanning ``rounds`` rounds stores its round-``r`` members as
    element ids ``v + r*n``, so one coverage structure serves both plain RR
    sets (``rounds == 1``) and RR sequences.  ``covered_external`` counts
    samples that were covered by something other than a seed and therefore
    not stored.
    """

    MAGIC = b"RRST"
    VERSION = 1

    def __init__(self, n: int, rounds: int = 1, incremental_index: bool = False):
        self.n, self.rounds = int(n), int(rounds)
        self._members: list[np.ndarray] = []
        self._sizes: list[np.ndarray] = []
        self._roots: list[np.ndarray] = []
        self._flat = None
        self.covered_external = 0
        self.incremental_index = incremental_index
        self._index_parts: list[tuple[np.ndarray, np.ndarray]] = []
        self._count = 0

    @property
    def n_elements(self) -> int:
        return self.n * self.rounds

    def __len__(self) -> int:
        return self._count

    @property
    def total(self) -> int:
        """Stored samples plus externally covered ones."""
        return self._count + self.covered_external

    def append(self, elements: np.ndarray, offsets: np.ndarray, roots: np.ndarray) -> None:
        """Add samples given as elements with per-sample offsets (starting at 0)."""
        elements = np.asarray(elements, dtype=np.int64)
        offsets = np.asarray(offsets, dtype=np.int64)
        sizes = np.diff(offsets)
        if sizes.size == 0:
            return
        self._members.append(elements[offsets[0]:offsets[-1]])
        self._sizes.append(sizes)
        self._roots.append(np.asarray(roots, dtype=np.int64))
        if self.incremental_index:
            self._index_parts.append(self._build_index(self._members[-1],
                                                       _offsets(sizes), self._count))
        self._count += sizes.size
        self._flat = None

    def flat(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._flat is None:
            if self._count == 0:
                self._flat = (np.empty(0, np.int64), np.zeros(1, np.int64), np.empty(0, np.int64))
            else:
                members = np.concatenate(self._members)
                sizes = np.concatenate(self._sizes)
                roots = np.concatenate(self._roots)
                self._members, self._sizes, self._roots = [members], [sizes], [roots]
                self._flat = (members, _offsets(sizes), roots)
        return self._flat

    def sample(self, j: int):
        members, offsets, roots = self.flat()
        els = members[offsets[j]:offsets[j + 1]]
        if self.rounds == 1:
            return RRSet(int(roots[j]), frozenset(els.tolist()))
        per = tuple(frozenset((els[els // self.n == r] % self.n).tolist())
                    for r in range(self.rounds))
        return RRSequence(int(roots[j]), per)

    def __iter__(self):
        for j in range(len(self)):
            yield self.sample(j)

    def _build_index(self, members, offsets, base):
        owner = np.repeat(np.arange(offsets.size - 1, dtype=np.int64) + base, np.diff(offsets))
        order = np.argsort(members, kind="stable")
        ptr = np.zeros(self.n_elements + 1, dtype=np.int64)
        np.cumsum(np.bincount(members, minlength=self.n_elements), out=ptr[1:])
        return ptr, owner[order]

    def index(self) -> tuple[np.ndarray, np.ndarray]:
        """Inverted index element -> sample ids as ``(ptr, ids)``."""
        if not self.incremental_index:
            members, offsets, _ = self.flat()
            return self._build_index(members, offsets, 0)
        ptr = np.zeros(self.n_elements + 1, dtype=np.int64)
        for p, _ in self._index_parts:
            ptr[1:] += np.diff(p)
        ptr = np.concatenate(([0], np.cumsum(ptr[1:])))
        ids = np.empty(ptr[-1], dtype=np.int64)
        fill = ptr[:-1].copy()
        for p, part in self._index_parts:
            lens = np.diff(p)
            for x in np.flatnonzero(lens):
                ids[fill[x]:fill[x] + lens[x]] = part[p[x]:p[x + 1]]
                fill[x] += lens[x]
        return ptr, ids

    def hits(self, element_mask: np.ndarray) -> int:
        members, offsets, _ = self.flat()
        return int(K.coverage_count(members, offsets, np.asarray(element_mask, dtype=bool)))

    def fraction(self, element_mask: np.ndarray) -> float:
        """``(covered_external + hits) / total``."""
        if self.total == 0:
            raise ValueError("empty store")
        return (self.covered_external + self.hits(element_mask)) / self.total

    # -- binary fixtures: little-endian header
    #    magic(4) version(u32) n(u64) rounds(u32) covered(u64) count(u64) members(u64)
    #    then int64 offsets[count+1], int64 roots[count], int64 members[...]
    def dump(self, fh) -> None:
        members, offsets, roots = self.flat()
        fh.write(self.MAGIC)
        fh.write(struct.pack("<IQIQQQ", self.VERSION, self.n, self.rounds, self.covered_external,
                             len(self), members.size))
        for arr in (offsets, roots, members):
            fh.write(arr.astype("<i8").tobytes())

    @classmethod
    def load(cls, fh) -> "RRStore":
        if fh.read(4) != cls.MAGIC:
            raise ValueError("not an RR store file")
        hdr = struct.calcsize("<IQIQQQ")
        version, n, rounds, covered, count, nm = struct.unpack("<IQIQQQ", fh.read(hdr))
        if version != cls.VERSION:
            raise ValueError(f"unsupported RR store version {version}")
        offsets = np.frombuffer(fh.read(8 * (count + 1)), dtype="<i8").astype(np.int64)
        roots = np.frombuffer(fh.read(8 * count), dtype="<i8").astype(np.int64)
        members = np.frombuffer(fh.read(8 * nm), dtype="<i8").astype(np.int64)
        store = cls(n, rounds)
        store.covered_external = covered
        store.append(members, offsets, roots)
        return store

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.dump(buf)
        return buf.getvalue()


def _offsets(sizes: np.ndarray) -> np.ndarray:
    out = np.zeros(sizes.size + 1, dtype=np.int64)
    np.cumsum(sizes, out=out[1:])
    return out


class RRPool:
    """Sampler feeding an ``RRStore``.

    ``candidates`` restricts the root (uniform over the given nodes);
    ``q`` turns on the self-activation filter: a sample with a
    self-activated member is only counted in ``covered_external``.
    Sample ``i`` is a pure function of ``(seed, i)``.
    """

    def __init__(self, g: DirectedGraph, rng=None, rounds: int = 1, candidates=None, q=None,
                 store: RRStore | None = None, batch: int = 1 << 14):
        self.g = g
        self.seed = as_streams(rng).kernel_seed("rr")
        self.rounds = int(rounds)
        self.candidates = (np.arange(g.n, dtype=np.int64) if candidates is None
                           else np.asarray(sorted(candidates), dtype=np.int64))
        if self.candidates.size == 0:
            raise ValueError("no valid root")
        self.q = None if q is None else np.asarray(q, dtype=float)
        self.store = store if store is not None else RRStore(g.n, rounds)
        self.next_index = 0
        self.batch = batch

    @property
    def total(self) -> int:
        return self.store.total

    def draw(self, count: int) -> None:
        g = self.g
        q = self.q if self.q is not None else np.zeros(g.n)
        while count > 0:
            c = min(count, self.batch)
            members, offsets, roots, covered = K.rr_batch(
                g.n, g.in_ptr, g.in_src, g.in_eid, g.in_prob, self.candidates, q,
                self.q is not None, self.rounds, np.uint64(self.seed), self.next_index, c)
            self.next_index += c
            count -= c
            if self.rounds > 1:
                # encode round r members as v + r*n
                owner = np.repeat(np.arange(offsets.size - 1) % self.rounds, np.diff(offsets))
                members = members + owner * g.n
                offsets = offsets[::self.rounds]
            if covered.any():
                keep = ~covered
                self.store.covered_external += int(covered.sum())
                sizes = np.diff(offsets)
                members = members[np.repeat(keep, sizes)]
                offsets = _offsets(sizes[keep])
                roots = roots[keep]
            self.store.append(members, offsets, roots)

    def fill_to(self, target: float, inclusive: bool = False) -> None:
        need = (math.floor(target) + 1 if inclusive else math.ceil(target)) - self.total
        if need > 0:
            self.draw(int(need))

    def statistic(self, k: int, block=None, cap=None, sequential=False) -> float:
        return node_selection(self.store, k, block, cap, sequential)[1]


def gen_rr(g: DirectedGraph, root: int | None = None, rng=None) -> RRSet:
    """One RR set; uniform root unless ``root`` is given."""
    pool = RRPool(g, rng, candidates=None if root is None else [root])
    pool.draw(1)
    return pool.store.sample(0)


def gen_rr_sequence(g: DirectedGraph, T: int, rng=None) -> RRSequence:
    """One uniform root and ``T`` independent reverse samples from it."""
    if T < 1:
        raise ValueError("T must be at least 1")
    pool = RRPool(g, rng, rounds=T)
    pool.draw(1)
    s = pool.store.sample(0)
    return s if T > 1 else RRSequence(s.root, (s.members,))


def _pair_mask(n: int, rounds: int, sched: SeedSchedule) -> np.ndarray:
    mask = np.zeros(n * rounds, dtype=bool)
    for t, S in enumerate(sched.rounds):
        for v in S:
            mask[t * n + v] = True
    return mask


def estimate_rho_rr(store: RRStore, sched: SeedSchedule) -> float:
    """``n`` times the fraction of sequences hit in some round by that round's seeds."""
    if len(store) == 0 and store.covered_external == 0:
        raise ValueError("empty store")
    if sched.T > store.rounds:
        raise ValueError("schedule has more rounds than the stored sequences")
    return store.n * store.fraction(_pair_mask(store.n, store.rounds, sched))


def node_selection(store: RRStore, k: int, block: int | None = None, cap: int | None = None,
                   sequential: bool = False):
    """Greedy max coverage.  Returns ``(elements, covered fraction)``.

    Elements are node ids for plain stores and ``v + r*n`` for sequences.
    ``block``/``cap`` impose at most ``cap`` picks per block of ``block``
    consecutive elements.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    members, offsets, _ = store.flat()
    N = store.n_elements
    block = N if block is None else block
    cap = k if cap is None else cap
    chosen, gains = K.greedy_cover(members, offsets, N, min(k, N), max(block, 1), cap, sequential)
    total = store.total
    frac = (store.covered_external + int(gains.sum())) / total if total else 0.0
    return [int(x) for x in chosen], frac


# ---------------------------------------------------------------- IMM sizing

def log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


@dataclass(frozen=True)
class ImmParams:
    eps: float
    ell: float
    n: int
    k: int
    variant: str
    eps_prime: float
    alpha: float
    beta: float
    beta_tilde: float
    lam_prime: float
    lam_star: float
    lam_star_tilde: float
    gamma: float = 0.0
    LB: float = 1.0
    theta: float | None = None

    @property
    def lam_final(self) -> float:
        return self.lam_star_tilde if self.variant == "pim" else self.lam_star


def _lambdas(eps, ell, n, log_c):
    ln_n = math.log(n) if n > 1 else 0.0
    eps_p = math.sqrt(2.0) * eps
    alpha = math.sqrt(ell * ln_n + math.log(2.0))
    beta = math.sqrt(ONE_MINUS_INV_E * (log_c + alpha ** 2))
    beta_t = math.sqrt(log_c + alpha ** 2)
    ln_log2n = math.log(max(math.log2(n), 1.0)) if n > 1 else 0.0
    lam_p = (2.0 + 2.0 / 3.0 * eps_p) * (log_c + ell * ln_n + ln_log2n) * n / eps_p ** 2
    lam_s = 2.0 * n * (ONE_MINUS_INV_E * alpha + beta) ** 2 / eps ** 2
    lam_t = 2.0 * n * (alpha + beta_t) ** 2 / eps ** 2
    return eps_p, alpha, beta, beta_t, lam_p, lam_s, lam_t


def find_gamma(eps, ell, n, log_c, tilde: bool = False) -> float:
    """Smallest ``gamma = j / ln n`` (integer ``j >= 1``) with
    ``ceil(lambda*(ell + gamma)) <= n^gamma``; ``0`` when ``n < 2``."""
    if n < 2:
        return 0.0
    ln_n = math.log(n)

    def ok(j):
        lam = _lambdas(eps, ell + j / ln_n, n, log_c)[6 if tilde else 5]
        return math.log(math.ceil(lam)) <= j

    hi = 1
    while not ok(hi):
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi / ln_n


def compute_params(eps: float, ell: float, k: int, n: int, T: int = 1,
                   variant: str = "standard", ground: tuple[int, int] | None = None) -> ImmParams:
    """Sample-size constants.

    ``standard`` and ``pim`` apply the gamma workaround and add
    ``ln 2 / ln n`` to ``ell``; ``adaptive`` instead adds ``ln(2T)/ln n`` and
    rescales ``eps`` by ``e^(1-1/e)/2``.  ``ground=(N, K)`` replaces the
    binomial ``C(n, k)`` (used for node-round ground sets).
    """
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if ell <= 0:
        raise ValueError("ell must be positive")
    if variant not in ("standard", "adaptive", "pim"):
        raise ValueError(f"unknown variant {variant!r}")
    N, Kk = ground if ground is not None else (n, k)
    log_c = log_binom(N, min(Kk, N))
    ln_n = math.log(n) if n > 1 else 0.0
    gamma = 0.0
    if variant == "adaptive":
        if ln_n > 0:
            ell = ell + math.log(2 * T) / ln_n
        eps = math.exp(ONE_MINUS_INV_E) * eps / 2.0
    else:
        gamma = find_gamma(eps, ell, n, log_c, tilde=variant == "pim")
        if ln_n > 0:
            ell = ell + gamma + math.log(2.0) / ln_n
    return ImmParams(eps, ell, n, k, variant, *_lambdas(eps, ell, n, log_c), gamma=gamma)


@dataclass
class Phase1Result:
    params: ImmParams
    iterations: int
    triggered: bool


def imm_phase1(pool, params: ImmParams, n_scale: float, k: int, iterations: int | None = None,
               inclusive: tuple[bool, bool] = (False, True), statistic=None,
               first: int = 1) -> Phase1Result:
    """Halving search for a lower bound, then top the pool up to ``theta``.

    ``pool`` must expose ``total``, ``fill_to(target, inclusive)`` and
    ``statistic(k)`` (covered fraction of the greedy selection).  The loop
    runs ``floor(log2(n_scale - 1))`` times unless ``iterations`` is given;
    the spread estimate is ``n_scale * fraction``.  ``inclusive`` selects
    ``<=`` instead of ``<`` in the fill conditions of the search and the final
    top-up respectively.  ``first > 1`` starts the search at a smaller
    ``x`` (warm start).
    """
    stat = statistic or pool.statistic
    if iterations is None:
        iterations = int(math.floor(math.log2(n_scale - 1))) if n_scale > 2 else 0
    LB = 1.0
    triggered = False
    done = 0
    for i in range(max(first, 1), iterations + 1):
        x = n_scale / 2.0 ** i
        theta_i = params.lam_prime / x
        pool.fill_to(theta_i, inclusive[0])
        frac = stat(k)
        done = i
        if n_scale * frac >= (1.0 + params.eps_prime) * x:
            LB = n_scale * frac / (1.0 + params.eps_prime)
            triggered = True
            break
    theta = params.lam_final / LB
    pool.fill_to(theta, inclusive[1])
    return Phase1Result(replace(params, LB=LB, theta=theta), done, triggered)


def imm_mrim(g: DirectedGraph, T: int, k: int, eps: float, ell: float, rng=None,
             mode: str = "cross"):
    """RR-sequence solver for non-adaptive multi-round selection.

    Sizes the sample with the IMM recipe over the node-round ground set
    (``C(nT, kT)``) and runs greedy coverage with at most ``k`` pairs per
    round; ``mode="within"`` fills rounds in order.
    """
    if not 1 <= k <= g.n:
        raise ValueError(f"budget k={k} must lie in 1..n={g.n}")
    params = compute_params(eps, ell, k * T, g.n, T, "standard", ground=(g.n * T, k * T))
    pool = RRPool(g, rng, rounds=T)
    seq = mode == "within"

    def stat(_):
        return node_selection(pool.store, k * T, g.n, k, seq)[1]

    res = imm_phase1(pool, params, g.n, k * T, statistic=stat)
    chosen, frac = node_selection(pool.store, k * T, g.n, k, seq)
    sched = SeedSchedule.from_pairs(((x % g.n, x // g.n + 1) for x in chosen), T, k)
    return sched, g.n * frac, res
