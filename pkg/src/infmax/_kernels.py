"""Compiled sampling and coverage kernels.

Every random quantity is a pure function of ``(seed, sample, tag, id)``
through a splitmix64-style hash, so a sample is identical however a batch is
split, and two kernels given the same seed and sample index observe the same
possible world (same coins, same delays).
"""

import heapq

import numpy as np
from numba import njit

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K1 = np.uint64(0xD6E8FEB86659FD93)
_K2 = np.uint64(0xA0761D6478BD642F)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# draw tags
TAG_ROOT = 0
TAG_EDGE = 1
TAG_EDELAY = 2
TAG_NDELAY = 3
TAG_SELF = 4

INF = np.inf


@njit(cache=True, nogil=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def uniform(seed, sample, tag, ident):
    """U[0,1) keyed by (seed, sample, tag, ident)."""
    h = _mix(np.uint64(seed) + _GOLD * (np.uint64(sample) + np.uint64(1)))
    h = _mix(h ^ (np.uint64(tag) * _K1 + np.uint64(ident) * _K2 + _GOLD))
    return np.float64(h >> _S11) * _INV53


@njit(cache=True, nogil=True)
def draw_delay(kind, param, u):
    if kind == 0:
        return -np.log1p(-u) / param
    return param


@njit(cache=True, nogil=True)
def _grow(buf, need):
    if need <= buf.size:
        return buf
    cap = max(need, 2 * buf.size)
    out = np.empty(cap, dtype=buf.dtype)
    out[:buf.size] = buf
    return out


# ---------------------------------------------------------------- RR sampling

@njit(cache=True, nogil=True)
def rr_batch(n, in_ptr, in_src, in_eid, in_prob, candidates, q, filter_self,
             rounds, seed, start, count):
    """Reverse-reachable samples ``start .. start+count-1``.

    Each sample draws one root uniformly from ``candidates`` and ``rounds``
    independent reverse BFS sets from it (round ``r`` uses edge coins keyed by
    ``r``).  With ``filter_self`` every reached member flips its
    self-activation coin; a hit marks the sample as externally covered and
    stops its exploration.
    """
    offsets = np.zeros(count * rounds + 1, dtype=np.int64)
    roots = np.empty(count, dtype=np.int64)
    covered = np.zeros(count, dtype=np.bool_)
    members = np.empty(max(16, 4 * count * rounds), dtype=np.int64)
    stamp = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    pos = 0
    nc = candidates.size
    for j in range(count):
        i = start + j
        root = candidates[min(int(uniform(seed, i, TAG_ROOT, 0) * nc), nc - 1)]
        roots[j] = root
        for r in range(rounds):
            slot = j * rounds + r
            if covered[j]:
                offsets[slot + 1] = pos
                continue
            members = _grow(members, pos + n)
            stamp[root] = slot
            queue[0] = root
            head, tail = 0, 1
            while head < tail:
                v = queue[head]
                head += 1
                members[pos] = v
                pos += 1
                if filter_self and uniform(seed, i, TAG_SELF, v) < q[v]:
                    covered[j] = True
                    break
                for a in range(in_ptr[v], in_ptr[v + 1]):
                    u = in_src[a]
                    if stamp[u] == slot:
                        continue
                    key = in_eid[a] + r * 0x100000000
                    if uniform(seed, i, TAG_EDGE, key) < in_prob[a]:
                        stamp[u] = slot
                        queue[tail] = u
                        tail += 1
            offsets[slot + 1] = pos
    return members[:pos].copy(), offsets, roots, covered


# ---------------------------------------------------------------- P-RR

@njit(cache=True, nogil=True)
def prr_one(n, in_ptr, in_src, in_eid, in_prob, q, nkind, nparam, ekind, eparam,
            root, seed, i, fixed, w_delay, w_active, w_live, w_edelay,
            members, trace, want_trace, delay, seen, done, sid):
    """One preemptive RR set; returns (size, source, trace_size).

    Shadow of ``v`` is encoded as ``v + n``.  Queue entries are
    ``(delay, is_shadow, node)`` so equal delays resolve lexicographically.
    ``fixed`` reads the world from the ``w_*`` arrays (``w_live`` and
    ``w_edelay`` indexed by edge id) instead of hashing it.  ``delay``,
    ``seen`` and ``done`` are caller scratch of length ``2n``; an entry is
    valid only when its stamp equals ``sid``, so nothing is cleared between
    samples.
    """
    heap = [(0.0, np.int64(0), np.int64(root))]
    delay[root] = 0.0
    seen[root] = sid
    size = 0
    nt = 0
    source = -1
    while len(heap) > 0:
        d, shadow, v = heapq.heappop(heap)
        w = v + n if shadow == 1 else v
        if done[w] == sid or d > delay[w]:
            continue
        done[w] = sid
        if want_trace:
            trace[nt] = d
            nt += 1
        if shadow == 1:
            members[size] = v
            size += 1
            if fixed:
                hit = w_active[v]
            else:
                hit = uniform(seed, i, TAG_SELF, v) < q[v]
            if hit:
                source = v
                break
            continue
        if fixed:
            dv = w_delay[v]
        else:
            dv = draw_delay(nkind[v], nparam[v], uniform(seed, i, TAG_NDELAY, v))
        delay[v + n] = d + dv
        seen[v + n] = sid
        heapq.heappush(heap, (d + dv, np.int64(1), v))
        for a in range(in_ptr[v], in_ptr[v + 1]):
            u = in_src[a]
            e = in_eid[a]
            if done[u] == sid:
                continue
            if fixed:
                live = w_live[e]
            else:
                live = uniform(seed, i, TAG_EDGE, e) < in_prob[a]
            if not live:
                continue
            if fixed:
                de = w_edelay[e]
            else:
                de = draw_delay(ekind[e], eparam[e], uniform(seed, i, TAG_EDELAY, e))
            tmp = d + de
            if seen[u] != sid or tmp < delay[u]:
                seen[u] = sid
                delay[u] = tmp
                heapq.heappush(heap, (tmp, np.int64(0), u))
    return size, source, nt


@njit(cache=True, nogil=True)
def prr_fixed(n, in_ptr, in_src, in_eid, w_delay, w_active, w_live, w_edelay, root):
    """P-RR set of ``root`` in a pinned world, with the popped-delay trace."""
    members = np.empty(n, dtype=np.int64)
    trace = np.empty(2 * n)
    delay = np.empty(2 * n)
    seen = np.full(2 * n, -1, dtype=np.int64)
    done = np.full(2 * n, -1, dtype=np.int64)
    e_f = np.empty(0)
    e_i = np.empty(0, dtype=np.int64)
    size, src, nt = prr_one(n, in_ptr, in_src, in_eid, e_f, e_f, e_i, e_f, e_i, e_f,
                            root, 0, 0, True, w_delay, w_active, w_live, w_edelay,
                            members, trace, True, delay, seen, done, 0)
    return members[:size].copy(), src, trace[:nt].copy()


@njit(cache=True, nogil=True)
def prr_batch(n, in_ptr, in_src, in_eid, in_prob, q, nkind, nparam, ekind, eparam,
              seed, start, count, keep_members, roots_in):
    """P-RR samples ``start..start+count-1``.

    Roots are uniform over all nodes unless ``roots_in`` is non-empty (then
    sample ``j`` uses ``roots_in[j]``).  Members are dropped unless
    ``keep_members``.
    """
    sources = np.empty(count, dtype=np.int64)
    roots = np.empty(count, dtype=np.int64)
    offsets = np.zeros(count + 1, dtype=np.int64)
    out = np.empty(max(16, 2 * count) if keep_members else 0, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)
    trace = np.empty(0)
    delay = np.empty(2 * n)
    seen = np.full(2 * n, -1, dtype=np.int64)
    done = np.full(2 * n, -1, dtype=np.int64)
    empty_f = np.empty(0)
    empty_b = np.empty(0, dtype=np.bool_)
    pos = 0
    for j in range(count):
        i = start + j
        if roots_in.size > 0:
            root = roots_in[j]
        else:
            root = min(int(uniform(seed, i, TAG_ROOT, 0) * n), n - 1)
        roots[j] = root
        size, src, _ = prr_one(n, in_ptr, in_src, in_eid, in_prob, q, nkind, nparam,
                               ekind, eparam, root, seed, i, False, empty_f, empty_b,
                               empty_b, empty_f, scratch, trace, False, delay, seen, done, j)
        sources[j] = src
        if keep_members:
            out = _grow(out, pos + size)
            out[pos:pos + size] = scratch[:size]
            pos += size
        offsets[j + 1] = pos
    return out[:pos].copy(), offsets, roots, sources


# ---------------------------------------------------------------- forward MRT

@njit(cache=True, nogil=True)
def mrt_forward(n, out_ptr, out_dst, out_eid, out_prob, sched_ptr, sched_nodes,
                countable, seed, start, count):
    """Countable nodes in the union of per-round reach sets, per simulation."""
    rounds = sched_ptr.size - 1
    res = np.empty(count, dtype=np.int64)
    active = np.full(n, -1, dtype=np.int64)
    stamp = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for j in range(count):
        i = start + j
        total = 0
        for r in range(rounds):
            slot = j * rounds + r
            tail = 0
            for s in range(sched_ptr[r], sched_ptr[r + 1]):
                v = sched_nodes[s]
                if stamp[v] != slot:
                    stamp[v] = slot
                    queue[tail] = v
                    tail += 1
            head = 0
            while head < tail:
                v = queue[head]
                head += 1
                if active[v] != j:
                    active[v] = j
                    if countable[v]:
                        total += 1
                for a in range(out_ptr[v], out_ptr[v + 1]):
                    u = out_dst[a]
                    if stamp[u] == slot:
                        continue
                    key = out_eid[a] + r * 0x100000000
                    if uniform(seed, i, TAG_EDGE, key) < out_prob[a]:
                        stamp[u] = slot
                        queue[tail] = u
                        tail += 1
        res[j] = total
    return res


# ---------------------------------------------------------------- forward SAIC

@njit(cache=True, nogil=True)
def _dijkstra(n, out_ptr, out_dst, out_eid, live, edelay, is_source, sdelay, dist):
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for v in range(n):
        dist[v] = INF
        if is_source[v]:
            dist[v] = sdelay[v]
            heapq.heappush(heap, (sdelay[v], np.int64(v)))
    while len(heap) > 0:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for a in range(out_ptr[v], out_ptr[v + 1]):
            e = out_eid[a]
            if live[e]:
                u = out_dst[a]
                nd = d + edelay[e]
                if nd < dist[u]:
                    dist[u] = nd
                    heapq.heappush(heap, (nd, u))


@njit(cache=True, nogil=True)
def world_arrays(n, m, src, prob, q, nkind, nparam, ekind, eparam, seed, i):
    """Materialise possible world ``i`` in edge-id order."""
    active = np.empty(n, dtype=np.bool_)
    sdelay = np.empty(n)
    for v in range(n):
        active[v] = uniform(seed, i, TAG_SELF, v) < q[v]
        sdelay[v] = draw_delay(nkind[v], nparam[v], uniform(seed, i, TAG_NDELAY, v))
    live = np.empty(m, dtype=np.bool_)
    edelay = np.empty(m)
    for e in range(m):
        live[e] = uniform(seed, i, TAG_EDGE, e) < prob[e]
        edelay[e] = draw_delay(ekind[e], eparam[e], uniform(seed, i, TAG_EDELAY, e))
    return active, sdelay, live, edelay


@njit(cache=True, nogil=True)
def saic_count(n, out_ptr, out_dst, out_eid, active, sdelay, live, edelay,
               in_set, target, dist_a, dist_b, queue):
    """Objective value in one world.

    target 0: |reach(L, S u A_W)|; 1: preemptive credit of ``in_set``;
    2: boosted preemptive credit of ``in_set``.
    """
    if target == 0:
        tail = 0
        seen = dist_a  # reused as a visited marker
        for v in range(n):
            seen[v] = 0.0
            if in_set[v] or active[v]:
                seen[v] = 1.0
                queue[tail] = v
                tail += 1
        head = 0
        while head < tail:
            v = queue[head]
            head += 1
            for a in range(out_ptr[v], out_ptr[v + 1]):
                u = out_dst[a]
                if live[out_eid[a]] and seen[u] == 0.0:
                    seen[u] = 1.0
                    queue[tail] = u
                    tail += 1
        return tail
    ins = np.zeros(n, dtype=np.bool_)
    outs = np.zeros(n, dtype=np.bool_)
    for v in range(n):
        if in_set[v]:
            ins[v] = active[v] or target == 2
        else:
            outs[v] = active[v]
    _dijkstra(n, out_ptr, out_dst, out_eid, live, edelay, ins, sdelay, dist_a)
    _dijkstra(n, out_ptr, out_dst, out_eid, live, edelay, outs, sdelay, dist_b)
    c = 0
    for v in range(n):
        if dist_a[v] < dist_b[v]:
            c += 1
    return c


@njit(cache=True, nogil=True)
def saic_forward(n, src, prob, out_ptr, out_dst, out_eid, q, nkind, nparam, ekind,
                 eparam, in_set, target, seed, start, count):
    m = src.size
    res = np.empty(count, dtype=np.int64)
    da = np.empty(n)
    db = np.empty(n)
    queue = np.empty(n, dtype=np.int64)
    for j in range(count):
        active, sdelay, live, edelay = world_arrays(n, m, src, prob, q, nkind, nparam,
                                                    ekind, eparam, seed, start + j)
        res[j] = saic_count(n, out_ptr, out_dst, out_eid, active, sdelay, live, edelay,
                            in_set, target, da, db, queue)
    return res


# ---------------------------------------------------------------- max cover

@njit(cache=True, nogil=True)
def greedy_cover(members, offsets, n_elements, k, block, cap, sequential):
    """Greedy maximum coverage over sets ``members[offsets[j]:offsets[j+1]]``.

    Elements are grouped in blocks of ``block`` ids; at most ``cap`` elements
    per block may be chosen (pass ``block = n_elements`` and ``cap = k`` for a
    plain cardinality budget).  ``sequential`` fills block 0 first, then
    block 1, and so on.  Ties go to the lowest element id.  Returns the chosen
    elements (in pick order), the number of sets newly covered by each pick.
    """
    nsets = offsets.size - 1
    deg = np.zeros(n_elements, dtype=np.int64)
    for j in range(nsets):
        for a in range(offsets[j], offsets[j + 1]):
            deg[members[a]] += 1
    ptr = np.zeros(n_elements + 1, dtype=np.int64)
    for x in range(n_elements):
        ptr[x + 1] = ptr[x] + deg[x]
    fill = ptr[:-1].copy()
    inv = np.empty(ptr[n_elements], dtype=np.int64)
    for j in range(nsets):
        for a in range(offsets[j], offsets[j + 1]):
            x = members[a]
            inv[fill[x]] = j
            fill[x] += 1
    # a set may list an element twice only if the caller passes duplicates;
    # coverage counts stay correct because covered sets are skipped below
    count = deg.copy()
    nblocks = (n_elements + block - 1) // block
    used = np.zeros(nblocks, dtype=np.int64)
    picked = np.zeros(n_elements, dtype=np.bool_)
    covered = np.zeros(nsets, dtype=np.bool_)
    chosen = np.empty(k, dtype=np.int64)
    gains = np.empty(k, dtype=np.int64)
    nchosen = 0
    cur = 0
    for it in range(k):
        if sequential:
            while cur < nblocks and used[cur] >= cap:
                cur += 1
            if cur >= nblocks:
                break
            lo, hi = cur * block, min((cur + 1) * block, n_elements)
        else:
            lo, hi = 0, n_elements
        best = -1
        bestc = -1
        for x in range(lo, hi):
            if picked[x] or used[x // block] >= cap:
                continue
            if count[x] > bestc:
                best = x
                bestc = count[x]
        if best < 0:
            break
        picked[best] = True
        used[best // block] += 1
        chosen[nchosen] = best
        g = 0
        for a in range(ptr[best], ptr[best + 1]):
            j = inv[a]
            if covered[j]:
                continue
            covered[j] = True
            g += 1
            for b in range(offsets[j], offsets[j + 1]):
                count[members[b]] -= 1
        gains[nchosen] = g
        nchosen += 1
    return chosen[:nchosen].copy(), gains[:nchosen].copy()


@njit(cache=True, nogil=True)
def coverage_count(members, offsets, mask):
    """Number of sets hit by the boolean element mask."""
    c = 0
    for j in range(offsets.size - 1):
        for a in range(offsets[j], offsets[j + 1]):
            if mask[members[a]]:
                c += 1
                break
    return c


@njit(cache=True, nogil=True)
def credit_mask(n, out_ptr, out_dst, out_eid, active, sdelay, live, edelay, in_set, boosted):
    """Nodes reached strictly earlier from ``in_set`` sources than from the rest."""
    ins = np.zeros(n, dtype=np.bool_)
    outs = np.zeros(n, dtype=np.bool_)
    for v in range(n):
        if in_set[v]:
            ins[v] = active[v] or boosted
        else:
            outs[v] = active[v]
    da = np.empty(n)
    db = np.empty(n)
    _dijkstra(n, out_ptr, out_dst, out_eid, live, edelay, ins, sdelay, da)
    _dijkstra(n, out_ptr, out_dst, out_eid, live, edelay, outs, sdelay, db)
    return da < db
