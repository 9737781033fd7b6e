"""Numba kernels for the cluster-merging dynamics.

State lives in one int32 matrix ``st`` (rows indexed by the constants below)
plus an int64 ``meta`` vector, so a run can be paused and resumed from Python.
Cluster labels are representative member vertices.  Member and boundary lists
are singly linked through ``MNEXT``/``BNEXT``, and people-edge scans into a
cluster start at its rotating cursor ``CUR``; merging relabels the smaller
cluster, so total relabelling work is O(N log N).

In synchronous mode only clusters that changed in the previous step
("dirty") generate candidates: a pair of unchanged clusters was already
found unmergeable.  Slowed-down policies re-evaluate every pair each step.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ..randomness import ledger_grow_nb, ledger_insert_nb, mix64_nb, pair_key_nb, status_nb

LABEL, MNEXT, MHEAD, MTAIL, MSIZE, BNEXT, BHEAD, BTAIL, UF, DIRTY, DLIST, TOUCH, FLAG, BEST, CUR, SMARK, SSTAMP, UMARK, USTAMP = range(19)
N_ROWS = 19

# meta slots
M_LEDGER, M_OVERFLOW, M_NDIRTY, M_T, M_NCLUST, M_MAXSIZE, M_RNG, M_NTOUCH, M_DONE, M_STAMP = range(10)
N_META = 10

RULE_THRESHOLD, RULE_BASIC = 0, 1
POLICY_SYNC, POLICY_ONE_EDGE, POLICY_RANDOM_SUBSET = 0, 1, 2
THETA_INF = 1 << 30


@njit(cache=True)
def init_state(labels_in, n):
    """Build state from class ids ``labels_in`` (values in ``[0, k)``)."""
    st = np.full((N_ROWS, n), -1, dtype=np.int32)
    meta = np.zeros(N_META, dtype=np.int64)
    rep = np.full(n, -1, dtype=np.int64)
    nclust = 0
    for v in range(n):
        c = labels_in[v]
        if rep[c] == -1:
            rep[c] = v
            nclust += 1
            st[MHEAD, v] = v
            st[MSIZE, v] = 0
        r = rep[c]
        st[LABEL, v] = r
        if st[MSIZE, r] > 0:
            st[MNEXT, st[MTAIL, r]] = v
        st[MTAIL, r] = v
        st[MSIZE, r] += 1
    maxsize = 0
    nd = 0
    for v in range(n):
        if st[LABEL, v] == v:
            st[UF, v] = v
            st[DIRTY, v] = 1
            st[DLIST, nd] = v
            nd += 1
            if st[MSIZE, v] > maxsize:
                maxsize = st[MSIZE, v]
        else:
            st[UF, v] = v
    meta[M_NDIRTY] = nd
    meta[M_NCLUST] = nclust
    meta[M_MAXSIZE] = maxsize
    for v in range(n):
        st[FLAG, v] = 0
    return st, meta


@njit(cache=True)
def build_boundary(st, indptr):
    """Every vertex with a puzzle edge starts on its cluster's boundary list."""
    n = st.shape[1]
    for v in range(n):
        if indptr[v + 1] > indptr[v]:
            L = st[LABEL, v]
            if st[BHEAD, L] == -1:
                st[BHEAD, L] = v
            else:
                st[BNEXT, st[BTAIL, L]] = v
            st[BTAIL, L] = v


@njit(cache=True)
def _record(table, meta, counts, v, w, key):
    # Examinations are written out at each call site rather than through a
    # helper: an examine function taking the ledger arrays slows the untracked
    # hot loop several-fold.
    if ledger_insert_nb(table, meta, key) == 1:
        counts[v] += 1
        counts[w] += 1


@njit(cache=True)
def _uf_find(st, x):
    while st[UF, x] != x:
        st[UF, x] = st[UF, st[UF, x]]
        x = st[UF, x]
    return x


@njit(cache=True)
def _touch(st, meta, x):
    if st[FLAG, x] == 0:
        st[FLAG, x] = 1
        st[TOUCH, meta[M_NTOUCH]] = x
        meta[M_NTOUCH] += 1


@njit(cache=True)
def _union(st, meta, a, b):
    ra = _uf_find(st, a)
    rb = _uf_find(st, b)
    if ra == rb:
        return False
    _touch(st, meta, a)
    _touch(st, meta, b)
    if ra < rb:
        st[UF, rb] = ra
    else:
        st[UF, ra] = rb
    return True


@njit(cache=True)
def vertex_into(st, v, W, indptr, indices, gid, sigma, tau, theta,
                mode, s1, s2, thr, keys, table, meta, counts, track):
    """Threshold rule with ``v`` outside cluster ``W``: J1, J2 or J3 into ``W``."""
    if theta < THETA_INF:
        cpz = 0
        for k in range(indptr[v], indptr[v + 1]):
            if st[LABEL, indices[k]] == W:
                cpz += 1
        if cpz >= theta:
            return True
    # J1 pass also counts cpuzzle when J2 is disabled
    cpz = 0
    for k in range(indptr[v], indptr[v + 1]):
        u = indices[k]
        if st[LABEL, u] == W:
            cpz += 1
            key = pair_key_nb(gid[v], gid[u])
            if track:
                _record(table, meta, counts, v, u, key)
            if status_nb(key, mode, s1, s2, thr, keys):
                return True
    if cpz >= tau and cpz < st[MSIZE, W]:
        return _scan_members(st, v, W, sigma, gid, mode, s1, s2, thr, keys, table, meta, counts, track)
    return False


@njit(cache=True)
def _scan_members(st, v, W, sigma, gid, mode, s1, s2, thr, keys, table, meta, counts, track):
    """J3 count: people neighbours of ``v`` in ``W``, stopping at ``sigma``.

    The scan is cyclic from the cluster's cursor, which spreads examinations
    over the members of large clusters.
    """
    cnt = 0
    w = st[CUR, W]
    if w == -1 or st[LABEL, w] != W:
        w = st[MHEAD, W]
    for _ in range(st[MSIZE, W]):
        key = pair_key_nb(gid[v], gid[w])
        if track:
            _record(table, meta, counts, v, w, key)
        hit = status_nb(key, mode, s1, s2, thr, keys)
        w = st[MNEXT, w]
        if w == -1:
            w = st[MHEAD, W]
        if hit:
            cnt += 1
            if cnt >= sigma:
                st[CUR, W] = w
                return True
    return False


@njit(cache=True)
def pair_basic(st, a, b, gid, mode, s1, s2, thr, keys, table, meta, counts, track):
    """Basic rule: any people edge between clusters ``a`` and ``b``."""
    if st[MSIZE, a] > st[MSIZE, b]:
        a, b = b, a
    x = st[MHEAD, a]
    while x != -1:
        y = st[MHEAD, b]
        while y != -1:
            key = pair_key_nb(gid[x], gid[y])
            if track:
                _record(table, meta, counts, x, y, key)
            if status_nb(key, mode, s1, s2, thr, keys):
                return True
            y = st[MNEXT, y]
        x = st[MNEXT, x]
    return False


@njit(cache=True)
def pair_edge(st, a, b, indptr, indices, gid, sigma, tau, theta, rule,
              mode, s1, s2, thr, keys, table, meta, counts, track):
    """Cluster-graph edge between clusters ``a`` and ``b`` (both orientations)."""
    if a == b:
        return False
    adjacent = False
    x = st[MHEAD, a]
    while x != -1 and not adjacent:
        for k in range(indptr[x], indptr[x + 1]):
            if st[LABEL, indices[k]] == b:
                adjacent = True
                break
        x = st[MNEXT, x]
    if not adjacent:
        return False
    if rule == RULE_BASIC:
        return pair_basic(st, a, b, gid, mode, s1, s2, thr, keys, table, meta, counts, track)
    for src, dst in ((a, b), (b, a)):
        x = st[MHEAD, src]
        while x != -1:
            if vertex_into(st, x, dst, indptr, indices, gid, sigma, tau, theta,
                           mode, s1, s2, thr, keys, table, meta, counts, track):
                return True
            x = st[MNEXT, x]
    return False


@njit(cache=True)
def _collect(st, meta, indptr, indices, cand, rule, unique):
    """Candidate keys from boundaries of dirty clusters; prunes interior vertices.

    With ``unique`` (threshold rule only) every ``(v, W)`` is emitted once:
    stamps suppress repeats and the reverse candidate ``(u, L)`` is left to
    ``u``'s own cluster when that cluster is dirty too.  Otherwise keys may
    repeat and the caller sorts and deduplicates.
    """
    n = st.shape[1]
    c = 0
    meta[M_STAMP] += 1
    stamp = meta[M_STAMP]
    for i in range(meta[M_NDIRTY]):
        L = st[DLIST, i]
        prev = -1
        z = st[BHEAD, L]
        while z != -1:
            nz = st[BNEXT, z]
            out = False
            for k in range(indptr[z], indptr[z + 1]):
                u = indices[k]
                S = st[LABEL, u]
                if S != L:
                    out = True
                    if unique:
                        if st[SSTAMP, S] != stamp or st[SMARK, S] != z:
                            st[SSTAMP, S] = stamp
                            st[SMARK, S] = z
                            cand[c] = np.int64(z) * n + S
                            c += 1
                        if st[DIRTY, S] == 0 and (st[USTAMP, u] != stamp or st[UMARK, u] != L):
                            st[USTAMP, u] = stamp
                            st[UMARK, u] = L
                            cand[c] = np.int64(u) * n + L
                            c += 1
                    elif rule == RULE_THRESHOLD:
                        cand[c] = np.int64(z) * n + S
                        cand[c + 1] = np.int64(u) * n + L
                        c += 2
                    else:
                        lo = min(L, S)
                        hi = max(L, S)
                        cand[c] = np.int64(lo) * n + hi
                        c += 1
            if out:
                prev = z
            else:
                if prev == -1:
                    st[BHEAD, L] = nz
                else:
                    st[BNEXT, prev] = nz
                if st[BTAIL, L] == z:
                    st[BTAIL, L] = prev
                st[BNEXT, z] = -1
            z = nz
    return c


@njit(cache=True)
def _merge_into(st, b, x):
    """Append cluster ``x`` to cluster ``b`` and relabel its members."""
    y = st[MHEAD, x]
    while y != -1:
        st[LABEL, y] = b
        y = st[MNEXT, y]
    st[MNEXT, st[MTAIL, b]] = st[MHEAD, x]
    st[MTAIL, b] = st[MTAIL, x]
    st[MSIZE, b] += st[MSIZE, x]
    st[MHEAD, x] = -1
    st[MTAIL, x] = -1
    st[MSIZE, x] = 0
    if st[BHEAD, x] != -1:
        if st[BHEAD, b] == -1:
            st[BHEAD, b] = st[BHEAD, x]
        else:
            st[BNEXT, st[BTAIL, b]] = st[BHEAD, x]
        st[BTAIL, b] = st[BTAIL, x]
    st[BHEAD, x] = -1
    st[BTAIL, x] = -1


@njit(cache=True)
def _reset_touched(st, meta):
    for i in range(meta[M_NTOUCH]):
        x = st[TOUCH, i]
        st[UF, x] = x
        st[FLAG, x] = 0
        st[BEST, x] = -1
    meta[M_NTOUCH] = 0


@njit(cache=True)
def _apply_merges(st, meta):
    """Merge connected components of the step union-find; returns clusters eliminated."""
    nt = meta[M_NTOUCH]
    for i in range(nt):
        x = st[TOUCH, i]
        r = _uf_find(st, x)
        b = st[BEST, r]
        if b == -1 or st[MSIZE, x] > st[MSIZE, b] or (st[MSIZE, x] == st[MSIZE, b] and x < b):
            st[BEST, r] = x
    for i in range(meta[M_NDIRTY]):
        st[DIRTY, st[DLIST, i]] = 0
    nd = 0
    eliminated = 0
    for i in range(nt):
        x = st[TOUCH, i]
        b = st[BEST, _uf_find(st, x)]
        if x != b:
            _merge_into(st, b, x)
            eliminated += 1
    for i in range(nt):
        x = st[TOUCH, i]
        b = st[BEST, _uf_find(st, x)]
        if st[DIRTY, b] == 0:
            st[DIRTY, b] = 1
            st[DLIST, nd] = b
            nd += 1
            if st[MSIZE, b] > meta[M_MAXSIZE]:
                meta[M_MAXSIZE] = st[MSIZE, b]
    meta[M_NDIRTY] = nd
    _reset_touched(st, meta)
    meta[M_NCLUST] -= eliminated
    return eliminated


@njit(cache=True)
def _mark_all_dirty(st, meta):
    n = st.shape[1]
    for i in range(meta[M_NDIRTY]):
        st[DIRTY, st[DLIST, i]] = 0
    nd = 0
    for v in range(n):
        if st[LABEL, v] == v:
            st[DIRTY, v] = 1
            st[DLIST, nd] = v
            nd += 1
    meta[M_NDIRTY] = nd


@njit(cache=True)
def _next_rand(meta):
    meta[M_RNG] += 1
    return mix64_nb(np.uint64(meta[M_RNG]))


@njit(cache=True)
def _sort_inplace(a):
    # numba's quicksort degrades badly on the nearly sorted, duplicate-heavy key streams here
    a[:] = a[np.argsort(a, kind="mergesort")]


@njit(cache=True)
def _step(st, meta, indptr, indices, gid, cand, sigma, tau, theta, rule, policy,
          mode, s1, s2, thr, keys, table, counts, track):
    """One step.  Returns clusters eliminated, 0 at a fixed point, -1 on ledger overflow."""
    n = st.shape[1]
    if policy != POLICY_SYNC:
        _mark_all_dirty(st, meta)
    unique = policy == POLICY_SYNC and rule == RULE_THRESHOLD
    c = _collect(st, meta, indptr, indices, cand, rule, unique)
    buf = cand[:c]
    if not unique:
        _sort_inplace(buf)
    ntrue = 0
    last = np.int64(-1)
    for i in range(c):
        key = buf[i]
        if key == last and not unique:
            continue
        last = key
        if rule == RULE_THRESHOLD:
            v = key // n
            W = key - v * n
            Lv = st[LABEL, v]
            if policy == POLICY_SYNC and _uf_find(st, Lv) == _uf_find(st, W):
                continue
            ok = vertex_into(st, v, W, indptr, indices, gid, sigma, tau, theta,
                             mode, s1, s2, thr, keys, table, meta, counts, track)
            a, b = Lv, W
        else:
            a = key // n
            b = key - a * n
            if policy == POLICY_SYNC and _uf_find(st, a) == _uf_find(st, b):
                continue
            ok = pair_basic(st, a, b, gid, mode, s1, s2, thr, keys, table, meta, counts, track)
        if meta[M_OVERFLOW]:
            _reset_touched(st, meta)
            return -1
        if ok:
            if policy == POLICY_SYNC:
                _union(st, meta, a, b)
            else:
                # compact true pairs into the already-consumed prefix of buf
                lo = min(a, b)
                hi = max(a, b)
                buf[ntrue] = np.int64(lo) * n + hi
                ntrue += 1
    if policy != POLICY_SYNC:
        if ntrue == 0:
            return 0
        pairs = buf[:ntrue]
        _sort_inplace(pairs)
        m = 0
        for i in range(ntrue):
            if i == 0 or pairs[i] != pairs[i - 1]:
                pairs[m] = pairs[i]
                m += 1
        if policy == POLICY_ONE_EDGE:
            j = np.int64(_next_rand(meta) % np.uint64(m))
            _union(st, meta, pairs[j] // n, pairs[j] % n)
        else:
            chosen = 0
            for i in range(m):
                if _next_rand(meta) >> np.uint64(63):
                    _union(st, meta, pairs[i] // n, pairs[i] % n)
                    chosen += 1
            if chosen == 0:
                j = np.int64(_next_rand(meta) % np.uint64(m))
                _union(st, meta, pairs[j] // n, pairs[j] % n)
    if meta[M_NTOUCH] == 0:
        return 0
    return _apply_merges(st, meta)


@njit(cache=True, nogil=True)
def advance(st, meta, indptr, indices, gid, cand, sigma, tau, theta, rule, policy,
            mode, s1, s2, thr, keys, table, counts, track, merges, maxsizes, max_steps):
    """Run up to ``max_steps`` merging steps (negative: until fixed point).

    Returns the (possibly regrown) ledger table.
    """
    done = 0
    while meta[M_DONE] == 0 and (max_steps < 0 or done < max_steps):
        r = _step(st, meta, indptr, indices, gid, cand, sigma, tau, theta, rule, policy,
                  mode, s1, s2, thr, keys, table, counts, track)
        if r < 0:
            table = ledger_grow_nb(table)
            meta[M_OVERFLOW] = 0
            continue
        if r == 0:
            meta[M_DONE] = 1
            break
        t = meta[M_T]
        merges[t] = r
        maxsizes[t] = meta[M_MAXSIZE]
        meta[M_T] = t + 1
        done += 1
    return table


@njit(cache=True, nogil=True)
def run_kernel(labels_in, indptr, indices, gid, sigma, tau, theta, rule, policy, rng_seed,
               mode, s1, s2, thr, keys, track, table_cap):
    n = labels_in.size
    st, meta = init_state(labels_in, n)
    build_boundary(st, indptr)
    meta[M_RNG] = rng_seed
    cand = np.empty(2 * indices.size + 8, dtype=np.int64)
    # probing masks with cap - 1, so the capacity must be a power of two
    cap = 1
    while cap < table_cap:
        cap *= 2
    table = np.zeros(cap if track else 1, dtype=np.uint64)
    counts = np.zeros(n, dtype=np.int32)
    merges = np.zeros(max(n, 1), dtype=np.int32)
    maxsizes = np.zeros(max(n, 1), dtype=np.int32)
    table = advance(st, meta, indptr, indices, gid, cand, sigma, tau, theta, rule, policy,
                    mode, s1, s2, thr, keys, table, counts, track, merges, maxsizes, -1)
    t = meta[M_T]
    return st[LABEL].copy(), t, meta[M_NCLUST], merges[:t].copy(), maxsizes[:t].copy(), meta[M_LEDGER], counts


@njit(cache=True, nogil=True)
def solve_batch_explicit(indptr, indices, gid, pair_keys, masks, sigma, tau, theta, rule):
    """Solve indicator for each explicit people graph ``{pair_keys[i] : bit i of mask}``."""
    n = gid.size
    out = np.zeros(masks.size, dtype=np.bool_)
    labels0 = np.arange(n)
    table = np.zeros(1, dtype=np.uint64)
    counts = np.zeros(n, dtype=np.int32)
    merges = np.zeros(max(n, 1), dtype=np.int32)
    maxsizes = np.zeros(max(n, 1), dtype=np.int32)
    cand = np.empty(2 * indices.size + 8, dtype=np.int64)
    buf = np.empty(pair_keys.size, dtype=np.uint64)
    for j in range(masks.size):
        mask = masks[j]
        m = 0
        for i in range(pair_keys.size):
            if (mask >> i) & 1:
                buf[m] = pair_keys[i]
                m += 1
        keys = buf[:m].copy()
        st, meta = init_state(labels0, n)
        build_boundary(st, indptr)
        advance(st, meta, indptr, indices, gid, cand, sigma, tau, theta, rule, POLICY_SYNC,
                1, np.uint64(0), np.uint64(0), np.uint64(0), keys, table, counts, False,
                merges, maxsizes, -1)
        out[j] = meta[M_NCLUST] == 1
    return out


@njit(cache=True)
def pair_edge_on_labels(labels_in, a_vertex, b_vertex, indptr, indices, gid, sigma, tau, theta, rule,
                        mode, s1, s2, thr, keys, table, counts, track):
    """Cluster-graph edge between the clusters of two vertices for a given partition."""
    n = labels_in.size
    st, meta = init_state(labels_in, n)
    a = st[LABEL, a_vertex]
    b = st[LABEL, b_vertex]
    ok = pair_edge(st, a, b, indptr, indices, gid, sigma, tau, theta, rule,
                   mode, s1, s2, thr, keys, table, meta, counts, track)
    return ok, meta[M_OVERFLOW]
