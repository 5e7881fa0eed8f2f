"""Hot loops of the Rips persistence computation.

Every kernel exists twice: an ``@njit`` version and a numpy/python version
with the same signature and the same output. ``_accel.USE_NUMBA`` picks one
at call time.

Triangles are never materialised. A triangle ``a < b < c`` is identified by
its combinatorial index ``C(c,3) + C(b,2) + a`` and ordered by the key
``(diameter, index)``. H1 is computed as cohomology: edge coboundaries are
reduced from the longest edge down, the pivot of a column being its
smallest-key triangle. Edges that kill an H0 class are skipped (clearing),
and a column whose smallest cofacet is not yet claimed by another column is
paired immediately without materialising its coboundary.
"""
import heapq

import numpy as np

from .. import _accel
from .._accel import njit


# --------------------------------------------------------------------------
# shared scalar helpers


@njit
def _tri_index(i, j, k):
    # sort three distinct vertex ids
    a, b, c = i, j, k
    if a > b:
        a, b = b, a
    if b > c:
        b, c = c, b
    if a > b:
        a, b = b, a
    return c * (c - 1) * (c - 2) // 6 + b * (b - 1) // 2 + a


def _tri_index_np(i, j, k):
    v = np.sort(np.stack(np.broadcast_arrays(i, j, k)).astype(np.int64), axis=0)
    a, b, c = v[0], v[1], v[2]
    return c * (c - 1) * (c - 2) // 6 + b * (b - 1) // 2 + a


# --------------------------------------------------------------------------
# union-find over sorted edges (H0)


@njit
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit
def _h0_numba(n, edge_i, edge_j):
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    is_death = np.zeros(edge_i.shape[0], dtype=np.bool_)
    merged = 0
    for e in range(edge_i.shape[0]):
        ri = _find(parent, edge_i[e])
        rj = _find(parent, edge_j[e])
        if ri == rj:
            continue
        if rank[ri] < rank[rj]:
            ri, rj = rj, ri
        parent[rj] = ri
        if rank[ri] == rank[rj]:
            rank[ri] += 1
        is_death[e] = True
        merged += 1
        if merged == n - 1:
            break
    return is_death


def _h0_numpy(n, edge_i, edge_j):
    parent = list(range(n))

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    is_death = np.zeros(len(edge_i), dtype=bool)
    merged = 0
    for e, (i, j) in enumerate(zip(edge_i.tolist(), edge_j.tolist())):
        ri, rj = find(i), find(j)
        if ri == rj:
            continue
        parent[max(ri, rj)] = min(ri, rj)
        is_death[e] = True
        merged += 1
        if merged == n - 1:
            break
    return is_death


def death_edges(n, edge_i, edge_j):
    """Boolean mask of the edges that merge two components (Kruskal)."""
    edge_i = np.ascontiguousarray(edge_i, dtype=np.int64)
    edge_j = np.ascontiguousarray(edge_j, dtype=np.int64)
    if _accel.USE_NUMBA:
        return _h0_numba(n, edge_i, edge_j)
    return _h0_numpy(n, edge_i, edge_j)


# --------------------------------------------------------------------------
# H1 cohomology reduction, numba path


@njit
def _heap_push(hd, ht, size, d, t):
    if size == hd.shape[0]:
        nd = np.empty(2 * size, dtype=hd.dtype)
        nt = np.empty(2 * size, dtype=ht.dtype)
        nd[:size] = hd
        nt[:size] = ht
        hd, ht = nd, nt
    pos = size
    while pos > 0:
        parent = (pos - 1) >> 1
        pd, pt = hd[parent], ht[parent]
        if pd < d or (pd == d and pt <= t):
            break
        hd[pos] = pd
        ht[pos] = pt
        pos = parent
    hd[pos] = d
    ht[pos] = t
    return hd, ht, size + 1


@njit
def _heap_pop(hd, ht, size):
    d0, t0 = hd[0], ht[0]
    size -= 1
    if size > 0:
        d, t = hd[size], ht[size]
        pos = 0
        while True:
            child = 2 * pos + 1
            if child >= size:
                break
            right = child + 1
            if right < size and (hd[right] < hd[child] or (hd[right] == hd[child] and ht[right] < ht[child])):
                child = right
            if d < hd[child] or (d == hd[child] and t <= ht[child]):
                break
            hd[pos] = hd[child]
            ht[pos] = ht[child]
            pos = child
        hd[pos] = d
        ht[pos] = t
    return d0, t0, size


@njit
def _push_coboundary(hd, ht, size, D, i, j, dij, t_max):
    n = D.shape[0]
    for k in range(n):
        if k == i or k == j:
            continue
        dk = max(dij, D[i, k], D[j, k])
        if dk > t_max:
            continue
        hd, ht, size = _heap_push(hd, ht, size, dk, _tri_index(i, j, k))
    return hd, ht, size


@njit
def _heap_pivot(hd, ht, size):
    # pop entries in key order, cancelling pairs; return the first odd one
    while size > 0:
        d, t, size = _heap_pop(hd, ht, size)
        count = 1
        while size > 0 and ht[0] == t and hd[0] == d:
            _, _, size = _heap_pop(hd, ht, size)
            count += 1
        if count % 2 == 1:
            hd, ht, size = _heap_push(hd, ht, size, d, t)
            return d, t, hd, ht, size
    return np.inf, -1, hd, ht, size


@njit
def _reduce_h1_numba(D, edge_i, edge_j, edge_len, skip, t_max, stats):
    n = D.shape[0]
    m = edge_i.shape[0]
    owner = dict()
    owner[np.int64(-1)] = np.int64(-1)
    # reduction records: columns of V stored as runs of edge ids
    rec_ptr = np.zeros(m + 1, dtype=np.int64)
    rec_data = np.empty(max(m, 16), dtype=np.int64)
    rec_len = 0
    n_slots = 0
    births = np.empty(64, dtype=np.float64)
    deaths = np.empty(64, dtype=np.float64)
    n_pairs = 0
    ess = np.empty(16, dtype=np.float64)
    n_ess = 0
    hd = np.empty(1024, dtype=np.float64)
    ht = np.empty(1024, dtype=np.int64)
    work = np.empty(64, dtype=np.int64)

    for e in range(m - 1, -1, -1):
        if skip[e]:
            continue
        i = edge_i[e]
        j = edge_j[e]
        dij = edge_len[e]
        # triangle index grows with k for a fixed edge, so the first k
        # reaching the smallest diameter is the smallest-key cofacet
        best_d = np.inf
        best_k = -1
        for k in range(n):
            if k == i or k == j:
                continue
            dk = max(D[i, k], D[j, k])
            if dk <= dij:
                best_d = dij
                best_k = k
                break
            if dk < best_d and dk <= t_max:
                best_d = dk
                best_k = k
        best_t = np.int64(-1)
        if best_k >= 0:
            best_t = _tri_index(i, j, best_k)
        found = best_t >= 0
        if found and best_t not in owner:
            stats[0] += 1
            owner[best_t] = n_slots
            if rec_len + 1 > rec_data.shape[0]:
                grown = np.empty(2 * rec_data.shape[0], dtype=np.int64)
                grown[:rec_len] = rec_data[:rec_len]
                rec_data = grown
            rec_data[rec_len] = e
            rec_len += 1
            n_slots += 1
            rec_ptr[n_slots] = rec_len
            if best_d > dij:
                if n_pairs == births.shape[0]:
                    births = np.concatenate((births, np.empty(n_pairs, dtype=np.float64)))
                    deaths = np.concatenate((deaths, np.empty(n_pairs, dtype=np.float64)))
                births[n_pairs] = dij
                deaths[n_pairs] = best_d
                n_pairs += 1
            continue

        # full reduction with an explicit working coboundary
        stats[1] += 1
        size = 0
        if found:
            hd, ht, size = _push_coboundary(hd, ht, size, D, i, j, dij, t_max)
        n_work = 1
        work[0] = e
        piv_d = np.inf
        piv_t = np.int64(-1)
        if found:
            piv_d, piv_t, hd, ht, size = _heap_pivot(hd, ht, size)
        while piv_t >= 0 and piv_t in owner:
            stats[2] += 1
            s = owner[piv_t]
            for q in range(rec_ptr[s], rec_ptr[s + 1]):
                f = rec_data[q]
                if n_work == work.shape[0]:
                    work = np.concatenate((work, np.empty(n_work, dtype=np.int64)))
                work[n_work] = f
                n_work += 1
                hd, ht, size = _push_coboundary(hd, ht, size, D, edge_i[f], edge_j[f], edge_len[f], t_max)
            piv_d, piv_t, hd, ht, size = _heap_pivot(hd, ht, size)
        if piv_t < 0:
            if n_ess == ess.shape[0]:
                ess = np.concatenate((ess, np.empty(n_ess, dtype=np.float64)))
            ess[n_ess] = dij
            n_ess += 1
            continue
        # V column modulo 2
        col = np.sort(work[:n_work])
        kept = 0
        q = 0
        while q < n_work:
            r = q
            while r < n_work and col[r] == col[q]:
                r += 1
            if (r - q) % 2 == 1:
                col[kept] = col[q]
                kept += 1
            q = r
        while rec_len + kept > rec_data.shape[0]:
            grown = np.empty(2 * rec_data.shape[0], dtype=np.int64)
            grown[:rec_len] = rec_data[:rec_len]
            rec_data = grown
        rec_data[rec_len:rec_len + kept] = col[:kept]
        rec_len += kept
        owner[piv_t] = n_slots
        n_slots += 1
        rec_ptr[n_slots] = rec_len
        if piv_d > dij:
            if n_pairs == births.shape[0]:
                births = np.concatenate((births, np.empty(n_pairs, dtype=np.float64)))
                deaths = np.concatenate((deaths, np.empty(n_pairs, dtype=np.float64)))
            births[n_pairs] = dij
            deaths[n_pairs] = piv_d
            n_pairs += 1
    return births[:n_pairs].copy(), deaths[:n_pairs].copy(), ess[:n_ess].copy()


# --------------------------------------------------------------------------
# H1 cohomology reduction, numpy path


def _min_cofacets_numpy(D, edge_i, edge_j, edge_len, t_max, block=2048):
    """Smallest-key cofacet (diameter, triangle index) of every edge."""
    n = D.shape[0]
    m = edge_i.shape[0]
    best_d = np.full(m, np.inf)
    best_t = np.full(m, -1, dtype=np.int64)
    for start in range(0, m, block):
        sl = slice(start, min(start + block, m))
        I, J, L = edge_i[sl], edge_j[sl], edge_len[sl]
        rows = np.arange(I.shape[0])
        cof = np.maximum(np.maximum(D[I], D[J]), L[:, None])
        cof[rows, I] = np.inf
        cof[rows, J] = np.inf
        cof[cof > t_max] = np.inf
        # argmin keeps the first (smallest) k on ties, which is also the
        # smallest triangle index for a fixed edge
        kmin = cof.argmin(axis=1)
        dmin = cof[rows, kmin]
        ok = np.isfinite(dmin)
        best_d[sl] = dmin
        best_t[sl] = np.where(ok, _tri_index_np(I, J, kmin), -1)
    return best_d, best_t


def _coboundary_numpy(D, i, j, dij, t_max):
    n = D.shape[0]
    ks = np.arange(n, dtype=np.int64)
    dk = np.maximum(np.maximum(D[i], D[j]), dij)
    keep = (ks != i) & (ks != j) & (dk <= t_max)
    tri = _tri_index_np(np.int64(i), np.int64(j), ks[keep])
    return list(zip(dk[keep].tolist(), tri.tolist()))


def _heap_pivot_numpy(heap):
    while heap:
        d, t = heapq.heappop(heap)
        count = 1
        while heap and heap[0] == (d, t):
            heapq.heappop(heap)
            count += 1
        if count % 2 == 1:
            heapq.heappush(heap, (d, t))
            return d, t
    return np.inf, -1


def _reduce_h1_numpy(D, edge_i, edge_j, edge_len, skip, t_max, stats):
    best_d, best_t = _min_cofacets_numpy(D, edge_i, edge_j, edge_len, t_max)
    owner = {}
    records = []
    births, deaths, ess = [], [], []
    ei, ej, el = edge_i.tolist(), edge_j.tolist(), edge_len.tolist()
    bd, bt = best_d.tolist(), best_t.tolist()
    for e in range(len(ei) - 1, -1, -1):
        if skip[e]:
            continue
        dij = el[e]
        t0 = bt[e]
        if t0 >= 0 and t0 not in owner:
            stats[0] += 1
            owner[t0] = len(records)
            records.append((e,))
            if bd[e] > dij:
                births.append(dij)
                deaths.append(bd[e])
            continue
        stats[1] += 1
        heap = []
        work = [e]
        piv_d, piv_t = np.inf, -1
        if t0 >= 0:
            heap = _coboundary_numpy(D, ei[e], ej[e], dij, t_max)
            heapq.heapify(heap)
            piv_d, piv_t = _heap_pivot_numpy(heap)
        while piv_t >= 0 and piv_t in owner:
            stats[2] += 1
            for f in records[owner[piv_t]]:
                work.append(f)
                for item in _coboundary_numpy(D, ei[f], ej[f], el[f], t_max):
                    heapq.heappush(heap, item)
            piv_d, piv_t = _heap_pivot_numpy(heap)
        if piv_t < 0:
            ess.append(dij)
            continue
        ids, counts = np.unique(np.asarray(work, dtype=np.int64), return_counts=True)
        owner[piv_t] = len(records)
        records.append(tuple(ids[counts % 2 == 1].tolist()))
        if piv_d > dij:
            births.append(dij)
            deaths.append(piv_d)
    return (np.asarray(births, dtype=float), np.asarray(deaths, dtype=float),
            np.asarray(ess, dtype=float))


def reduce_h1(D, edge_i, edge_j, edge_len, skip, t_max):
    """Finite H1 pairs and essential H1 births of a Rips filtration.

    Returns ``(births, deaths, essential_births, stats)`` where ``stats``
    counts apparent columns, reduced columns and column additions.
    """
    D = np.ascontiguousarray(D, dtype=np.float64)
    edge_i = np.ascontiguousarray(edge_i, dtype=np.int64)
    edge_j = np.ascontiguousarray(edge_j, dtype=np.int64)
    edge_len = np.ascontiguousarray(edge_len, dtype=np.float64)
    skip = np.ascontiguousarray(skip, dtype=np.bool_)
    stats = np.zeros(3, dtype=np.int64)
    if _accel.USE_NUMBA:
        b, d, ess = _reduce_h1_numba(D, edge_i, edge_j, edge_len, skip, float(t_max), stats)
    else:
        b, d, ess = _reduce_h1_numpy(D, edge_i, edge_j, edge_len, skip, float(t_max), stats)
    return b, d, ess, stats
