"""Pure-Python implementations of the hot graph kernels.

Signatures and results match the compiled ``_kernels`` module exactly; this
module is used when the extension is unavailable or ``TDSS_PURE_PYTHON`` is set.
All graph arguments are CSR arrays (``indptr``, ``indices``) of a simple
undirected graph with sorted neighbour lists.
"""

from bisect import bisect_left
from collections import deque

import numpy as np

from .rng import next_draw, node_state


def _has_edge(indptr, indices, u, v):
    lo, hi = indptr[u], indptr[u + 1]
    pos = bisect_left(indices, v, lo, hi)
    return pos < hi and indices[pos] == v


def bfs_within(indptr, indices, source, k):
    """Nodes at shortest-path distance 1..k from ``source``, sorted."""
    return np.array(_bfs(indptr.tolist(), indices.tolist(), source, k), dtype=np.int64)


def _bfs(indptr, indices, source, k):
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u]
        if du == k:
            continue
        for w in indices[indptr[u]:indptr[u + 1]]:
            if w not in dist:
                dist[w] = du + 1
                queue.append(w)
    del dist[source]
    return sorted(dist)


def _walk_visits(indptr, indices, v, walk_length, num_walks, seed):
    state = node_state(seed, v)
    seen = []
    marked = {v}
    for _ in range(num_walks):
        cur = v
        for _ in range(walk_length):
            lo = indptr[cur]
            deg = indptr[cur + 1] - lo
            if deg == 0:
                break
            state, r = next_draw(state)
            cur = indices[lo + r % deg]
            if cur not in marked:
                marked.add(cur)
                seen.append(cur)
    return seen


def rw_visits(indptr, indices, v, walk_length, num_walks, seed):
    """Sorted set of nodes visited by the walks of ``v`` (``v`` excluded)."""
    seen = _walk_visits(indptr.tolist(), indices.tolist(), v, walk_length, num_walks, seed)
    return np.array(sorted(seen), dtype=np.int64)


def rw_sample_edges(indptr, indices, n, walk_length, num_walks, seed):
    """Directed pairs (v, u): u visited from v and {v, u} is an edge."""
    ip = indptr.tolist()
    ix = indices.tolist()
    rows, cols = [], []
    for v in range(n):
        for u in _walk_visits(ip, ix, v, walk_length, num_walks, seed):
            if _has_edge(ip, ix, v, u):
                rows.append(v)
                cols.append(u)
    return np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64)


def khop_sample_edges(indptr, indices, n, k):
    """Directed pairs (v, u): u within k hops of v and {v, u} is an edge."""
    rows, cols = [], []
    ip = indptr.tolist()
    ix = indices.tolist()
    for v in range(n):
        for u in _bfs(ip, ix, v, k):
            if _has_edge(ip, ix, v, u):
                rows.append(v)
                cols.append(u)
    return np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64)


def count_triangles(indptr, indices, n):
    """Triangle count via sorted-neighbour intersection over oriented edges u < v < w."""
    ip = indptr.tolist()
    ix = indices.tolist()
    higher = [[w for w in ix[ip[u]:ip[u + 1]] if w > u] for u in range(n)]
    total = 0
    for u in range(n):
        hu = higher[u]
        for v in hu:
            hv = higher[v]
            i = j = 0
            while i < len(hu) and j < len(hv):
                a, b = hu[i], hv[j]
                if a == b:
                    total += 1
                    i += 1
                    j += 1
                elif a < b:
                    i += 1
                else:
                    j += 1
    return total


def _sparse_row_inf_dist(xp, xi, xd, a, b):
    best = 0.0
    i, ie = xp[a], xp[a + 1]
    j, je = xp[b], xp[b + 1]
    while i < ie or j < je:
        if j >= je or (i < ie and xi[i] < xi[j]):
            diff = abs(xd[i])
            i += 1
        elif i >= ie or xi[j] < xi[i]:
            diff = abs(xd[j])
            j += 1
        else:
            diff = abs(xd[i] - xd[j])
            i += 1
            j += 1
        if diff > best:
            best = diff
    return best


def smoothness_sup(indptr, indices, h, x_indptr, x_indices, x_data, k, r):
    """Per node: max ||h_i - h_j||_inf over j within k hops with ||x_i - x_j||_inf <= r."""
    n = h.shape[0]
    xp = x_indptr.tolist()
    xi = x_indices.tolist()
    xd = x_data.tolist()
    ip = indptr.tolist()
    ix = indices.tolist()
    out = np.zeros(n, dtype=np.float64)
    for i in range(n):
        best = 0.0
        for j in _bfs(ip, ix, i, k):
            if _sparse_row_inf_dist(xp, xi, xd, i, j) <= r:
                d = float(np.max(np.abs(h[i] - h[j]))) if h.shape[1] else 0.0
                if d > best:
                    best = d
        out[i] = best
    return out
