# cython: language_level=3
"""Compiled graph kernels; see ``_fallback`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t
from libc.math cimport fabs

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t node_state(uint64_t seed, int64_t node) nogil:
    return mix64(seed ^ mix64(<uint64_t>node + GOLDEN))


cdef inline bint has_edge(const int64_t[::1] indptr, const int64_t[::1] indices,
                          int64_t u, int64_t v) nogil:
    cdef int64_t lo = indptr[u], hi = indptr[u + 1], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if indices[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < indptr[u + 1] and indices[lo] == v


cdef int64_t _walks(const int64_t[::1] indptr, const int64_t[::1] indices,
                    int64_t v, int64_t walk_length, int64_t num_walks, uint64_t seed,
                    int64_t[::1] stamp, int64_t[::1] out) nogil:
    """Writes visited nodes (first-visit order, v excluded) into ``out``; returns count."""
    cdef uint64_t state = node_state(seed, v)
    cdef int64_t w, step, cur, lo, deg, count = 0
    stamp[v] = v + 1
    for w in range(num_walks):
        cur = v
        for step in range(walk_length):
            lo = indptr[cur]
            deg = indptr[cur + 1] - lo
            if deg == 0:
                break
            state = state + GOLDEN
            cur = indices[lo + <int64_t>(mix64(state) % <uint64_t>deg)]
            if stamp[cur] != v + 1:
                stamp[cur] = v + 1
                out[count] = cur
                count += 1
    return count


cdef int64_t _bfs(const int64_t[::1] indptr, const int64_t[::1] indices,
                  int64_t source, int64_t k, int64_t[::1] dist, int64_t[::1] queue) nogil:
    """BFS to depth k. ``queue[1:count]`` holds the reached nodes; caller resets ``dist``."""
    cdef int64_t head = 0, tail = 1, u, e, w
    queue[0] = source
    dist[source] = 0
    while head < tail:
        u = queue[head]
        head += 1
        if dist[u] == k:
            continue
        for e in range(indptr[u], indptr[u + 1]):
            w = indices[e]
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue[tail] = w
                tail += 1
    return tail


def bfs_within(const int64_t[::1] indptr, const int64_t[::1] indices, int64_t source, int64_t k):
    cdef int64_t n = indptr.shape[0] - 1
    cdef int64_t[::1] dist = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] queue = np.empty(n, dtype=np.int64)
    cdef int64_t count
    with nogil:
        count = _bfs(indptr, indices, source, k, dist, queue)
    return np.sort(np.asarray(queue[1:count]).copy())


def rw_visits(const int64_t[::1] indptr, const int64_t[::1] indices, int64_t v,
              int64_t walk_length, int64_t num_walks, uint64_t seed):
    cdef int64_t n = indptr.shape[0] - 1
    cdef int64_t[::1] stamp = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] out = np.empty(max(walk_length * num_walks, 1), dtype=np.int64)
    cdef int64_t count
    with nogil:
        count = _walks(indptr, indices, v, walk_length, num_walks, seed, stamp, out)
    return np.sort(np.asarray(out[:count]).copy())


def rw_sample_edges(const int64_t[::1] indptr, const int64_t[::1] indices, int64_t n,
                    int64_t walk_length, int64_t num_walks, uint64_t seed):
    cdef int64_t per = max(walk_length * num_walks, 1)
    cdef int64_t[::1] stamp = np.zeros(max(n, 1), dtype=np.int64)
    cdef int64_t[::1] buf = np.empty(per, dtype=np.int64)
    cdef int64_t cap = min(n * per, indices.shape[0])
    cdef int64_t[::1] rows = np.empty(max(cap, 1), dtype=np.int64)
    cdef int64_t[::1] cols = np.empty(max(cap, 1), dtype=np.int64)
    cdef int64_t v, i, c, u, m = 0
    with nogil:
        for v in range(n):
            c = _walks(indptr, indices, v, walk_length, num_walks, seed, stamp, buf)
            for i in range(c):
                u = buf[i]
                if has_edge(indptr, indices, v, u):
                    rows[m] = v
                    cols[m] = u
                    m += 1
    return np.asarray(rows[:m]).copy(), np.asarray(cols[:m]).copy()


def khop_sample_edges(const int64_t[::1] indptr, const int64_t[::1] indices, int64_t n, int64_t k):
    cdef int64_t[::1] dist = np.full(max(n, 1), -1, dtype=np.int64)
    cdef int64_t[::1] queue = np.empty(max(n, 1), dtype=np.int64)
    cdef int64_t cap = indices.shape[0]
    cdef int64_t[::1] rows = np.empty(max(cap, 1), dtype=np.int64)
    cdef int64_t[::1] cols = np.empty(max(cap, 1), dtype=np.int64)
    cdef int64_t v, i, c, u, m = 0
    with nogil:
        for v in range(n):
            c = _bfs(indptr, indices, v, k, dist, queue)
            for i in range(1, c):
                u = queue[i]
                if has_edge(indptr, indices, v, u):
                    rows[m] = v
                    cols[m] = u
                    m += 1
            for i in range(c):
                dist[queue[i]] = -1
    order = np.lexsort((np.asarray(cols[:m]), np.asarray(rows[:m])))
    return np.asarray(rows[:m])[order].copy(), np.asarray(cols[:m])[order].copy()


def count_triangles(const int64_t[::1] indptr, const int64_t[::1] indices, int64_t n):
    cdef int64_t u, v, e, i, j, ie, je, total = 0
    with nogil:
        for u in range(n):
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                if v <= u:
                    continue
                # intersect the neighbours of u and v that exceed v
                i = e + 1
                ie = indptr[u + 1]
                j = indptr[v]
                je = indptr[v + 1]
                while j < je and indices[j] <= v:
                    j += 1
                while i < ie and j < je:
                    if indices[i] == indices[j]:
                        total += 1
                        i += 1
                        j += 1
                    elif indices[i] < indices[j]:
                        i += 1
                    else:
                        j += 1
    return total


cdef inline double sparse_inf_dist(const int64_t[::1] xp, const int64_t[::1] xi,
                                   const double[::1] xd, int64_t a, int64_t b) nogil:
    cdef int64_t i = xp[a], ie = xp[a + 1], j = xp[b], je = xp[b + 1]
    cdef double best = 0.0, diff
    while i < ie or j < je:
        if j >= je or (i < ie and xi[i] < xi[j]):
            diff = fabs(xd[i])
            i += 1
        elif i >= ie or xi[j] < xi[i]:
            diff = fabs(xd[j])
            j += 1
        else:
            diff = fabs(xd[i] - xd[j])
            i += 1
            j += 1
        if diff > best:
            best = diff
    return best


def smoothness_sup(const int64_t[::1] indptr, const int64_t[::1] indices, const double[:, ::1] h,
                   const int64_t[::1] x_indptr, const int64_t[::1] x_indices,
                   const double[::1] x_data, int64_t k, double r):
    cdef int64_t n = h.shape[0], dim = h.shape[1]
    cdef int64_t[::1] dist = np.full(max(n, 1), -1, dtype=np.int64)
    cdef int64_t[::1] queue = np.empty(max(n, 1), dtype=np.int64)
    cdef double[::1] out = np.zeros(n, dtype=np.float64)
    cdef int64_t i, j, t, c, col
    cdef double best, d, x
    with nogil:
        for i in range(n):
            c = _bfs(indptr, indices, i, k, dist, queue)
            best = 0.0
            for t in range(1, c):
                j = queue[t]
                if sparse_inf_dist(x_indptr, x_indices, x_data, i, j) <= r:
                    d = 0.0
                    for col in range(dim):
                        x = fabs(h[i, col] - h[j, col])
                        if x > d:
                            d = x
                    if d > best:
                        best = d
            out[i] = best
            for t in range(c):
                dist[queue[t]] = -1
    return np.asarray(out)
