# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels: adjacency construction and the greedy clique pass."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def build_adjacency(receiver, packet, has):
    cdef const long long[::1] r = np.ascontiguousarray(receiver, dtype=np.int64)
    cdef const long long[::1] p = np.ascontiguousarray(packet, dtype=np.int64)
    cdef const unsigned char[:, ::1] h = np.ascontiguousarray(has, dtype=np.uint8)
    cdef Py_ssize_t n = r.shape[0]
    out = np.zeros((n, n), dtype=np.bool_)
    cdef unsigned char[:, ::1] a = out.view(np.uint8)
    cdef Py_ssize_t u, v
    cdef unsigned char e
    for u in range(n):
        for v in range(u + 1, n):
            if r[u] == r[v]:
                continue
            e = p[u] == p[v] or (h[r[v], p[u]] and h[r[u], p[v]])
            a[u, v] = e
            a[v, u] = e
    return out


cdef void _connectivity(const unsigned char[:, ::1] a, const double[::1] w0,
                        long long[::1] cand, Py_ssize_t k,
                        double[::1] deg, double[::1] out) noexcept nogil:
    cdef Py_ssize_t x, y
    cdef double edges = 0.0, s
    for x in range(k):
        s = 0.0
        for y in range(k):
            s += a[cand[x], cand[y]]
        deg[x] = s
        edges += s
    edges /= 2.0
    for x in range(k):
        if edges == 0.0:
            out[x] = 0.0
            continue
        s = 0.0
        for y in range(k):
            if a[cand[x], cand[y]]:
                s += w0[cand[y]] * deg[y]
        out[x] = s / edges


def connectivity(adj, w0, candidates):
    cdef const unsigned char[:, ::1] a = np.ascontiguousarray(adj, dtype=np.bool_).view(np.uint8)
    cdef const double[::1] w = np.ascontiguousarray(w0, dtype=np.float64)
    cdef long long[::1] cand = np.array(candidates, dtype=np.int64)
    cdef Py_ssize_t k = cand.shape[0]
    deg = np.empty(k)
    out = np.empty(k)
    _connectivity(a, w, cand, k, deg, out)
    return out


def greedy_pass(adj, w0, candidates):
    cdef const unsigned char[:, ::1] a = np.ascontiguousarray(adj, dtype=np.bool_).view(np.uint8)
    cdef const double[::1] w = np.ascontiguousarray(w0, dtype=np.float64)
    cdef long long[::1] cand = np.array(candidates, dtype=np.int64)
    cdef Py_ssize_t k = cand.shape[0], x, best, m
    cdef double[::1] deg = np.empty(max(k, 1))
    cdef double[::1] conn = np.empty(max(k, 1))
    cdef double score, top
    cdef long long v
    chosen = []
    while k > 0:
        _connectivity(a, w, cand, k, deg, conn)
        best = 0
        top = (conn[0] + 1.0) * w[cand[0]]
        for x in range(1, k):
            score = (conn[x] + 1.0) * w[cand[x]]
            if score > top:
                top = score
                best = x
        v = cand[best]
        chosen.append(v)
        m = 0
        for x in range(k):
            if a[v, cand[x]]:
                cand[m] = cand[x]
                m += 1
        k = m
    return np.array(chosen, dtype=np.int64)
