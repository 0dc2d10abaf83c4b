# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled max-min water-filling; same contract as _waterfill_py.waterfill."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

cdef double TOL = 1e-9


def waterfill(route_ptr, route_edges, avail, caps):
    cdef cnp.int64_t[::1] ptr = np.ascontiguousarray(route_ptr, dtype=np.int64)
    cdef cnp.int64_t[::1] redges = np.ascontiguousarray(route_edges, dtype=np.int64)
    cdef double[::1] cap = np.ascontiguousarray(caps, dtype=np.float64)
    cdef Py_ssize_t n_routes = cap.shape[0]
    cdef Py_ssize_t n_edges = len(avail)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] remaining_arr = np.maximum(
        np.ascontiguousarray(avail, dtype=np.float64), 0.0)
    cdef double[::1] remaining = remaining_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rates_arr = np.zeros(n_routes)
    cdef double[::1] rates = rates_arr
    cdef cnp.int64_t[::1] users = np.zeros(n_edges, dtype=np.int64)
    cdef char[::1] frozen = np.zeros(n_routes, dtype=np.int8)

    # Edge -> routes adjacency in CSR form.
    cdef cnp.int64_t[::1] eptr = np.zeros(n_edges + 1, dtype=np.int64)
    cdef Py_ssize_t r, k, e, live, best_edge, best_route, fill
    for r in range(n_routes):
        for k in range(ptr[r], ptr[r + 1]):
            eptr[redges[k] + 1] += 1
    for e in range(n_edges):
        eptr[e + 1] += eptr[e]
    cdef cnp.int64_t[::1] eroutes = np.zeros(eptr[n_edges], dtype=np.int64)
    cdef cnp.int64_t[::1] cursor = np.array(eptr[:n_edges], dtype=np.int64)
    for r in range(n_routes):
        for k in range(ptr[r], ptr[r + 1]):
            e = redges[k]
            eroutes[cursor[e]] = r
            cursor[e] += 1
            users[e] += 1

    cdef double share, best_share, best_cap, level
    live = n_routes
    for r in range(n_routes):
        if cap[r] <= TOL:
            rates[r] = cap[r] if cap[r] > 0 else 0.0
            frozen[r] = 1
            live -= 1
            for k in range(ptr[r], ptr[r + 1]):
                users[redges[k]] -= 1

    while live > 0:
        best_edge = -1
        best_share = INFINITY
        for e in range(n_edges):
            if users[e] > 0:
                share = remaining[e] / users[e]
                if share < best_share - TOL:
                    best_share = share
                    best_edge = e
        best_route = -1
        best_cap = INFINITY
        for r in range(n_routes):
            if not frozen[r] and cap[r] < best_cap - TOL:
                best_cap = cap[r]
                best_route = r
        if best_route >= 0 and best_cap <= best_share + TOL:
            level = best_cap
            rates[best_route] = level
            frozen[best_route] = 1
            live -= 1
            for k in range(ptr[best_route], ptr[best_route + 1]):
                e = redges[k]
                users[e] -= 1
                remaining[e] = remaining[e] - level if remaining[e] > level else 0.0
        elif best_edge >= 0:
            level = best_share if best_share > 0 else 0.0
            for fill in range(eptr[best_edge], eptr[best_edge + 1]):
                r = eroutes[fill]
                if frozen[r]:
                    continue
                rates[r] = level
                frozen[r] = 1
                live -= 1
                for k in range(ptr[r], ptr[r + 1]):
                    e = redges[k]
                    users[e] -= 1
                    remaining[e] = remaining[e] - level if remaining[e] > level else 0.0
        else:
            for r in range(n_routes):
                if not frozen[r]:
                    rates[r] = INFINITY
                    frozen[r] = 1
            break
    return rates_arr
