"""Pure-Python max-min water-filling, used when the compiled kernel is absent."""

import numpy as np

TOL = 1e-9


def waterfill(route_ptr, route_edges, avail, caps):
    """Max-min fair rates for routes sharing edges.

    Route ``r`` crosses edges ``route_edges[route_ptr[r]:route_ptr[r+1]]``.
    ``avail`` holds the free rate per edge and ``caps`` an upper bound per
    route. Each round freezes either the tightest edge's routes at its equal
    share or the route whose own cap is lowest, whichever binds first.
    """
    n_routes = len(caps)
    n_edges = len(avail)
    remaining = [max(0.0, float(a)) for a in avail]
    rates = np.zeros(n_routes)
    frozen = [False] * n_routes
    users = [0] * n_edges
    edge_routes = [[] for _ in range(n_edges)]
    for r in range(n_routes):
        for k in range(route_ptr[r], route_ptr[r + 1]):
            e = int(route_edges[k])
            users[e] += 1
            edge_routes[e].append(r)
    live = n_routes
    for r in range(n_routes):
        if caps[r] <= TOL:
            rates[r] = max(0.0, float(caps[r]))
            frozen[r] = True
            live -= 1
            for k in range(route_ptr[r], route_ptr[r + 1]):
                users[int(route_edges[k])] -= 1
    while live > 0:
        best_edge = -1
        best_share = np.inf
        for e in range(n_edges):
            if users[e] > 0:
                share = remaining[e] / users[e]
                if share < best_share - TOL:
                    best_share = share
                    best_edge = e
        best_route = -1
        best_cap = np.inf
        for r in range(n_routes):
            if not frozen[r] and caps[r] < best_cap - TOL:
                best_cap = caps[r]
                best_route = r
        if best_route >= 0 and best_cap <= best_share + TOL:
            to_freeze = [best_route]
            level = float(best_cap)
        elif best_edge >= 0:
            to_freeze = [r for r in edge_routes[best_edge] if not frozen[r]]
            level = max(0.0, best_share)
        else:
            # Routes with no edges and no cap are unbounded; leave them at inf.
            for r in range(n_routes):
                if not frozen[r]:
                    rates[r] = np.inf
                    frozen[r] = True
            break
        for r in to_freeze:
            rates[r] = level
            frozen[r] = True
            live -= 1
            for k in range(route_ptr[r], route_ptr[r + 1]):
                e = int(route_edges[k])
                users[e] -= 1
                remaining[e] = max(0.0, remaining[e] - level)
    return rates
