"""Offline optimum: exhaustive search and min-cost flow.

Both return an :class:`OptResult`; the flow solver is the one to use beyond
toy sizes, the exhaustive search exists to certify it.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._accel import NUMBA_ENABLED
from .matching import SKIP, f_value

EXHAUSTIVE_LIMIT = 10**7


class OracleSizeError(ValueError):
    pass


@dataclass
class OptResult:
    value: float
    assignment: list  # per arrival: offline index or SKIP

    def is_feasible(self, instance) -> bool:
        used = np.zeros(instance.num_offline, dtype=np.int64)
        for u in self.assignment:
            if u != SKIP:
                used[u] += 1
        return len(self.assignment) == instance.num_online and bool(np.all(used <= instance.capacities))

    def assigned_value(self, instance) -> float:
        return float(sum(instance.weights[v, u] for v, u in enumerate(self.assignment) if u != SKIP))


def _exhaustive_py(weights: np.ndarray, caps: np.ndarray):
    n_on, n_off = weights.shape
    bound = np.concatenate([np.cumsum(weights.max(axis=1, initial=0.0)[::-1])[::-1], [0.0]])
    remaining = caps.copy()
    choice = [SKIP] * n_on
    best = [0.0, [SKIP] * n_on]

    def dfs(v, value):
        if v == n_on:
            if value > best[0]:
                best[0] = value
                best[1] = list(choice)
            return
        if value + bound[v] <= best[0]:
            return
        row = weights[v]
        for u in range(n_off):
            if remaining[u] and row[u] > 0.0:
                remaining[u] -= 1
                choice[v] = u
                dfs(v + 1, value + row[u])
                remaining[u] += 1
        choice[v] = SKIP
        dfs(v + 1, value)

    dfs(0, 0.0)
    return best[0], best[1]


def opt_exhaustive(instance) -> OptResult:
    """Exact optimum by depth-first enumeration with a row-maximum bound."""
    n_on, n_off = instance.num_online, instance.num_offline
    if (n_off + 1) ** n_on > EXHAUSTIVE_LIMIT:
        raise OracleSizeError(f"(|U|+1)^|V| = {n_off + 1}^{n_on} exceeds {EXHAUSTIVE_LIMIT}")
    w = np.ascontiguousarray(instance.weights, dtype=np.float64)
    caps = instance.capacities.astype(np.int64)
    if NUMBA_ENABLED:
        value, choice = _kernels.exhaustive_kernel(w, caps)
        return OptResult(float(value), [int(u) for u in choice])
    value, choice = _exhaustive_py(w, caps)
    return OptResult(float(value), choice)


def opt_flow(instance) -> OptResult:
    """Maximum-weight b-matching by successive shortest paths with potentials.

    Network: source -> arrival (cap 1, cost 0) -> offline item (cap 1, cost
    ``-w``) -> sink (cap ``c_u``, cost 0).  Paths are augmented one unit at
    a time while the cheapest one has negative cost.
    """
    n_on, n_off = instance.num_online, instance.num_offline
    w = instance.weights
    src, sink = 0, n_on + n_off + 1
    n_nodes = sink + 1
    head, cap, cost, nxt = [], [], [], []
    first = [-1] * n_nodes

    def add(a, b, c, k):
        for frm, to, cc, kk in ((a, b, c, k), (b, a, 0, -k)):
            head.append(to)
            cap.append(cc)
            cost.append(kk)
            nxt.append(first[frm])
            first[frm] = len(head) - 1

    pair_edge = {}
    for v in range(n_on):
        add(src, 1 + v, 1, 0.0)
    for v in range(n_on):
        for u in range(n_off):
            if w[v, u] > 0.0:
                pair_edge[len(head)] = (v, u)
                add(1 + v, 1 + n_on + u, 1, -float(w[v, u]))
    for u in range(n_off):
        add(1 + n_on + u, sink, int(instance.capacities[u]), 0.0)

    # initial potentials: exact shortest distances in the acyclic network
    pot = [0.0] * n_nodes
    for u in range(n_off):
        col = w[:, u]
        pos = col[col > 0.0]
        pot[1 + n_on + u] = -float(pos.max()) if pos.size else 0.0
    pot[sink] = min([pot[1 + n_on + u] for u in range(n_off)] + [0.0])

    value = 0.0
    inf = float("inf")
    while True:
        dist = [inf] * n_nodes
        prev = [-1] * n_nodes
        dist[src] = 0.0
        heap = [(0.0, src)]
        while heap:
            d, x = heapq.heappop(heap)
            if d > dist[x]:
                continue
            e = first[x]
            while e != -1:
                if cap[e] > 0:
                    y = head[e]
                    nd = d + cost[e] + pot[x] - pot[y]
                    if nd < dist[y] - 1e-15:
                        dist[y] = nd
                        prev[y] = e
                        heapq.heappush(heap, (nd, y))
                e = nxt[e]
        if dist[sink] == inf:
            break
        path_cost = dist[sink] + pot[sink] - pot[src]
        if path_cost >= -1e-12:
            break
        top = max(d for d in dist if d < inf)
        for x in range(n_nodes):
            pot[x] += dist[x] if dist[x] < inf else top
        y = sink
        while y != src:
            e = prev[y]
            cap[e] -= 1
            cap[e ^ 1] += 1
            y = head[e ^ 1]
        value -= path_cost

    assignment = [SKIP] * n_on
    for e, (v, u) in pair_edge.items():
        if cap[e] == 0:
            assignment[v] = u
    res = OptResult(0.0, assignment)
    res.value = res.assigned_value(instance)
    return res


def opt_free_disposal_bruteforce(instance) -> float:
    """Offline optimum when items may be over-assigned and only the top ``c_u`` count."""
    n_on, n_off = instance.num_online, instance.num_offline
    if (n_off + 1) ** n_on > EXHAUSTIVE_LIMIT:
        raise OracleSizeError("instance too large for brute force")
    best = 0.0
    for combo in itertools.product(range(-1, n_off), repeat=n_on):
        bags = [[] for _ in range(n_off)]
        for v, u in enumerate(combo):
            if u != SKIP:
                bags[u].append(instance.weights[v, u])
        val = sum(f_value(bags[u], int(instance.capacities[u])) for u in range(n_off))
        best = max(best, val)
    return best
