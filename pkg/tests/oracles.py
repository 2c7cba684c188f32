"""Independent reference implementations used as test oracles.

None of these share code with the planners: they rely on the monolithic
collision check only, and on plain Python/numpy/fractions arithmetic.
"""

from __future__ import annotations

import heapq
import itertools
import math
from fractions import Fraction

import numpy as np


def segment_free(scene, a, b, step: float) -> bool:
    """Dense monolithic check of the straight segment ``a -> b`` including both ends."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = max(1, math.ceil(float(np.linalg.norm(b - a)) / step))
    ts = np.linspace(0.0, 1.0, n + 1)[:, None]
    return not bool(np.any(scene.monolithic_collides(a + ts * (b - a))))


def path_free(scene, configs, step: float) -> bool:
    return all(segment_free(scene, configs[i], configs[i + 1], step) for i in range(len(configs) - 1))


def grid_shortest_path(scene, bounds, start, goal, cell: float = 0.01, pull_step: float = 1e-3):
    """Cost of a 2-D grid Dijkstra path shortened by string pulling.

    The grid holds cell centres at multiples of ``cell``; start and goal are
    linked to their nearest free grid point. Diagonal moves need both
    adjacent axis cells free. String pulling greedily jumps to the farthest
    waypoint visible at ``pull_step``. The result is a feasible path, so its
    cost bounds the optimum from above.
    """
    bounds = np.asarray(bounds, dtype=float)
    xs = np.arange(bounds[0, 0], bounds[0, 1] + 1e-12, cell)
    ys = np.arange(bounds[1, 0], bounds[1, 1] + 1e-12, cell)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    free = ~scene.monolithic_collides(pts).astype(bool)
    free = free.reshape(len(xs), len(ys))

    def nearest_free(q):
        i, j = int(round((q[0] - xs[0]) / cell)), int(round((q[1] - ys[0]) / cell))
        best = None
        for di in range(-3, 4):
            for dj in range(-3, 4):
                a, b = i + di, j + dj
                if 0 <= a < len(xs) and 0 <= b < len(ys) and free[a, b]:
                    p = (xs[a], ys[b])
                    if segment_free(scene, q, p, pull_step / 10):
                        d = math.dist(q, p)
                        if best is None or d < best[0]:
                            best = (d, (a, b))
        if best is None:
            raise ValueError(f"no free grid point visible from {q}")
        return best[1]

    s, g = nearest_free(start), nearest_free(goal)
    dist = {s: 0.0}
    parent = {}
    heap = [(0.0, s)]
    moves = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        if u == g:
            break
        for di, dj in moves:
            v = (u[0] + di, u[1] + dj)
            if not (0 <= v[0] < len(xs) and 0 <= v[1] < len(ys)) or not free[v]:
                continue
            if di and dj and not (free[u[0] + di, u[1]] and free[u[0], u[1] + dj]):
                continue
            nd = d + cell * math.hypot(di, dj)
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    if g not in dist:
        raise ValueError("goal unreachable on the grid")
    cells = [g]
    while cells[-1] != s:
        cells.append(parent[cells[-1]])
    cells.reverse()
    way = [tuple(start)] + [(xs[a], ys[b]) for a, b in cells] + [tuple(goal)]
    pulled = [way[0]]
    i = 0
    while i < len(way) - 1:
        j = len(way) - 1
        while j > i + 1 and not segment_free(scene, way[i], way[j], pull_step):
            j -= 1
        pulled.append(way[j])
        i = j
    return sum(math.dist(pulled[k], pulled[k + 1]) for k in range(len(pulled) - 1)), pulled


def binomial_ci_ranks(n: int, level: float = 0.95) -> tuple[int, int]:
    """Exact rank pair by exhaustive search with rational arithmetic.

    Scans every symmetric pair ``(l, n + 1 - l)`` and keeps the largest ``l``
    whose coverage ``sum_{k=l}^{n-l} C(n, k) / 2^n`` is at least ``level``.
    """
    lvl = Fraction(level).limit_denominator(10 ** 9)
    best = 1
    for lo in range(1, n // 2 + 1):
        cov = Fraction(sum(math.comb(n, k) for k in range(lo, n - lo + 1)), 2 ** n)
        if cov >= lvl:
            best = lo
    return best, max(n + 1 - best, best)


def dijkstra(n: int, edges, source: int) -> list[float]:
    """Plain Dijkstra over an undirected weighted edge list."""
    adj = [[] for _ in range(n)]
    for a, b, w in edges:
        adj[a].append((b, w))
        adj[b].append((a, w))
    out = [math.inf] * n
    out[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > out[u]:
            continue
        for v, w in adj[u]:
            if d + w < out[v]:
                out[v] = d + w
                heapq.heappush(heap, (d + w, v))
    return out


def simple_paths(adj: dict, s, g):
    """Every simple path from ``s`` to ``g`` (exhaustive DFS)."""
    stack = [(s, [s])]
    while stack:
        u, path = stack.pop()
        if u == g:
            yield path
            continue
        for v in adj.get(u, ()):
            if v not in path:
                stack.append((v, path + [v]))


def brute_knn(points, k: int):
    """Indices of the ``k`` nearest other points per point by full sorting."""
    pts = np.asarray(points, dtype=float)
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    return [set(np.argsort(row, kind="stable")[:k].tolist()) for row in d]


def pairs(iterable):
    return itertools.combinations(iterable, 2)


def edge_interior_free(scene, a, b, resolution: float) -> bool:
    """Monolithic check of the interior states ``k / n``, ``n = ceil(d / resolution)``, of one edge."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = math.ceil(float(np.linalg.norm(b - a)) / resolution)
    if n <= 1:
        return True
    ts = (np.arange(1, n) / n)[:, None]
    return not bool(np.any(scene.monolithic_collides(a + ts * (b - a))))
