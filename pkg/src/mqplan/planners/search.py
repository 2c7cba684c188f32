"""Graph searches over the edge-implicit roadmap.

Both searches are A* with lexicographic keys over local vertex indices and
allow reopening, so they stay exact when the heuristic is admissible but
not consistent. Ties are broken by the smaller sample id.
"""

from __future__ import annotations

import heapq
import math
from typing import Callable

import numpy as np

from mqplan.rgg import RoadmapGraph
from mqplan.validation import (
    INVALID,
    UNKNOWN,
    VALID,
    EdgeRecord,
    EffortModel,
    PathCandidate,
    ReuseLedger,
    ValidityCache,
)

SparseCheck = Callable[[int, int, EdgeRecord, str, str], bool]


def path_from_parents(graph: RoadmapGraph, parent: dict, g: int) -> PathCandidate:
    out = [g]
    while out[-1] in parent:
        out.append(parent[out[-1]])
    out.reverse()
    ids = [graph.ids[v] for v in out]
    return PathCandidate(ids, np.array([graph.pos[v] for v in out], dtype=float))


def effort_lookup(cache: ValidityCache, key_full: str, key_moved: str, effort: EffortModel):
    """Fast ``(a, b, dist) -> effort or None`` with the semantics of :func:`edge_effort_dist`."""
    records = cache.records
    res = effort.resolution
    ceil = math.ceil

    def lookup(a: int, b: int, dist: float):
        rec = records.get((a, b) if a < b else (b, a))
        if rec is None:
            return 3 * ceil(dist / res)
        rs = rec.rs
        os_ = rec.os.get(key_moved, UNKNOWN)
        ro = rec.ro.get(key_full, UNKNOWN)
        if rs == INVALID or os_ == INVALID or ro == INVALID:
            return None
        unknown = (rs == UNKNOWN) + (os_ == UNKNOWN) + (ro == UNKNOWN)
        return unknown * ceil(dist / res) if unknown else 0

    return lookup


def direct_effort_to_go(graph: RoadmapGraph, cache: ValidityCache, v: int, key_full: str, key_moved: str,
                        effort: EffortModel, remaining: float, dist: float | None = None) -> float:
    """A priori effort-to-go of local vertex ``v``, discounted by unclaimed reusable effort.

    A known-invalid direct edge says nothing about detours, so it is priced
    as fully unknown.
    """
    g = graph.goal_local
    if v == g:
        return 0.0
    if dist is None:
        dist = math.dist(graph.pos[v], graph.pos[g])
    e = effort_lookup(cache, key_full, key_moved, effort)(graph.ids[v], graph.ids[g], dist)
    if e is None:
        e = 3 * effort.checks(dist)
    return max(e - remaining, 0.0)


class _LazyAStar:
    """A* over ``(effort, cost)`` labels with sparse checks deferred to expansion.

    ``by_effort`` selects which quantity leads the lexicographic order. The
    tree edge of a vertex is checked sparsely when the vertex is popped; if
    the check fails the label is rebuilt from the expanded neighbours and the
    vertex is queued again.
    """

    def __init__(self, graph: RoadmapGraph, lookup, by_effort: bool, he, hc: list, c_best: float,
                 sparse: SparseCheck | None, cache: ValidityCache, key_full: str, key_moved: str, pruned=(),
                 on_expand=None):
        self.graph = graph
        self.on_expand = on_expand
        self.lookup = lookup
        self.by_effort = by_effort
        self.he = he
        self.hc = hc
        self.c_best = c_best
        self.sparse = sparse
        self.cache = cache
        self.keys = (key_full, key_moved)
        self.pruned = pruned
        self.label: dict[int, tuple] = {}
        self.parent: dict[int, int] = {}
        self.pdist: dict[int, float] = {}
        self.expanded: set = set()
        self.heap: list = []

    def rank(self, lab: tuple) -> tuple:
        return lab if self.by_effort else (lab[1], lab[0])

    def set(self, v: int, lab: tuple, u: int | None, dist: float = 0.0) -> None:
        self.label[v] = lab
        if u is not None:
            self.parent[v] = u
            self.pdist[v] = dist
        ge, gc = lab
        if self.by_effort:
            key = (ge + self.he(v), gc + self.hc[v])
        else:
            key = (gc + self.hc[v], ge)
        heapq.heappush(self.heap, (*key, self.graph.ids[v], ge, gc, v))

    def offer(self, u: int, v: int, dist: float) -> tuple | None:
        """Label of ``v`` through ``u``, or ``None`` if the edge is unusable or cannot beat ``c_best``."""
        gc = self.label[u][1] + dist
        if gc + self.hc[v] >= self.c_best:
            return None
        w = self.lookup(self.graph.ids[u], self.graph.ids[v], dist)
        if w is None:
            return None
        return (self.label[u][0] + w, gc)

    def repair(self, v: int) -> None:
        del self.label[v], self.parent[v], self.pdist[v]
        best = None
        for c, dist in zip(self.graph.adj[v], self.graph.adj_len[v]):
            if c not in self.expanded:
                continue
            lab = self.offer(c, v, dist)
            if lab is None:
                continue
            r = (self.rank(lab), self.graph.ids[c])
            if best is None or r < best[0]:
                best = (r, lab, c, dist)
        if best is not None:
            self.set(v, best[1], best[2], best[3])

    def tree_edge_ok(self, v: int) -> bool:
        u = self.parent[v]
        a, b = self.graph.ids[u], self.graph.ids[v]
        w = self.lookup(a, b, self.pdist[v])
        if w is None:
            return False
        if w == 0 or self.sparse is None:
            return True
        return self.sparse(a, b, self.cache.record(a, b), *self.keys)

    def run(self) -> PathCandidate | None:
        graph = self.graph
        s, g = graph.start_local, graph.goal_local
        if self.hc[s] >= self.c_best:
            return None
        self.set(s, (0, 0.0), None)
        adj, adj_len = graph.adj, graph.adj_len
        while self.heap:
            *_, ge, gc, u = heapq.heappop(self.heap)
            if self.label.get(u) != (ge, gc):
                continue
            if u != s and not self.tree_edge_ok(u):
                self.repair(u)
                continue
            self.expanded.add(u)
            if self.on_expand is not None and u != s:
                self.on_expand(self.parent[u], u, self.pdist[u])
            if u == g:
                return path_from_parents(graph, self.parent, g)
            for v, dist in zip(adj[u], adj_len[u]):
                if v in self.pruned:
                    continue
                lab = self.offer(u, v, dist)
                if lab is None:
                    continue
                old = self.label.get(v)
                if old is not None and self.rank(lab) >= self.rank(old):
                    continue
                self.set(v, lab, u, dist)
        return None


def search_effort_ordered(graph: RoadmapGraph, cache: ValidityCache, key_full: str, key_moved: str,
                          effort: EffortModel, ledger: ReuseLedger | None = None,
                          sparse: SparseCheck | None = None) -> PathCandidate | None:
    """Effort-minimal candidate path, cost as tiebreaker.

    Edge weight is the remaining validation effort under the active keys;
    the heuristic is the discounted direct effort-to-go, where the unclaimed
    reusable effort shrinks by the r/s effort of every reusable edge the
    search expands. The tree edge of every expanded vertex is checked
    sparsely when ``sparse`` is given.
    """
    g = graph.goal_local
    ids = graph.ids
    hc = graph.distances_to(g)
    lookup = effort_lookup(cache, key_full, key_moved, effort)
    goal_id = ids[g]
    res = effort.resolution
    records = cache.records
    direct: dict[int, float] = {}
    # reusable effort still unclaimed; shrinks as the search expands r/s-valid edges
    remaining = [ledger.remaining if ledger is not None else 0.0]

    def heur(v):
        if v == g:
            return 0.0
        e = direct.get(v)
        if e is None:
            e = lookup(ids[v], goal_id, hc[v])
            if e is None:
                e = 3 * math.ceil(hc[v] / res)
            direct[v] = e
        return max(e - remaining[0], 0.0)

    def claim(u, v, dist):
        if remaining[0] <= 0:
            return
        a, b = ids[u], ids[v]
        rec = records.get((a, b) if a < b else (b, a))
        if rec is not None and rec.rs == VALID:
            remaining[0] = max(remaining[0] - math.ceil(dist / res), 0.0)

    return _LazyAStar(graph, lookup, True, heur, hc, math.inf, sparse, cache, key_full, key_moved,
                      on_expand=claim if ledger is not None else None).run()


def search_cost_ordered(graph: RoadmapGraph, cache: ValidityCache, key_full: str, key_moved: str,
                        effort: EffortModel, c_best: float = math.inf,
                        sparse: SparseCheck | None = None) -> PathCandidate | None:
    """Shortest candidate path with remaining effort as tiebreaker.

    Vertices whose admissible estimate ``f`` reaches ``c_best`` are pruned,
    as is every label that cannot beat ``c_best``. Known-invalid edges are
    excluded.
    """
    s, g = graph.start_local, graph.goal_local
    hc = graph.distances_to(g)
    if hc[s] >= c_best:
        return None
    pruned: set = set()
    if c_best < math.inf:
        hs = graph.distances_to(s)
        pruned = {v for v in range(len(graph.ids)) if v != g and hs[v] + hc[v] >= c_best}
    lookup = effort_lookup(cache, key_full, key_moved, effort)
    return _LazyAStar(graph, lookup, False, None, hc, c_best, sparse, cache, key_full, key_moved, pruned).run()
