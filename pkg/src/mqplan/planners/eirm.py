"""EIRM*: asymmetric search on the persistent roadmap.

A reverse search from the goal computes exact remaining-effort values over
the current graph using cached validity only, without collision checks. A
forward search from the start is guided by them and fully validates every
edge it expands. An edge that fails validation only raises true remaining
efforts, so the reverse values stay admissible; the forward search drops
the edge, repairs the label of its end vertex from the closed neighbours
and continues. The reverse values are recomputed before every forward pass.
"""

from __future__ import annotations

import heapq
import math
import time

from mqplan.planners.base import Query, Solution
from mqplan.planners.lazyprm import RoadmapPlanner
from mqplan.planners.search import effort_lookup, path_from_parents
from mqplan.rgg import RoadmapGraph
from mqplan.scene import CheckCounters
from mqplan.validation import VALID, validate_edge


def reverse_effort(graph: RoadmapGraph, cache, key_full: str, key_moved: str, effort) -> list[float]:
    """Minimal remaining effort from every local vertex to the goal (Dijkstra, no checks)."""
    out = [math.inf] * len(graph)
    g = graph.goal_local
    out[g] = 0.0
    heap = [(0.0, graph.ids[g], g)]
    ids, adj, adj_len = graph.ids, graph.adj, graph.adj_len
    lookup = effort_lookup(cache, key_full, key_moved, effort)
    while heap:
        d, _, u = heapq.heappop(heap)
        if d > out[u]:
            continue
        a = ids[u]
        for v, dist in zip(adj[u], adj_len[u]):
            w = lookup(a, ids[v], dist)
            if w is None:
                continue
            nd = d + w
            if nd < out[v]:
                out[v] = nd
                heapq.heappush(heap, (nd, ids[v], v))
    return out


class _Forward:
    """State of one forward pass; keys depend on whether a solution exists yet."""

    def __init__(self, graph: RoadmapGraph, e_hat: list, c_best: float, lookup):
        self.graph = graph
        self.e_hat = e_hat
        self.c_best = c_best
        self.by_effort = c_best == math.inf
        self.lookup = lookup
        self.hc = graph.distances_to(graph.goal_local)
        self.label: dict[int, tuple] = {}
        self.parent: dict[int, int] = {}
        self.closed: set = set()
        self.heap: list = []

    def rank(self, lab: tuple) -> tuple:
        return lab if self.by_effort else (lab[1], lab[0])

    def push(self, v: int, lab: tuple) -> None:
        ge, gc = lab
        if self.by_effort:
            key = (ge + self.e_hat[v], gc + self.hc[v])
        else:
            key = (gc + self.hc[v], ge + self.e_hat[v])
        heapq.heappush(self.heap, (*key, self.graph.ids[v], ge, gc, v))

    def offer(self, u: int, v: int, dist: float) -> tuple | None:
        """Label of ``v`` through closed ``u``, or ``None`` if unusable or pruned."""
        w = self.lookup(self.graph.ids[u], self.graph.ids[v], dist)
        if w is None or self.e_hat[v] == math.inf:
            return None
        ge, gc = self.label[u]
        new = (ge + w, gc + dist)
        if not self.by_effort and new[1] + self.hc[v] >= self.c_best:
            return None
        return new

    def repair(self, u: int) -> None:
        """Best label of ``u`` through closed neighbours after its tree edge failed."""
        best = None
        for c, dist in zip(self.graph.adj[u], self.graph.adj_len[u]):
            if c not in self.closed:
                continue
            new = self.offer(c, u, dist)
            if new is None:
                continue
            r = (self.rank(new), self.graph.ids[c])
            if best is None or r < best[0]:
                best = (r, new, c)
        if best is not None:
            self.label[u] = best[1]
            self.parent[u] = best[2]
            self.push(u, best[1])


class EIRMStar(RoadmapPlanner):
    """Effort-informed roadmap planner with a check-free reverse search."""

    name = "eirmstar"

    def _forward(self, graph: RoadmapGraph, e_hat: list, c_best: float):
        """One forward pass; the validated path, or ``None`` once nothing can beat ``c_best``."""
        s = self.session
        param = s.scene.param
        kf, km = param.key_full, param.key_moved
        ids, pos = graph.ids, graph.pos
        st, g = graph.start_local, graph.goal_local
        fw = _Forward(graph, e_hat, c_best, effort_lookup(s.cache, kf, km, s.effort))
        if fw.hc[st] >= c_best:
            return None
        if not fw.by_effort:
            hs = graph.distances_to(st)
            pruned = {v for v in range(len(ids)) if v != g and hs[v] + fw.hc[v] >= c_best}
        else:
            pruned = set()
        fw.label[st] = (0, 0.0)
        fw.push(st, (0, 0.0))
        while fw.heap:
            *_, ge, gc, u = heapq.heappop(fw.heap)
            if u in fw.closed or fw.label.get(u) != (ge, gc):
                continue
            if u != st:
                p = fw.parent[u]
                rec = s.cache.record(ids[p], ids[u])
                rs_before = rec.rs
                if not validate_edge(pos[p], pos[u], rec, s.scene, s.vconfig, s.ledger, kf, km):
                    del fw.label[u], fw.parent[u]
                    fw.repair(u)
                    continue
                if rs_before == VALID:
                    s.ledger.claim(s.effort.checks(math.dist(pos[p], pos[u])))
            fw.closed.add(u)
            if u == g:
                return path_from_parents(graph, fw.parent, g)
            for v, dist in zip(graph.adj[u], graph.adj_len[u]):
                if v in fw.closed or v in pruned:
                    continue
                new = fw.offer(u, v, dist)
                if new is None:
                    continue
                old = fw.label.get(v)
                if old is not None and fw.rank(new) >= fw.rank(old):
                    continue
                fw.label[v] = new
                fw.parent[v] = u
                fw.push(v, new)
        return None

    def _run(self, query: Query, sol: Solution, t0: float, before: CheckCounters) -> None:
        s = self.session
        s.ledger.reset_claims()
        graph = self._prepare_graph(query)
        stop = query.stop
        c_best = math.inf
        it = 0
        while not stop.reached(sol.success, time.perf_counter() - t0, it, sol.cost):
            self._refine(graph, c_best)
            it += 1
            while not stop.reached(sol.success, time.perf_counter() - t0, it, sol.cost):
                param = s.scene.param
                e_hat = reverse_effort(graph, s.cache, param.key_full, param.key_moved, s.effort)
                if e_hat[graph.start_local] == math.inf:
                    break
                path = self._forward(graph, e_hat, c_best)
                if path is None or path.cost >= c_best:
                    break
                c_best = path.cost
                self._improve(sol, path, t0, before)
        sol.iterations = it
        sol.graph_size = len(graph)
