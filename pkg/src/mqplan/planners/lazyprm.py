"""Lazy PRM* in cost-ordered and effort-ordered form."""

from __future__ import annotations

import math
import time

from mqplan.kernels import PART_OS, PART_RO
from mqplan.planners.base import Planner, PlanningSession, Query, Solution
from mqplan.planners.search import search_cost_ordered, search_effort_ordered
from mqplan.rgg import RoadmapGraph, refine_approximation
from mqplan.scene import CheckCounters
from mqplan.validation import VALID, PathCandidate, validate


class RoadmapPlanner(Planner):
    """Common query setup for planners on the persistent buffer."""

    def __init__(self, session: PlanningSession):
        super().__init__(session)
        self.graph: RoadmapGraph | None = None
        self.last_truncated = False

    def _prepare_graph(self, query: Query) -> RoadmapGraph:
        """Fresh graph for the query; without rewinding, earlier active samples stay active."""
        s = self.session
        sid = s.store.endpoint(query.q_start)
        gid = s.store.endpoint(query.q_goal)
        graph = RoadmapGraph(s.store, sid, gid, s.config.eta)
        old = s.graph
        if not s.config.rewind and old is not None:
            keep = [i for i in old.ids if i not in (old.start_id, old.goal_id, sid, gid)]
            if keep:
                bits = s.scene.state_flags(s.store.configs(keep), PART_RO | PART_OS)
                graph.add_samples([i for i, b in zip(keep, bits) if not b])
            graph.cursor = old.cursor
        s.graph = graph
        self.graph = graph
        return graph

    def _refine(self, graph: RoadmapGraph, c_best: float) -> None:
        s = self.session
        res = refine_approximation(graph, s.buffer, s.scene, s.rng, s.bounds, s.config.batch_size, c_best,
                                   s.config.cap_factor)
        self.last_truncated = res.truncated

    def _claim_reused(self, path: PathCandidate, valid_before: set) -> None:
        """Claim the robot/static effort of path edges that were already valid before this search."""
        s = self.session
        for (a, b), qa, qb in zip(path.edges, path.configs[:-1], path.configs[1:]):
            k = (a, b) if a < b else (b, a)
            if k in valid_before:
                s.ledger.claim(s.effort.checks(math.dist(qa, qb)))

    def _rs_valid_edges(self, path: PathCandidate) -> set:
        s = self.session
        out = set()
        for a, b in path.edges:
            rec = s.cache.get(a, b)
            if rec is not None and rec.rs == VALID:
                out.add((rec.a, rec.b))
        return out


class LazyPRMStar(RoadmapPlanner):
    """Lazy PRM* with batch rewinding.

    ``effort_ordered=False`` searches by cost throughout; with ``True`` the
    searches before the first solution minimize validation effort.
    """

    name = "lazyprmstar"
    effort_ordered = False

    def _search(self, graph: RoadmapGraph, c_best: float) -> PathCandidate | None:
        s = self.session
        param = s.scene.param
        sparse = s.sparse_check if s.config.sparse_checks else None
        if self.effort_ordered and c_best == math.inf:
            return search_effort_ordered(graph, s.cache, param.key_full, param.key_moved, s.effort, s.ledger,
                                         sparse)
        return search_cost_ordered(graph, s.cache, param.key_full, param.key_moved, s.effort, c_best, sparse)

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
                cand = self._search(graph, c_best)
                if cand is None:
                    break
                reused = self._rs_valid_edges(cand)
                if validate(cand, s.scene, s.cache, s.vconfig, s.ledger):
                    self._claim_reused(cand, reused)
                    if cand.cost >= c_best:
                        # the shortest usable candidate only ties the incumbent up to rounding
                        break
                    c_best = cand.cost
                    self._improve(sol, cand, t0, before)
        sol.iterations = it
        sol.graph_size = len(graph)


class EOLazyPRMStar(LazyPRMStar):
    """Effort-ordered Lazy PRM*."""

    name = "eolazyprmstar"
    effort_ordered = True
