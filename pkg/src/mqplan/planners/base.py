"""Shared planner configuration, query/solution records and the planning session."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from mqplan.kernels import PART_OS, PART_RO, PART_RS
from mqplan.rgg import ETA, RoadmapGraph, SampleBuffer, SampleStore
from mqplan.scene import CheckCounters, SceneError, SceneModel
from mqplan.validation import (
    INVALID,
    UNKNOWN,
    EdgeRecord,
    EffortModel,
    PathCandidate,
    ReuseLedger,
    ValidationConfig,
    ValidityCache,
    interior_count,
)

PART_ALL = PART_RS | PART_RO | PART_OS


@dataclass
class PlannerConfig:
    """Tunable planner parameters (the planner block of a scenario file)."""

    resolution: float = 0.01
    batch_size: int = 500
    eta: float = ETA
    steer_factor: float = 10.0
    order: str = "bisection"
    rewind: bool = True
    sparse_checks: bool = True
    reuse_os_effort: bool = False
    cap_factor: int = 100

    def __post_init__(self):
        if not self.resolution > 0.0:
            raise ValueError("resolution must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.order not in ("bisection", "sequential"):
            raise ValueError(f"unknown interpolation order {self.order!r}")

    @property
    def steer_step(self) -> float:
        return self.steer_factor * self.resolution


@dataclass
class StopCondition:
    """When a query ends.

    A query stops at the first solution (if ``first_solution``), once the
    incumbent cost is at most ``cost_target``, after ``time_budget`` seconds
    or after ``max_iterations`` refinement iterations.
    """

    first_solution: bool = True
    time_budget: float = 10.0
    max_iterations: int | None = None
    cost_target: float | None = None

    def reached(self, solved: bool, elapsed: float, iterations: int, cost: float = math.inf) -> bool:
        if solved and self.first_solution:
            return True
        if self.cost_target is not None and cost <= self.cost_target:
            return True
        if elapsed >= self.time_budget:
            return True
        return self.max_iterations is not None and iterations >= self.max_iterations


@dataclass
class Query:
    """One path query: endpoints plus the parametrization active while planning it."""

    q_start: np.ndarray
    q_goal: np.ndarray
    moved: frozenset = frozenset()
    objects: dict | None = None
    stop: StopCondition = field(default_factory=StopCondition)

    def __post_init__(self):
        self.q_start = np.asarray(self.q_start, dtype=float)
        self.q_goal = np.asarray(self.q_goal, dtype=float)
        self.moved = frozenset(self.moved)
        if self.q_start.shape != self.q_goal.shape:
            raise ValueError("start and goal dimensions differ")


@dataclass
class Solution:
    """Result of one query; ``trace`` holds ``(time, cost)`` at every improvement."""

    path: PathCandidate | None = None
    cost: float = math.inf
    t_init: float = math.inf
    c_init: float = math.inf
    trace: list = field(default_factory=list)
    success: bool = False
    reason: str = ""
    checks: CheckCounters = field(default_factory=CheckCounters)
    checks_init: CheckCounters = field(default_factory=CheckCounters)
    iterations: int = 0
    graph_size: int = 0
    elapsed: float = 0.0


class PlanningSession:
    """State that persists across the queries of one session.

    Holds the sample store and buffer, edge validity cache, reuse ledger,
    memo of sparse midpoint checks and the seeded generator. The scene may be
    swapped for another instance with the same robot and static world.
    """

    def __init__(self, scene: SceneModel, bounds, config: PlannerConfig | None = None, seed: int = 0):
        self.scene = scene
        self.bounds = np.asarray(bounds, dtype=float).reshape(scene.dim, 2)
        if np.any(self.bounds[:, 1] < self.bounds[:, 0]):
            raise ValueError("bounds must satisfy lo <= hi")
        self.config = config or PlannerConfig()
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.store = SampleStore(scene.dim)
        self.buffer = SampleBuffer()
        self.cache = ValidityCache()
        self.ledger = ReuseLedger()
        self.effort = EffortModel(self.config.resolution)
        self.vconfig = ValidationConfig(self.config.resolution, self.config.order, self.config.reuse_os_effort)
        self.graph: RoadmapGraph | None = None
        self._mid_rs: set = set()
        self._mid_os: dict[str, set] = {}
        self._mid_ro: dict[str, set] = {}

    # -- scene and cache scope ----------------------------------------------------

    def set_scene(self, scene: SceneModel) -> None:
        if not self.scene.same_environment(scene):
            raise SceneError("new scene differs in robot or static world")
        self.scene = scene
        self.graph = None

    def drop_movable_caches(self) -> None:
        """Keep robot/static knowledge and the buffer; forget everything keyed by a parametrization."""
        self.cache.drop_parametrized()
        self._mid_os.clear()
        self._mid_ro.clear()

    def activate(self, query: Query) -> None:
        if query.objects is not None:
            self.scene.update_parametrization(query.moved, query.objects)
        elif self.scene.param is None:
            raise SceneError("query has no parametrization and none is active")

    # -- sparse checks ------------------------------------------------------------

    def sparse_check(self, a: int, b: int, rec: EdgeRecord, key_full: str, key_moved: str) -> bool:
        """Check an edge at its middle interpolation state only.

        The tested state is the first one the bisection-ordered dense check
        would visit, so a collision found here is also found densely. Parts
        found free at the midpoint are remembered and not tested again.
        """
        rs, os_, ro = rec.parts(key_full, key_moved)
        if rs == INVALID or os_ == INVALID or ro == INVALID:
            return False
        k = (rec.a, rec.b)
        mid_os = self._mid_os.setdefault(key_moved, set())
        mid_ro = self._mid_ro.setdefault(key_full, set())
        mask = 0
        if rs == UNKNOWN and k not in self._mid_rs:
            mask |= PART_RS
        if os_ == UNKNOWN and k not in mid_os:
            mask |= PART_OS
        if ro == UNKNOWN and k not in mid_ro:
            mask |= PART_RO
        if not mask:
            return True
        qa = np.asarray(self.store.tuples[a])
        qb = np.asarray(self.store.tuples[b])
        n = interior_count(float(np.linalg.norm(qb - qa)), self.config.resolution)
        if n == 0:
            return True
        frac = np.array([(n - 1) // 2 + 1]) / (n + 1)
        q = qa + frac[:, None] * (qb - qa)
        idx, flags = self.scene.first_collision(q, mask)
        if idx >= 0:
            if flags.coll_rs:
                rec.set_rs(INVALID)
            if flags.coll_os:
                rec.set_os(key_moved, INVALID)
            if flags.coll_ro:
                rec.set_ro(key_full, INVALID)
            return False
        if mask & PART_RS:
            self._mid_rs.add(k)
        if mask & PART_OS:
            mid_os.add(k)
        if mask & PART_RO:
            mid_ro.add(k)
        return True


class Planner:
    """Base class: endpoint checks, timing and solution bookkeeping."""

    name = "planner"

    def __init__(self, session: PlanningSession):
        self.session = session

    def solve(self, query: Query) -> Solution:
        s = self.session
        s.activate(query)
        scene = s.scene
        before = scene.counters.snapshot()
        t0 = time.perf_counter()
        sol = Solution()
        for label, q in (("start", query.q_start), ("goal", query.q_goal)):
            if q.shape != (scene.dim,):
                raise ValueError(f"{label} configuration has wrong dimension")
            if not scene.is_valid(q).valid:
                sol.reason = f"{label} configuration in collision"
                sol.checks = scene.counters.snapshot() - before
                return sol
        self._run(query, sol, t0, before)
        sol.elapsed = time.perf_counter() - t0
        sol.checks = scene.counters.snapshot() - before
        if not sol.success and not sol.reason:
            sol.reason = "no solution within the stop condition"
        return sol

    def _run(self, query: Query, sol: Solution, t0: float, before: CheckCounters) -> None:
        raise NotImplementedError

    def _improve(self, sol: Solution, path: PathCandidate, t0: float, before: CheckCounters) -> None:
        """Record a new incumbent."""
        t = time.perf_counter() - t0
        cost = path.cost
        if not sol.success:
            sol.success = True
            sol.t_init = t
            sol.c_init = cost
            sol.checks_init = self.session.scene.counters.snapshot() - before
        sol.path = path
        sol.cost = cost
        sol.trace.append((t, cost))
