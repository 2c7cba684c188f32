"""RRT-Connect baseline without any reuse between queries."""

from __future__ import annotations

import time

import numpy as np

from mqplan.planners.base import PART_ALL, Planner, Query, Solution
from mqplan.rgg import sample_uniform
from mqplan.scene import CheckCounters
from mqplan.validation import PathCandidate, interpolation_sequence

TRAPPED, ADVANCED, REACHED = 0, 1, 2


class _Tree:
    def __init__(self, root: np.ndarray):
        self.nodes = np.zeros((256, root.shape[0]))
        self.nodes[0] = root
        self.parent = [-1]
        self.n = 1

    def add(self, q: np.ndarray, parent: int) -> int:
        if self.n == len(self.nodes):
            self.nodes = np.concatenate([self.nodes, np.zeros_like(self.nodes)])
        self.nodes[self.n] = q
        self.parent.append(parent)
        self.n += 1
        return self.n - 1

    def nearest(self, q: np.ndarray) -> int:
        d = np.sum((self.nodes[: self.n] - q) ** 2, axis=1)
        return int(np.argmin(d))

    def branch(self, i: int) -> list[int]:
        out = []
        while i >= 0:
            out.append(i)
            i = self.parent[i]
        return out


class RRTConnect(Planner):
    """Bidirectional RRT with greedy connection.

    Every motion is checked uncached at the planning resolution, with all
    collision parts enabled, and nothing is kept after the query.
    """

    name = "rrtconnect"

    def _motion_free(self, qa: np.ndarray, qb: np.ndarray) -> bool:
        s = self.session
        states = interpolation_sequence(qa, qb, s.config.resolution, "sequential")
        states = np.vstack([states, qb[None, :]])
        idx, _ = s.scene.first_collision(states, PART_ALL)
        return idx < 0

    def _extend(self, tree: _Tree, q: np.ndarray) -> tuple[int, int]:
        step = self.session.config.steer_step
        i = tree.nearest(q)
        qn = tree.nodes[i]
        d = float(np.linalg.norm(q - qn))
        if d <= step:
            q_new, status = q, REACHED
        else:
            q_new, status = qn + (q - qn) * (step / d), ADVANCED
        if d == 0.0:
            return REACHED, i
        if not self._motion_free(qn, q_new):
            return TRAPPED, -1
        return status, tree.add(q_new.copy(), i)

    def _connect(self, tree: _Tree, q: np.ndarray) -> tuple[int, int]:
        while True:
            status, i = self._extend(tree, q)
            if status != ADVANCED:
                return status, i

    def _run(self, query: Query, sol: Solution, t0: float, before: CheckCounters) -> None:
        s = self.session
        ta, tb = _Tree(query.q_start.copy()), _Tree(query.q_goal.copy())
        a_is_start = True
        it = 0
        while not query.stop.reached(False, time.perf_counter() - t0, it):
            it += 1
            q_rand = sample_uniform(s.rng, s.bounds)
            status, i = self._extend(ta, q_rand)
            if status != TRAPPED:
                status2, j = self._connect(tb, ta.nodes[i])
                if status2 == REACHED:
                    pa = [ta.nodes[k] for k in ta.branch(i)][::-1]
                    pb = [tb.nodes[k] for k in tb.branch(j)]
                    if not a_is_start:
                        pa, pb = pb[::-1], pa[::-1]
                    configs = np.array(pa + pb[1:])
                    path = PathCandidate(list(range(len(configs))), configs)
                    self._improve(sol, path, t0, before)
                    break
            ta, tb = tb, ta
            a_is_start = not a_is_start
        sol.iterations = it
        sol.graph_size = ta.n + tb.n
