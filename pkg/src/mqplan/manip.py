"""Sequential manipulation planning over one persistent planning session.

An action sequence is a chain of path queries; the goal of each action is
the start of the next, and each action carries the set of moved objects and
the full object parametrization that holds while it executes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mqplan.geometry import wrap_angle
from mqplan.planners import PlanningSession, Query, Solution, StopCondition, make_planner
from mqplan.scene import WORLD, ObjectState, SceneError, SceneModel


class SequenceError(ValueError):
    """An action sequence violates its chaining invariants."""


@dataclass
class Action:
    q_start: np.ndarray
    q_goal: np.ndarray
    moved: frozenset = frozenset()
    objects: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        self.q_start = np.asarray(self.q_start, dtype=float)
        self.q_goal = np.asarray(self.q_goal, dtype=float)
        self.moved = frozenset(self.moved)
        self.objects = dict(self.objects)


@dataclass
class ActionSequence:
    actions: list

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __getitem__(self, i):
        return self.actions[i]


def _world_pose(scene: SceneModel, q, st: ObjectState):
    if st.parent == WORLD:
        return st.transform
    frames = dict(scene.robot.forward_kinematics(q))
    if st.parent not in frames:
        raise SequenceError(f"unknown parent frame {st.parent!r}")
    return frames[st.parent] @ st.transform


def check_sequence(scene: SceneModel, seq: ActionSequence, atol: float = 1e-9) -> None:
    """Raise :class:`SequenceError` if the sequence is not a consistent chain.

    Goals must equal the next start bitwise. Every object must be placed
    identically in the world at the hand-over between two actions, and only
    objects moved in an action may change their parametrization.
    """
    if len(seq) == 0:
        raise SequenceError("empty action sequence")
    for i, act in enumerate(seq):
        if act.q_start.shape != (scene.dim,) or act.q_goal.shape != (scene.dim,):
            raise SequenceError(f"action {i}: configuration dimension differs from the robot's {scene.dim}")
        unknown = (set(act.objects) | set(act.moved)) - set(scene.movables)
        if unknown:
            raise SequenceError(f"action {i}: unknown objects {sorted(unknown)}")
        missing = set(scene.movables) - set(act.objects)
        if missing:
            raise SequenceError(f"action {i}: no state for objects {sorted(missing)}")
        for tau, st in act.objects.items():
            if st.parent != WORLD and tau not in act.moved:
                raise SequenceError(f"action {i}: object {tau!r} is attached but not in the moved set")
    for i in range(len(seq) - 1):
        a, b = seq[i], seq[i + 1]
        if a.q_goal.tobytes() != b.q_start.tobytes():
            raise SequenceError(f"action {i + 1}: start does not equal the goal of action {i}")
        q = a.q_goal
        for tau in scene.movables:
            diff = _world_pose(scene, q, a.objects[tau]).as_array() - _world_pose(scene, q, b.objects[tau]).as_array()
            diff[2] = wrap_angle(diff[2])
            if np.any(np.abs(diff) > atol):
                raise SequenceError(f"action {i + 1}: object {tau!r} is not where action {i} leaves it")


@dataclass
class SessionPolicy:
    """Reuse scope, planner choice and per-action stop condition.

    ``scope="full"`` keeps every cache within a session; ``"static"`` drops
    the parametrization-keyed validity before each new problem instance.
    """

    planner: str = "eolazyprmstar"
    scope: str = "full"
    stop: StopCondition = field(default_factory=StopCondition)

    def __post_init__(self):
        if self.scope not in ("full", "static"):
            raise ValueError(f"unknown reuse scope {self.scope!r}")


def solve_sequence(session: PlanningSession, seq: ActionSequence, policy: SessionPolicy) -> list[Solution]:
    """Plan every action in order on the shared session.

    Stops after the first failed action and returns the solutions so far.
    """
    check_sequence(session.scene, seq)
    planner = make_planner(policy.planner, session)
    out = []
    for act in seq:
        sol = planner.solve(Query(act.q_start, act.q_goal, act.moved, act.objects, policy.stop))
        out.append(sol)
        if not sol.success:
            break
    return out


@dataclass
class FamilyResult:
    instance: int
    solutions: list
    wall_time: float

    @property
    def success(self) -> bool:
        return bool(self.solutions) and all(s.success for s in self.solutions)

    @property
    def t_init(self) -> float:
        """Summed time to first solution over the instance's actions (inf on failure)."""
        if not self.success:
            return float("inf")
        return float(sum(s.t_init for s in self.solutions))


def solve_family(scenes: Sequence[SceneModel], sequences: Sequence[ActionSequence], policy: SessionPolicy,
                 bounds, config=None, seed: int = 0, order: Sequence[int] | None = None,
                 session: PlanningSession | None = None) -> list[FamilyResult]:
    """Solve related problem instances one after another on one session.

    All scenes must share robot and static world. Before each instance the
    reuse scope is applied; the buffer and robot/static validity persist.
    """
    if len(scenes) != len(sequences):
        raise ValueError("one action sequence per scene required")
    if not scenes:
        return []
    for i, sc in enumerate(scenes[1:], start=1):
        if not scenes[0].same_environment(sc):
            raise SceneError(f"instance {i} differs from instance 0 in robot or static world")
    order = list(range(len(scenes))) if order is None else list(order)
    if sorted(order) != list(range(len(scenes))):
        raise ValueError("order must be a permutation of the instance indices")
    if session is None:
        session = PlanningSession(scenes[order[0]], bounds, config, seed)
    results = []
    for n, i in enumerate(order):
        if session.scene is not scenes[i]:
            session.set_scene(scenes[i])
        if n > 0 and policy.scope == "static":
            session.drop_movable_caches()
        t0 = time.perf_counter()
        sols = solve_sequence(session, sequences[i], policy)
        results.append(FamilyResult(i, sols, time.perf_counter() - t0))
    return results
