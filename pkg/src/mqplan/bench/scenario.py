"""Scenario files: world, action sequence(s), planner block and family variants.

Scenarios are YAML documents with ``version: 1``. Every schema violation is
reported with the line and column of the offending node. See
``docs/scenario_format.md`` in the repository for the field reference.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from mqplan.geometry import Box, Capsule, Composite, ConvexPolygon, Disc, FreeFlyer, PlanarChain, Pose2
from mqplan.manip import Action, ActionSequence, SequenceError, check_sequence
from mqplan.planners import PlannerConfig
from mqplan.scene import WORLD, ObjectState, SceneError, SceneModel, StaticBody

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Schema, reference or invariant violation, with a source position when known."""

    def __init__(self, message: str, source: str = "<scenario>", line: int | None = None,
                 column: int | None = None):
        self.message = message
        self.source = source
        self.line = line
        self.column = column
        pos = f"{source}:{line}:{column}" if line is not None else source
        super().__init__(f"{pos}: {message}")


class _Ctx:
    """Node positions by key path, used to place error messages."""

    def __init__(self, source: str, marks: dict):
        self.source = source
        self.marks = marks

    def fail(self, path: tuple, message: str):
        p = path
        while p not in self.marks and p:
            p = p[:-1]
        mark = self.marks.get(p)
        where = "/".join(str(k) for k in path) or "<root>"
        if mark is None:
            raise ScenarioError(f"{where}: {message}", self.source)
        raise ScenarioError(f"{where}: {message}", self.source, mark.line + 1, mark.column + 1)


def _collect_marks(node, path: tuple, marks: dict) -> None:
    marks[path] = node.start_mark
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _collect_marks(v, path + (k.value,), marks)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _collect_marks(v, path + (i,), marks)


def _parse_yaml(text: str, source: str) -> tuple[Any, _Ctx]:
    loader = yaml.SafeLoader(text)
    try:
        node = loader.get_single_node()
        if node is None:
            raise ScenarioError("empty document", source)
        data = loader.construct_document(node)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ScenarioError(f"parse error: {exc.problem}", source, line, col) from None
    finally:
        loader.dispose()
    marks: dict = {}
    _collect_marks(node, (), marks)
    return data, _Ctx(source, marks)


# -- field readers --------------------------------------------------------------


def _get(ctx: _Ctx, d, path: tuple, key: str, kind=None, default=...):
    if not isinstance(d, dict):
        ctx.fail(path, "expected a mapping")
    if key not in d:
        if default is ...:
            ctx.fail(path, f"missing required field {key!r}")
        return default
    v = d[key]
    if kind is not None and (not isinstance(v, kind) or (isinstance(v, bool) and kind is not bool)):
        ctx.fail(path + (key,), f"expected {getattr(kind, '__name__', kind)}, got {type(v).__name__}")
    return v


def _floats(ctx: _Ctx, v, path: tuple, n: int | None = None) -> list:
    if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        ctx.fail(path, "expected a list of numbers")
    if n is not None and len(v) != n:
        ctx.fail(path, f"expected {n} numbers, got {len(v)}")
    out = [float(x) for x in v]
    if not all(math.isfinite(x) for x in out):
        ctx.fail(path, "numbers must be finite")
    return out


def _check_keys(ctx: _Ctx, d: dict, path: tuple, allowed) -> None:
    extra = set(d) - set(allowed)
    if extra:
        k = sorted(map(str, extra))[0]
        ctx.fail(path + (k,), f"unknown field {k!r}")


def _shape(ctx: _Ctx, d, path: tuple):
    kind = _get(ctx, d, path, "type", str)
    try:
        if kind == "disc":
            _check_keys(ctx, d, path, ("type", "radius"))
            return Disc(float(_get(ctx, d, path, "radius", (int, float))))
        if kind == "box":
            _check_keys(ctx, d, path, ("type", "half_extents"))
            return Box(tuple(_floats(ctx, _get(ctx, d, path, "half_extents"), path + ("half_extents",), 2)))
        if kind == "capsule":
            _check_keys(ctx, d, path, ("type", "radius", "half_length"))
            return Capsule(float(_get(ctx, d, path, "radius", (int, float))),
                           float(_get(ctx, d, path, "half_length", (int, float))))
        if kind == "polygon":
            _check_keys(ctx, d, path, ("type", "vertices"))
            verts = _get(ctx, d, path, "vertices", list)
            pts = [tuple(_floats(ctx, v, path + ("vertices", i), 2)) for i, v in enumerate(verts)]
            return ConvexPolygon(tuple(pts))
    except ScenarioError:
        raise
    except ValueError as exc:
        ctx.fail(path, str(exc))
    ctx.fail(path + ("type",), f"unknown shape type {kind!r} (disc, box, capsule, polygon)")


def _shape_dict(s) -> dict:
    if isinstance(s, Disc):
        return {"type": "disc", "radius": s.radius}
    if isinstance(s, Box):
        return {"type": "box", "half_extents": list(s.half_extents)}
    if isinstance(s, Capsule):
        return {"type": "capsule", "radius": s.radius, "half_length": s.half_length}
    return {"type": "polygon", "vertices": [list(v) for v in s.vertices]}


def _pose(ctx: _Ctx, v, path: tuple) -> Pose2:
    return Pose2(*_floats(ctx, v, path, 3))


def _pose_list(p: Pose2) -> list:
    return [p.x, p.y, p.theta]


def _robot(ctx: _Ctx, d, path: tuple):
    kind = _get(ctx, d, path, "type", str)
    try:
        if kind == "freeflyer":
            _check_keys(ctx, d, path, ("type", "name", "mode", "shape"))
            return FreeFlyer(_shape(ctx, _get(ctx, d, path, "shape", dict), path + ("shape",)),
                             _get(ctx, d, path, "mode", str, "xy"), _get(ctx, d, path, "name", str, "robot"))
        if kind == "chain":
            _check_keys(ctx, d, path, ("type", "name", "link_lengths", "base", "link_radius"))
            return PlanarChain(_floats(ctx, _get(ctx, d, path, "link_lengths"), path + ("link_lengths",)),
                               _pose(ctx, _get(ctx, d, path, "base", list, [0.0, 0.0, 0.0]), path + ("base",)),
                               float(_get(ctx, d, path, "link_radius", (int, float), 0.02)),
                               name=_get(ctx, d, path, "name", str, "arm"))
        if kind == "composite":
            _check_keys(ctx, d, path, ("type", "members"))
            members = _get(ctx, d, path, "members", list)
            return Composite([_robot(ctx, m, path + ("members", i)) for i, m in enumerate(members)])
    except ScenarioError:
        raise
    except ValueError as exc:
        ctx.fail(path, str(exc))
    ctx.fail(path + ("type",), f"unknown robot type {kind!r} (freeflyer, chain, composite)")


def _robot_dict(r) -> dict:
    if isinstance(r, FreeFlyer):
        return {"type": "freeflyer", "name": r.name, "mode": r.mode,
                "shape": _shape_dict(r.bodies[0].shape)}
    if isinstance(r, PlanarChain):
        radius = r.bodies[0].shape.radius
        return {"type": "chain", "name": r.name, "link_lengths": list(r.link_lengths), "base": _pose_list(r.base),
                "link_radius": radius}
    return {"type": "composite", "members": [_robot_dict(m) for m in r.models]}


def _objects(ctx: _Ctx, d, path: tuple) -> dict:
    if not isinstance(d, dict):
        ctx.fail(path, "expected a mapping of object id to state")
    out = {}
    for tau, st in d.items():
        p = path + (tau,)
        _check_keys(ctx, st, p, ("parent", "pose"))
        pose = _pose(ctx, _get(ctx, st, p, "pose"), p + ("pose",))
        out[str(tau)] = ObjectState(_get(ctx, st, p, "parent", str, WORLD), pose)
    return out


def _actions(ctx: _Ctx, lst, path: tuple, dim: int) -> list:
    if not isinstance(lst, list) or not lst:
        ctx.fail(path, "expected a nonempty list of actions")
    out = []
    for i, a in enumerate(lst):
        p = path + (i,)
        _check_keys(ctx, a, p, ("name", "start", "goal", "moved", "objects"))
        moved = _get(ctx, a, p, "moved", list, [])
        out.append(Action(
            _floats(ctx, _get(ctx, a, p, "start"), p + ("start",), dim),
            _floats(ctx, _get(ctx, a, p, "goal"), p + ("goal",), dim),
            frozenset(str(m) for m in moved),
            _objects(ctx, _get(ctx, a, p, "objects", dict, {}), p + ("objects",)),
            str(_get(ctx, a, p, "name", str, f"action{i}")),
        ))
    return out


def _actions_list(actions) -> list:
    return [
        {"name": a.name, "start": [float(x) for x in a.q_start], "goal": [float(x) for x in a.q_goal],
         "moved": sorted(a.moved),
         "objects": {t: {"parent": st.parent, "pose": _pose_list(st.transform)} for t, st in sorted(a.objects.items())}}
        for a in actions
    ]


_PLANNER_KEYS = tuple(f.name for f in fields(PlannerConfig))


def _planner(ctx: _Ctx, d, path: tuple) -> PlannerConfig:
    if d is None:
        return PlannerConfig()
    if not isinstance(d, dict):
        ctx.fail(path, "expected a mapping")
    _check_keys(ctx, d, path, _PLANNER_KEYS)
    try:
        return PlannerConfig(**d)
    except (TypeError, ValueError) as exc:
        ctx.fail(path, str(exc))


@dataclass
class Variant:
    """One family instance: movable shapes and the action sequence."""

    movables: dict
    actions: list


@dataclass
class ScenarioFile:
    name: str
    bounds: np.ndarray
    robot: Any
    statics: list
    movables: dict
    actions: list
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    family: list = field(default_factory=list)
    description: str = ""
    source: str = "<scenario>"

    # -- construction ----------------------------------------------------------------

    def _variant(self, index: int | None) -> Variant:
        if index is None:
            return Variant(self.movables, self.actions)
        if not 0 <= index < len(self.family):
            raise IndexError(f"scenario {self.name!r} has {len(self.family)} family variants")
        return self.family[index]

    def build_scene(self, variant: int | None = None) -> SceneModel:
        return SceneModel(self.robot, self.statics, self._variant(variant).movables)

    def sequence(self, variant: int | None = None) -> ActionSequence:
        return ActionSequence(copy.deepcopy(self._variant(variant).actions))

    def instances(self) -> list[tuple[SceneModel, ActionSequence]]:
        """Family instances, or the base problem if the scenario has no family."""
        idx = list(range(len(self.family))) if self.family else [None]
        return [(self.build_scene(i), self.sequence(i)) for i in idx]

    @property
    def dim(self) -> int:
        return self.robot.dim

    # -- serialization ------------------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "version": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "bounds": [[float(lo), float(hi)] for lo, hi in self.bounds],
            "robot": _robot_dict(self.robot),
            "statics": [
                {"name": s.name, "shape": _shape_dict(s.shape), "pose": _pose_list(s.pose)} for s in self.statics
            ],
            "movables": {t: _shape_dict(s) for t, s in sorted(self.movables.items())},
            "actions": _actions_list(self.actions),
            "planner": {k: getattr(self.planner, k) for k in _PLANNER_KEYS},
        }
        if self.family:
            out["family"] = [
                {"movables": {t: _shape_dict(s) for t, s in sorted(v.movables.items())},
                 "actions": _actions_list(v.actions)}
                for v in self.family
            ]
        return out


def dump_scenario(sc: ScenarioFile) -> str:
    return yaml.safe_dump(sc.to_dict(), sort_keys=False)


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioFile:
    data, ctx = _parse_yaml(text, source)
    root: tuple = ()
    if not isinstance(data, dict):
        ctx.fail(root, "scenario must be a mapping")
    _check_keys(ctx, data, root, ("version", "name", "description", "bounds", "robot", "statics", "movables",
                                  "actions", "planner", "family"))
    version = _get(ctx, data, root, "version", int)
    if version != SCHEMA_VERSION:
        ctx.fail(("version",), f"unsupported schema version {version} (expected {SCHEMA_VERSION})")
    name = _get(ctx, data, root, "name", str)
    robot = _robot(ctx, _get(ctx, data, root, "robot", dict), ("robot",))
    if not robot.planar:
        ctx.fail(("robot",), "robot must be planar")
    bounds_raw = _get(ctx, data, root, "bounds", list)
    if len(bounds_raw) != robot.dim:
        ctx.fail(("bounds",), f"expected {robot.dim} [lo, hi] pairs, got {len(bounds_raw)}")
    bounds = np.array([_floats(ctx, b, ("bounds", i), 2) for i, b in enumerate(bounds_raw)])
    if np.any(bounds[:, 1] < bounds[:, 0]):
        ctx.fail(("bounds",), "each bound must satisfy lo <= hi")
    statics = []
    for i, s in enumerate(_get(ctx, data, root, "statics", list, [])):
        p = ("statics", i)
        _check_keys(ctx, s, p, ("name", "shape", "pose"))
        shape = _shape(ctx, _get(ctx, s, p, "shape", dict), p + ("shape",))
        pose = _pose(ctx, _get(ctx, s, p, "pose", list, [0.0, 0.0, 0.0]), p + ("pose",))
        statics.append(StaticBody(_get(ctx, s, p, "name", str), shape, pose))
    movables = _movables(ctx, _get(ctx, data, root, "movables", dict, {}), ("movables",))
    actions = _actions(ctx, _get(ctx, data, root, "actions", list), ("actions",), robot.dim)
    planner = _planner(ctx, data.get("planner"), ("planner",))
    family = []
    for i, v in enumerate(_get(ctx, data, root, "family", list, [])):
        p = ("family", i)
        _check_keys(ctx, v, p, ("movables", "actions"))
        family.append(Variant(
            _movables(ctx, _get(ctx, v, p, "movables", dict, {}), p + ("movables",)) if "movables" in v else movables,
            _actions(ctx, _get(ctx, v, p, "actions", list), p + ("actions",), robot.dim),
        ))
    sc = ScenarioFile(name, bounds, robot, statics, movables, actions, planner, family,
                      str(_get(ctx, data, root, "description", str, "")), source)
    _validate(ctx, sc)
    return sc


def _movables(ctx: _Ctx, d: dict, path: tuple) -> dict:
    return {str(t): _shape(ctx, s, path + (t,)) for t, s in d.items()}


def _validate(ctx: _Ctx, sc: ScenarioFile) -> None:
    """Build every instance once so broken references and chains fail at load."""
    variants = [(None, ("actions",))] + [(i, ("family", i, "actions")) for i in range(len(sc.family))]
    for idx, apath in variants:
        try:
            scene = sc.build_scene(idx)
        except (SceneError, ValueError) as exc:
            ctx.fail(apath[:-1] + ("movables",) if idx is not None else ("statics",), str(exc))
        seq = sc.sequence(idx)
        try:
            check_sequence(scene, seq)
        except SequenceError as exc:
            i = _action_index(str(exc))
            ctx.fail(apath + ((i,) if i is not None else ()), str(exc))
        for i, act in enumerate(seq):
            try:
                scene.update_parametrization(act.moved, act.objects)
            except SceneError as exc:
                ctx.fail(apath + (i, "objects"), str(exc))
            for label, q in (("start", act.q_start), ("goal", act.q_goal)):
                lo, hi = sc.bounds[:, 0], sc.bounds[:, 1]
                if np.any(q < lo) or np.any(q > hi):
                    ctx.fail(apath + (i, label), f"action {i}: {label} lies outside the bounds")


def _action_index(msg: str) -> int | None:
    if msg.startswith("action "):
        head = msg.split(":", 1)[0].split()
        if len(head) == 2 and head[1].isdigit():
            return int(head[1])
    return None


def load_scenario(path) -> ScenarioFile:
    """Load a scenario by path, or by bundled name such as ``"wall_gap"``."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and p.name == str(path):
        ref = resources.files("mqplan.scenarios").joinpath(f"{path}.yaml")
        if ref.is_file():
            return parse_scenario(ref.read_text(), f"{path}.yaml")
    if not p.exists():
        raise ScenarioError("file not found", str(path))
    return parse_scenario(p.read_text(), str(p))


def bundled_scenarios() -> list[str]:
    return sorted(r.name[:-5] for r in resources.files("mqplan.scenarios").iterdir() if r.name.endswith(".yaml"))
