"""World model, object parametrizations and the decomposed validity check.

Bodies fall into three groups: robot, movable and static. A state check is
split into three parts that can be cached independently:

* ``rs``: robot-robot and robot-static pairs; depends on ``q`` only.
* ``os``: movable-static pairs; depends on ``q`` and the moved objects.
* ``ro``: robot-movable and movable-movable pairs; depends on ``q`` and
  the full parametrization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from mqplan import kernels
from mqplan.geometry import (
    KinematicModel,
    Pose2,
    Shape,
    bounding_radius,
    compose,
    compose_arrays,
    overlap,
    planar_core,
)
from mqplan.kernels import PART_OS, PART_RO, PART_RS

WORLD = "world"


class SceneError(ValueError):
    """Invalid scene construction or parametrization."""


class UnknownObjectError(SceneError, KeyError):
    pass


@dataclass(frozen=True)
class StaticBody:
    name: str
    shape: Shape
    pose: Pose2


@dataclass(frozen=True)
class ObjectState:
    """Parent frame (``"world"`` or a robot gripper frame id) and relative pose."""

    parent: str = WORLD
    transform: Pose2 = Pose2()


def _fmt_pose(p: Pose2) -> str:
    return f"{p.x.hex()},{p.y.hex()},{p.theta.hex()}"


@dataclass(frozen=True)
class Parametrization:
    """Object states for one action plus the set of moved objects.

    Keys are exact structural serializations: two parametrizations share
    ``key_full`` iff every object has the same parent and bitwise-equal
    transform.
    """

    objects: Mapping[str, ObjectState] = field(default_factory=dict)
    moved: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "objects", dict(self.objects))
        object.__setattr__(self, "moved", frozenset(self.moved))

    def _entry(self, tau: str) -> str:
        st = self.objects[tau]
        return f"{tau}@{st.parent}:{_fmt_pose(st.transform)}"

    @property
    def key_full(self) -> str:
        return "|".join(self._entry(t) for t in sorted(self.objects))

    @property
    def key_moved(self) -> str:
        moved = sorted(self.moved)
        return "M{" + ",".join(moved) + "}|" + "|".join(self._entry(t) for t in moved if t in self.objects)


class ValidityFlags(NamedTuple):
    coll_rs: bool = False
    coll_ro: bool = False
    coll_os: bool = False

    @property
    def valid(self) -> bool:
        return not (self.coll_rs or self.coll_ro or self.coll_os)

    @classmethod
    def from_bits(cls, bits: int) -> "ValidityFlags":
        return cls(bool(bits & PART_RS), bool(bits & PART_RO), bool(bits & PART_OS))


@dataclass
class CheckCounters:
    """Primitive state checks performed, per decomposition part."""

    rs: int = 0
    ro: int = 0
    os: int = 0

    def add(self, n: int, mask: int) -> None:
        if mask & PART_RS:
            self.rs += n
        if mask & PART_RO:
            self.ro += n
        if mask & PART_OS:
            self.os += n

    def snapshot(self) -> "CheckCounters":
        return CheckCounters(self.rs, self.ro, self.os)

    def __sub__(self, other: "CheckCounters") -> "CheckCounters":
        return CheckCounters(self.rs - other.rs, self.ro - other.ro, self.os - other.os)

    @property
    def total(self) -> int:
        return self.rs + self.ro + self.os


def part_mask(check_rs: bool, check_ro: bool, check_os: bool) -> int:
    return (PART_RS if check_rs else 0) | (PART_RO if check_ro else 0) | (PART_OS if check_os else 0)


class SceneModel:
    """Robot, static bodies and movable objects of one problem instance.

    Body layout inside the kernels is ``[robot..., movables..., statics...]``
    with movables in sorted id order.
    """

    def __init__(self, robot: KinematicModel, statics=(), movables: Mapping[str, Shape] | None = None):
        if not robot.planar:
            raise SceneError("scenes support planar robot models only")
        self.robot = robot
        self.statics = list(statics)
        self.movables = dict(movables or {})
        names = [s.name for s in self.statics]
        if len(set(names)) != len(names):
            raise SceneError("static body names must be unique")
        self.object_ids = sorted(self.movables)
        self._obj_index = {t: i for i, t in enumerate(self.object_ids)}
        self.n_robot = len(robot.bodies)
        self.n_mov = len(self.object_ids)
        self.n_static = len(self.statics)
        shapes = [b.shape for b in robot.bodies] + [self.movables[t] for t in self.object_ids]
        shapes += [s.shape for s in self.statics]
        self.body_ids = [b.id for b in robot.bodies] + list(self.object_ids) + [s.name for s in self.statics]
        self.body_shapes = shapes
        cores = [planar_core(s) for s in shapes]
        vmax = max(len(c) for c, _ in cores)
        self._verts = np.zeros((len(shapes), vmax, 2))
        for i, (c, _) in enumerate(cores):
            self._verts[i, : len(c)] = c
        self._nverts = np.array([len(c) for c, _ in cores], dtype=np.int32)
        self._radius = np.array([r for _, r in cores])
        self._bound = np.array([bounding_radius(s) for s in shapes])
        self._static_poses = np.array([s.pose.as_array() for s in self.statics]).reshape(-1, 3)
        self.counters = CheckCounters()
        self.param: Parametrization | None = None
        self._pairs = np.zeros((0, 2), dtype=np.int32)
        self._parts = np.zeros(0, dtype=np.int32)
        # parts with at least one body pair; only these cost primitive checks
        self._live = 0
        self._attached: list[tuple[int, int, np.ndarray]] = []
        self._world_obj = np.zeros((self.n_mov, 3))
        if not self.object_ids:
            self.update_parametrization(frozenset(), {})

    # -- bookkeeping ---------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.robot.dim

    def same_environment(self, other: "SceneModel") -> bool:
        """Same robot structure and static world (movables may differ)."""
        return (
            [(b.id, b.shape) for b in self.robot.bodies] == [(b.id, b.shape) for b in other.robot.bodies]
            and self.robot.dim == other.robot.dim
            and self.statics == other.statics
        )

    def exempt_pairs(self, param: Parametrization | None = None) -> set:
        """Body index pairs excluded from collision checking."""
        param = param or self.param
        out = set(self.robot.adjacent)
        for tau, st in (param.objects.items() if param else []):
            if st.parent != WORLD:
                out.add(frozenset((self.robot.frame_links[st.parent], self.n_robot + self._obj_index[tau])))
        return out

    # -- parametrization ------------------------------------------------------

    def update_parametrization(self, moved, objects: Mapping[str, ObjectState]) -> None:
        """Activate a parametrization; later checks use its poses and pair grouping."""
        moved = frozenset(moved)
        objects = dict(objects)
        for tau in list(objects) + list(moved):
            if tau not in self.movables:
                raise UnknownObjectError(f"unknown object id {tau!r}")
        missing = set(self.movables) - set(objects)
        if missing:
            raise SceneError(f"no state given for objects {sorted(missing)}")
        for tau, st in objects.items():
            if st.parent != WORLD and st.parent not in self.robot.frame_links:
                raise SceneError(f"object {tau!r}: robot exposes no frame {st.parent!r}")
            if st.parent != WORLD and tau not in moved:
                raise SceneError(f"object {tau!r} is attached to {st.parent!r} but not in the moved set")
        param = Parametrization(objects, moved)

        nr, nm = self.n_robot, self.n_mov
        attached = []
        world_obj = np.zeros((nm, 3))
        frame_index = {f: k for k, f in enumerate(self.robot.frames)}
        for tau in self.object_ids:
            st = objects[tau]
            i = self._obj_index[tau]
            if st.parent == WORLD:
                world_obj[i] = st.transform.as_array()
            else:
                attached.append((i, frame_index[st.parent], st.transform.as_array()))
        is_att = np.zeros(nm, dtype=bool)
        for i, _, _ in attached:
            is_att[i] = True

        # world-parented objects never move: verify their constant pairs once
        for a in range(nm):
            if is_att[a]:
                continue
            pa = Pose2(*world_obj[a])
            sa = self.body_shapes[nr + a]
            for s in self.statics:
                if overlap(sa, pa, s.shape, s.pose):
                    raise SceneError(f"object {self.object_ids[a]!r} rests in collision with static body {s.name!r}")
            for b in range(a + 1, nm):
                if not is_att[b] and overlap(sa, pa, self.body_shapes[nr + b], Pose2(*world_obj[b])):
                    raise SceneError(f"objects {self.object_ids[a]!r} and {self.object_ids[b]!r} rest in collision")

        exempt = self.exempt_pairs(param)
        pairs, parts = [], []
        first_static = nr + nm
        for i in range(nr):
            for j in range(i + 1, nr):
                if frozenset((i, j)) not in exempt:
                    pairs.append((i, j)), parts.append(PART_RS)
            for k in range(self.n_static):
                pairs.append((i, first_static + k)), parts.append(PART_RS)
        for i in range(nr):
            for a in range(nm):
                if frozenset((i, nr + a)) not in exempt:
                    pairs.append((i, nr + a)), parts.append(PART_RO)
        for a in range(nm):
            for b in range(a + 1, nm):
                if is_att[a] or is_att[b]:
                    pairs.append((nr + a, nr + b)), parts.append(PART_RO)
        for a in range(nm):
            if is_att[a]:
                for k in range(self.n_static):
                    pairs.append((nr + a, first_static + k)), parts.append(PART_OS)
        self._pairs = np.array(pairs, dtype=np.int32).reshape(-1, 2)
        self._parts = np.array(parts, dtype=np.int32)
        self._live = int(np.bitwise_or.reduce(self._parts)) if len(parts) else 0
        self._attached = attached
        self._world_obj = world_obj
        self.param = param

    # -- posing ---------------------------------------------------------------

    def body_poses(self, qs) -> np.ndarray:
        """World poses ``(S, n_bodies, 3)`` for a batch of configurations."""
        qs = np.asarray(qs, dtype=float)
        if qs.ndim == 1:
            qs = qs[None, :]
        if qs.shape[-1] != self.dim:
            raise SceneError(f"configuration dimension {qs.shape[-1]} does not match robot dimension {self.dim}")
        n = qs.shape[0]
        out = np.empty((n, len(self.body_ids), 3))
        nr, nm = self.n_robot, self.n_mov
        out[:, :nr] = self.robot.body_poses(qs)
        if nm:
            out[:, nr:nr + nm] = self._world_obj
            if self._attached:
                frames = self.robot.frame_poses(qs)
                for i, f, rel in self._attached:
                    out[:, nr + i] = compose_arrays(frames[:, f], rel)
        out[:, nr + nm:] = self._static_poses
        return out

    def set_configuration(self, q) -> dict:
        """Posed world for one configuration: body id -> world pose."""
        if self.param is None:
            raise SceneError("no active parametrization")
        poses = self.body_poses(q)[0]
        return {bid: Pose2(*poses[i]) for i, bid in enumerate(self.body_ids)}

    # -- checks ---------------------------------------------------------------

    def _require_param(self):
        if self.param is None:
            raise SceneError("no active parametrization")

    def is_valid(self, q, check_rs: bool = True, check_ro: bool = True, check_os: bool = True) -> ValidityFlags:
        """Decomposed collision check of one state; skipped parts report False."""
        self._require_param()
        mask = part_mask(check_rs, check_ro, check_os)
        self.counters.add(1, mask & self._live)
        if not mask:
            return ValidityFlags()
        bits = kernels.state_flags(self.body_poses(q), self._verts, self._nverts, self._radius, self._bound,
                                   self._pairs, self._parts, mask)
        return ValidityFlags.from_bits(int(bits[0]))

    def first_collision(self, qs, mask: int) -> tuple[int, ValidityFlags]:
        """Check states in order; stop at the first colliding one.

        Counts one primitive check per enabled part for every state examined,
        including the colliding state. Parts without any body pair under the
        active parametrization are free and not counted.
        """
        self._require_param()
        qs = np.asarray(qs, dtype=float).reshape(-1, self.dim)
        if not mask or len(qs) == 0:
            return -1, ValidityFlags()
        idx, bits = kernels.first_collision(self.body_poses(qs), self._verts, self._nverts, self._radius,
                                            self._bound, self._pairs, self._parts, mask)
        self.counters.add(len(qs) if idx < 0 else idx + 1, mask & self._live)
        return idx, ValidityFlags.from_bits(bits)

    def state_flags(self, qs, mask: int) -> np.ndarray:
        """Collision bits for each state (all states counted)."""
        self._require_param()
        qs = np.asarray(qs, dtype=float).reshape(-1, self.dim)
        self.counters.add(len(qs), mask & self._live)
        if not mask or len(qs) == 0:
            return np.zeros(len(qs), dtype=np.int32)
        return kernels.state_flags(self.body_poses(qs), self._verts, self._nverts, self._radius, self._bound,
                                   self._pairs, self._parts, mask)

    def monolithic_pairs(self) -> np.ndarray:
        """Every body pair a non-decomposed checker tests, under the active parametrization."""
        self._require_param()
        exempt = self.exempt_pairs()
        nb = len(self.body_ids)
        first_static = self.n_robot + self.n_mov
        out = [
            (i, j)
            for i in range(min(nb, first_static))
            for j in range(i + 1, nb)
            if frozenset((i, j)) not in exempt
        ]
        return np.array(out, dtype=np.int32).reshape(-1, 2)

    def monolithic_collides(self, qs) -> np.ndarray:
        """Uncached all-pairs collision per state (no decomposition, no counters)."""
        self._require_param()
        pairs = self.monolithic_pairs()
        parts = np.full(len(pairs), PART_RS, dtype=np.int32)
        qs = np.asarray(qs, dtype=float).reshape(-1, self.dim)
        return kernels.state_flags(self.body_poses(qs), self._verts, self._nverts, self._radius, self._bound,
                                   pairs, parts, PART_RS) != 0


def reference_collides(scene: SceneModel, q) -> bool:
    """All-pairs check through :func:`geometry.overlap`, one pair at a time.

    Independent of the kernels' batching and pair grouping; used as a test
    oracle.
    """
    posed = scene.set_configuration(q)
    exempt = scene.exempt_pairs()
    ids = scene.body_ids
    first_static = scene.n_robot + scene.n_mov
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            if i >= first_static and j >= first_static:
                continue
            if frozenset((i, j)) in exempt:
                continue
            if overlap(scene.body_shapes[i], posed[ids[i]], scene.body_shapes[j], posed[ids[j]]):
                return True
    return False


def attached_pose(scene: SceneModel, q, tau: str) -> Pose2:
    """World pose of an attached object via explicit composition (oracle helper)."""
    st = scene.param.objects[tau]
    frames = dict(scene.robot.forward_kinematics(q))
    return compose(frames[st.parent], st.transform)
