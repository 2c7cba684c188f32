"""Rigid-body geometry: poses, shapes, overlap tests and forward kinematics.

Planar shapes are reduced to a convex core (point, segment or polygon)
dilated by a radius; that single representation feeds the collision
kernels. Spatial (3D) support covers spheres, boxes and capsule/sphere
pairs and is available at this level only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from mqplan import kernels

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Fold an angle into (-pi, pi]."""
    t = math.remainder(theta, TWO_PI)
    if t <= -math.pi:
        t += TWO_PI
    return t


# ---------------------------------------------------------------------------
# Poses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pose2:
    """Planar rigid transform: rotation by ``theta`` then translation."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def translation(self) -> tuple[float, float]:
        return (self.x, self.y)

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]])

    def apply(self, points) -> np.ndarray:
        """Map local points (n, 2) into the parent frame."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        c, s = math.cos(self.theta), math.sin(self.theta)
        out = np.empty_like(pts)
        out[:, 0] = self.x + c * pts[:, 0] - s * pts[:, 1]
        out[:, 1] = self.y + s * pts[:, 0] + c * pts[:, 1]
        return out

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    def __matmul__(self, other: "Pose2") -> "Pose2":
        return compose(self, other)


def _quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def _quat_rotate(q, v):
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 * cross(q.xyz, v); v' = v + w t + cross(q.xyz, t)
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


@dataclass(frozen=True)
class Pose3:
    """Spatial rigid transform with a unit quaternion ``(w, x, y, z)``."""

    translation: tuple = (0.0, 0.0, 0.0)
    rotation: tuple = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        t = tuple(float(v) for v in self.translation)
        q = tuple(float(v) for v in self.rotation)
        if len(t) != 3 or len(q) != 4:
            raise ValueError("Pose3 needs a 3-vector and a quaternion")
        n = math.sqrt(sum(v * v for v in q))
        if n == 0.0:
            raise ValueError("zero quaternion")
        q = tuple(v / n for v in q)
        if q[0] < 0.0:
            q = tuple(-v for v in q)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", q)

    @staticmethod
    def from_axis_angle(axis, angle: float, translation=(0.0, 0.0, 0.0)) -> "Pose3":
        ax = np.asarray(axis, dtype=float)
        ax = ax / np.linalg.norm(ax)
        h = 0.5 * angle
        return Pose3(translation, (math.cos(h), *(math.sin(h) * ax)))

    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.rotation
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return pts @ self.rotation_matrix().T + np.asarray(self.translation)

    def __matmul__(self, other: "Pose3") -> "Pose3":
        return compose(self, other)


Pose = Union[Pose2, Pose3]


def identity(dim: int = 2) -> Pose:
    return Pose2() if dim == 2 else Pose3()


def translate(*v: float) -> Pose:
    if len(v) == 2:
        return Pose2(v[0], v[1], 0.0)
    if len(v) == 3:
        return Pose3(v)
    raise ValueError("translate takes 2 or 3 components")


def rot(theta: float) -> Pose2:
    return Pose2(0.0, 0.0, theta)


def compose(a: Pose, b: Pose) -> Pose:
    """Rigid composition ``a ∘ b`` (apply ``b`` in the frame of ``a``)."""
    if isinstance(a, Pose2) and isinstance(b, Pose2):
        c, s = math.cos(a.theta), math.sin(a.theta)
        return Pose2(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta)
    if isinstance(a, Pose3) and isinstance(b, Pose3):
        t = _quat_rotate(a.rotation, b.translation)
        return Pose3(
            (a.translation[0] + t[0], a.translation[1] + t[1], a.translation[2] + t[2]),
            _quat_mul(a.rotation, b.rotation),
        )
    raise TypeError("cannot compose poses of different dimension")


def inverse(p: Pose) -> Pose:
    if isinstance(p, Pose2):
        c, s = math.cos(p.theta), math.sin(p.theta)
        return Pose2(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.theta)
    w, x, y, z = p.rotation
    qi = (w, -x, -y, -z)
    t = _quat_rotate(qi, p.translation)
    return Pose3((-t[0], -t[1], -t[2]), qi)


def compose_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised planar composition over trailing ``(x, y, theta)`` axes."""
    c = np.cos(a[..., 2])
    s = np.sin(a[..., 2])
    out = np.empty(np.broadcast(a, b).shape)
    out[..., 0] = a[..., 0] + c * b[..., 0] - s * b[..., 1]
    out[..., 1] = a[..., 1] + s * b[..., 0] + c * b[..., 1]
    out[..., 2] = a[..., 2] + b[..., 2]
    return out


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------


def _positive(name, *values):
    for v in values:
        if not (v > 0.0) or not math.isfinite(v):
            raise ValueError(f"{name}: metric fields must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class Disc:
    radius: float

    def __post_init__(self):
        _positive("Disc", self.radius)


@dataclass(frozen=True)
class Sphere:
    radius: float

    def __post_init__(self):
        _positive("Sphere", self.radius)


@dataclass(frozen=True)
class Box:
    """Box given by half extents (2 or 3 values), oriented by its pose.

    An axis-aligned box is the special case of a pose with zero rotation.
    """

    half_extents: tuple

    def __post_init__(self):
        h = tuple(float(v) for v in self.half_extents)
        if len(h) not in (2, 3):
            raise ValueError("Box needs 2 or 3 half extents")
        _positive("Box", *h)
        object.__setattr__(self, "half_extents", h)


@dataclass(frozen=True)
class Capsule:
    """Segment of length ``2 * half_length`` along local x, dilated by ``radius``."""

    radius: float
    half_length: float

    def __post_init__(self):
        _positive("Capsule", self.radius, self.half_length)


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: tuple

    def __post_init__(self):
        v = tuple((float(p[0]), float(p[1])) for p in self.vertices)
        if len(v) < 3:
            raise ValueError("ConvexPolygon needs at least 3 vertices")
        n = len(v)
        for i in range(n):
            a, b, c = v[i], v[(i + 1) % n], v[(i + 2) % n]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if not cross > 0.0:
                raise ValueError("ConvexPolygon vertices must be strictly convex and counter-clockwise")
        object.__setattr__(self, "vertices", v)


Shape = Union[Disc, Sphere, Box, Capsule, ConvexPolygon]


def planar_core(shape: Shape) -> tuple[np.ndarray, float]:
    """Core vertices (local frame, CCW) and dilation radius of a planar shape."""
    if isinstance(shape, Disc):
        return np.zeros((1, 2)), shape.radius
    if isinstance(shape, Capsule):
        h = shape.half_length
        return np.array([[-h, 0.0], [h, 0.0]]), shape.radius
    if isinstance(shape, Box):
        if len(shape.half_extents) != 2:
            raise ValueError("planar box needs 2 half extents")
        hx, hy = shape.half_extents
        return np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]]), 0.0
    if isinstance(shape, ConvexPolygon):
        return np.array(shape.vertices), 0.0
    raise ValueError(f"{type(shape).__name__} is not a planar shape")


def bounding_radius(shape: Shape) -> float:
    """Radius of a disc about the shape origin that contains the shape."""
    if isinstance(shape, Sphere):
        return shape.radius
    if isinstance(shape, Box) and len(shape.half_extents) == 3:
        return math.sqrt(sum(h * h for h in shape.half_extents))
    core, r = planar_core(shape)
    return float(np.max(np.hypot(core[:, 0], core[:, 1]))) + r


def _point_segment_d2(p, a, b) -> float:
    d = b - a
    ll = float(d @ d)
    t = 0.0 if ll == 0.0 else min(max(float((p - a) @ d) / ll, 0.0), 1.0)
    c = a + t * d - p
    return float(c @ c)


def contains_point(shape: Shape, pose: Pose, point) -> bool:
    """Closed point-membership test (used by sampling oracles)."""
    local = inverse(pose).apply(np.asarray(point, dtype=float))[0]
    if isinstance(pose, Pose2):
        core, r = planar_core(shape)
        n = len(core)
        if n >= 3:
            edges = [(core[i], core[(i + 1) % n]) for i in range(n)]
            if all((b[0] - a[0]) * (local[1] - a[1]) - (b[1] - a[1]) * (local[0] - a[0]) >= 0.0 for a, b in edges):
                return True
        else:
            edges = [(core[0], core[-1])]
        return min(_point_segment_d2(local, a, b) for a, b in edges) <= r * r
    if isinstance(shape, Sphere):
        return float(local @ local) <= shape.radius**2
    if isinstance(shape, Box):
        return bool(np.all(np.abs(local) <= np.asarray(shape.half_extents)))
    if isinstance(shape, Capsule):
        x = min(max(local[0], -shape.half_length), shape.half_length)
        return (local[0] - x) ** 2 + local[1] ** 2 + local[2] ** 2 <= shape.radius**2
    raise ValueError(f"unsupported spatial shape {type(shape).__name__}")


# ---------------------------------------------------------------------------
# Overlap
# ---------------------------------------------------------------------------


def overlap(sa: Shape, pa: Pose, sb: Shape, pb: Pose) -> bool:
    """True iff the posed shapes intersect; touching counts as intersecting."""
    if isinstance(pa, Pose2) and isinstance(pb, Pose2):
        ca, ra = planar_core(sa)
        cb, rb = planar_core(sb)
        return bool(kernels.rounded_overlap(pa.apply(ca), ra, pb.apply(cb), rb))
    if isinstance(pa, Pose3) and isinstance(pb, Pose3):
        return _overlap3(sa, pa, sb, pb)
    raise TypeError("poses must both be planar or both spatial")


def _seg3(shape: Capsule, pose: Pose3):
    ends = pose.apply([[-shape.half_length, 0.0, 0.0], [shape.half_length, 0.0, 0.0]])
    return ends[0], ends[1]


def _segment_segment_d2(p1, q1, p2, q2) -> float:
    # closest points between two segments, clamped closed form
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a <= 0.0 and e <= 0.0:
        return float(r @ r)
    if a <= 0.0:
        s, t = 0.0, min(max(f / e, 0.0), 1.0)
    else:
        c = float(d1 @ r)
        if e <= 0.0:
            t, s = 0.0, min(max(-c / a, 0.0), 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > 0.0 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t, s = 1.0, min(max((b - c) / a, 0.0), 1.0)
    diff = (p1 + d1 * s) - (p2 + d2 * t)
    return float(diff @ diff)


def _box_point_d2(shape: Box, pose: Pose3, point) -> float:
    local = inverse(pose).apply(point)[0]
    h = np.asarray(shape.half_extents)
    excess = np.maximum(np.abs(local) - h, 0.0)
    return float(excess @ excess)


def _box_box(sa: Box, pa: Pose3, sb: Box, pb: Pose3) -> bool:
    ra_m = pa.rotation_matrix()
    rb_m = pb.rotation_matrix()
    ha = np.asarray(sa.half_extents)
    hb = np.asarray(sb.half_extents)
    t = np.asarray(pb.translation) - np.asarray(pa.translation)
    axes = [ra_m[:, i] for i in range(3)] + [rb_m[:, i] for i in range(3)]
    for i in range(3):
        for j in range(3):
            c = np.cross(ra_m[:, i], rb_m[:, j])
            if float(c @ c) > 1e-18:
                axes.append(c)
    for ax in axes:
        proj_a = float(np.sum(ha * np.abs(ra_m.T @ ax)))
        proj_b = float(np.sum(hb * np.abs(rb_m.T @ ax)))
        if abs(float(t @ ax)) > proj_a + proj_b:
            return False
    return True


def _overlap3(sa, pa: Pose3, sb, pb: Pose3) -> bool:
    kinds = (type(sa).__name__, type(sb).__name__)
    if isinstance(sa, Box) and len(sa.half_extents) != 3 or isinstance(sb, Box) and len(sb.half_extents) != 3:
        raise ValueError("spatial box needs 3 half extents")
    if isinstance(sb, Sphere) and not isinstance(sa, Sphere):
        return _overlap3(sb, pb, sa, pa)
    if isinstance(sa, Sphere):
        ca = np.asarray(pa.translation)
        if isinstance(sb, Sphere):
            d = ca - np.asarray(pb.translation)
            return float(d @ d) <= (sa.radius + sb.radius) ** 2
        if isinstance(sb, Box):
            return _box_point_d2(sb, pb, ca) <= sa.radius**2
        if isinstance(sb, Capsule):
            p, q = _seg3(sb, pb)
            return _segment_segment_d2(ca, ca, p, q) <= (sa.radius + sb.radius) ** 2
    if isinstance(sa, Box) and isinstance(sb, Box):
        return _box_box(sa, pa, sb, pb)
    if isinstance(sa, Capsule) and isinstance(sb, Capsule):
        p1, q1 = _seg3(sa, pa)
        p2, q2 = _seg3(sb, pb)
        return _segment_segment_d2(p1, q1, p2, q2) <= (sa.radius + sb.radius) ** 2
    raise NotImplementedError(f"spatial overlap not supported for {kinds[0]}/{kinds[1]}")


# ---------------------------------------------------------------------------
# Kinematic models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RobotBody:
    """One rigid robot body: id, shape, and the local offset from its frame."""

    id: str
    shape: Shape


class KinematicModel:
    """Common interface for robot models.

    ``body_poses`` / ``frame_poses`` are the vectorised planar entry points
    used by the scene; ``forward_kinematics`` is the readable per-state form.
    """

    dim: int
    bodies: list
    frames: list  # gripper frame ids
    frame_links: dict  # frame id -> index into bodies of the attaching body
    adjacent: set  # frozenset({i, j}) of exempt body index pairs
    planar: bool = True

    def _check(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape[-1] != self.dim:
            raise ValueError(f"configuration dimension {q.shape[-1]} does not match model dimension {self.dim}")
        return q

    def forward_kinematics(self, q) -> list:
        q = self._check(q)
        if q.ndim != 1:
            raise ValueError("forward_kinematics expects a single configuration")
        bp = self.body_poses(q[None, :])[0]
        fp = self.frame_poses(q[None, :])[0]
        out = [(b.id, Pose2(*bp[i])) for i, b in enumerate(self.bodies)]
        out += [(f, Pose2(*fp[i])) for i, f in enumerate(self.frames)]
        return out

    def body_poses(self, qs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def frame_poses(self, qs: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FreeFlyer(KinematicModel):
    """Single rigid body whose configuration is its pose.

    ``mode`` is ``"xy"`` (translation only), ``"xyt"`` (planar pose) or
    ``"xyz"`` (spatial translation; forward kinematics only).
    """

    def __init__(self, shape: Shape, mode: str = "xy", name: str = "robot"):
        if mode not in ("xy", "xyt", "xyz"):
            raise ValueError(f"unknown free-flyer mode {mode!r}")
        self.shape = shape
        self.mode = mode
        self.name = name
        self.dim = {"xy": 2, "xyt": 3, "xyz": 3}[mode]
        self.planar = mode != "xyz"
        self.bodies = [RobotBody(f"{name}/body", shape)]
        self.frames = [f"{name}/gripper"]
        self.frame_links = {f"{name}/gripper": 0}
        self.adjacent = set()

    def forward_kinematics(self, q) -> list:
        if self.mode == "xyz":
            q = self._check(q)
            p = Pose3(tuple(q))
            return [(self.bodies[0].id, p), (self.frames[0], p)]
        return super().forward_kinematics(q)

    def body_poses(self, qs):
        qs = self._check(qs)
        if not self.planar:
            raise ValueError("spatial free-flyer has no planar body poses")
        out = np.zeros(qs.shape[:-1] + (1, 3))
        out[..., 0, 0] = qs[..., 0]
        out[..., 0, 1] = qs[..., 1]
        if self.mode == "xyt":
            out[..., 0, 2] = qs[..., 2]
        return out

    def frame_poses(self, qs):
        return self.body_poses(qs)


class PlanarChain(KinematicModel):
    """Serial chain of revolute joints in the plane.

    Link ``i`` rotates by ``q[i]`` relative to link ``i-1``; its body frame sits
    at the link midpoint, pointing along the link. The gripper frame is the
    tip of the last link.
    """

    def __init__(self, link_lengths: Sequence[float], base: Pose2 = Pose2(), link_radius: float = 0.02,
                 link_shapes: Sequence[Shape] | None = None, name: str = "arm", gripper: bool = True):
        lengths = [float(v) for v in link_lengths]
        if not lengths:
            raise ValueError("chain needs at least one link")
        _positive("PlanarChain link length", *lengths)
        self.link_lengths = lengths
        self.base = base
        self.name = name
        self.dim = len(lengths)
        if link_shapes is None:
            link_shapes = [Capsule(link_radius, 0.5 * L) for L in lengths]
        if len(link_shapes) != len(lengths):
            raise ValueError("one shape per link required")
        self.bodies = [RobotBody(f"{name}/link{i}", s) for i, s in enumerate(link_shapes)]
        self.frames = [f"{name}/gripper"] if gripper else []
        self.frame_links = {f"{name}/gripper": len(lengths) - 1} if gripper else {}
        self.adjacent = {frozenset((i, i + 1)) for i in range(len(lengths) - 1)}

    def _joints(self, qs):
        qs = self._check(qs)
        angles = self.base.theta + np.cumsum(qs, axis=-1)
        c, s = np.cos(angles), np.sin(angles)
        L = np.asarray(self.link_lengths)
        # joint positions: base, then cumulative link vectors
        dx = np.cumsum(c * L, axis=-1)
        dy = np.cumsum(s * L, axis=-1)
        zeros = np.zeros(qs.shape[:-1] + (1,))
        jx = self.base.x + np.concatenate([zeros, dx], axis=-1)
        jy = self.base.y + np.concatenate([zeros, dy], axis=-1)
        return angles, c, s, jx, jy

    def body_poses(self, qs):
        angles, c, s, jx, jy = self._joints(qs)
        L = np.asarray(self.link_lengths)
        out = np.empty(angles.shape + (3,))
        out[..., 0] = jx[..., :-1] + 0.5 * L * c
        out[..., 1] = jy[..., :-1] + 0.5 * L * s
        out[..., 2] = angles
        return out

    def frame_poses(self, qs):
        angles, c, s, jx, jy = self._joints(qs)
        if not self.frames:
            return np.zeros(angles.shape[:-1] + (0, 3))
        out = np.empty(angles.shape[:-1] + (1, 3))
        out[..., 0, 0] = jx[..., -1]
        out[..., 0, 1] = jy[..., -1]
        out[..., 0, 2] = angles[..., -1]
        return out


@dataclass
class Composite(KinematicModel):
    """Several models moved together; the configuration is their concatenation."""

    models: list = field(default_factory=list)

    def __post_init__(self):
        if not self.models:
            raise ValueError("composite needs at least one model")
        ids = [b.id for m in self.models for b in m.bodies]
        if len(set(ids)) != len(ids):
            raise ValueError("composite members must have distinct names")
        self.dim = sum(m.dim for m in self.models)
        self.planar = all(m.planar for m in self.models)
        self.bodies = [b for m in self.models for b in m.bodies]
        self.frames = [f for m in self.models for f in m.frames]
        self.frame_links = {}
        self.adjacent = set()
        offset = 0
        for m in self.models:
            for f, i in m.frame_links.items():
                self.frame_links[f] = i + offset
            for pair in m.adjacent:
                self.adjacent.add(frozenset(i + offset for i in pair))
            offset += len(m.bodies)

    def _split(self, qs):
        qs = self._check(qs)
        out, k = [], 0
        for m in self.models:
            out.append(qs[..., k:k + m.dim])
            k += m.dim
        return out

    def body_poses(self, qs):
        return np.concatenate([m.body_poses(p) for m, p in zip(self.models, self._split(qs))], axis=-2)

    def frame_poses(self, qs):
        return np.concatenate([m.frame_poses(p) for m, p in zip(self.models, self._split(qs))], axis=-2)


def forward_kinematics(model: KinematicModel, q) -> list:
    """World poses of every robot body and gripper frame, as ``(id, pose)``."""
    return model.forward_kinematics(q)
