"""Edge validation with per-part validity caching, and the effort model.

Each edge carries a tri-state validity per decomposition part. The robot/
static part is shared by every query; the movable/static part is keyed by
the moved objects' parametrization and the robot/movable part by the full
parametrization. Effort is counted in primitive state checks.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from mqplan.kernels import PART_OS, PART_RO, PART_RS
from mqplan.scene import SceneModel


class Validity(IntEnum):
    UNKNOWN = 0
    VALID = 1
    INVALID = 2


UNKNOWN, VALID, INVALID = Validity.UNKNOWN, Validity.VALID, Validity.INVALID
UNUSABLE = math.inf


class MonotonicityError(RuntimeError):
    """A cached part was asked to flip between valid and invalid."""


def _transition(old: Validity, new: Validity) -> Validity:
    if old != UNKNOWN and old != new:
        raise MonotonicityError(f"validity may not change from {old.name} to {new.name}")
    return new


@dataclass(slots=True)
class EdgeRecord:
    """Cached validity of one undirected edge (smaller id first)."""

    a: int
    b: int
    rs: Validity = UNKNOWN
    os: dict = field(default_factory=dict)
    ro: dict = field(default_factory=dict)

    def parts(self, key_full: str, key_moved: str) -> tuple[Validity, Validity, Validity]:
        return self.rs, self.os.get(key_moved, UNKNOWN), self.ro.get(key_full, UNKNOWN)

    def set_rs(self, v: Validity) -> None:
        self.rs = _transition(self.rs, v)

    def set_os(self, key: str, v: Validity) -> None:
        self.os[key] = _transition(self.os.get(key, UNKNOWN), v)

    def set_ro(self, key: str, v: Validity) -> None:
        self.ro[key] = _transition(self.ro.get(key, UNKNOWN), v)


class ValidityCache:
    """All edge records of a session, keyed by ordered id pairs."""

    def __init__(self):
        self.records: dict[tuple[int, int], EdgeRecord] = {}

    def get(self, a: int, b: int) -> EdgeRecord | None:
        return self.records.get((a, b) if a < b else (b, a))

    def record(self, a: int, b: int) -> EdgeRecord:
        k = (a, b) if a < b else (b, a)
        rec = self.records.get(k)
        if rec is None:
            rec = self.records[k] = EdgeRecord(*k)
        return rec

    def drop_parametrized(self) -> None:
        """Forget movable-dependent validity; keep robot/static results."""
        for rec in self.records.values():
            rec.os.clear()
            rec.ro.clear()

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class EffortModel:
    resolution: float

    def __post_init__(self):
        if not self.resolution > 0.0:
            raise ValueError("resolution must be positive")

    def checks(self, dist: float) -> int:
        """Effort of one unknown part over a segment of length ``dist``."""
        return math.ceil(dist / self.resolution)


def part_effort(dist: float, validity: Validity, model: EffortModel) -> float:
    """Remaining effort of one part: full count if unknown, 0 if valid."""
    if validity == VALID:
        return 0
    if validity == INVALID:
        return UNUSABLE
    return model.checks(dist)


def edge_effort(qa, qb, record: EdgeRecord | None, key_full: str, key_moved: str, model: EffortModel) -> float:
    """Sum of the three part efforts under the active keys, or ``UNUSABLE``."""
    dist = float(np.linalg.norm(np.asarray(qb, dtype=float) - np.asarray(qa, dtype=float)))
    return edge_effort_dist(dist, record, key_full, key_moved, model)


def edge_effort_dist(dist: float, record: EdgeRecord | None, key_full: str, key_moved: str,
                     model: EffortModel) -> float:
    if record is None:
        return 3 * model.checks(dist)
    rs, os_, ro = record.parts(key_full, key_moved)
    if rs == INVALID or os_ == INVALID or ro == INVALID:
        return UNUSABLE
    unknown = (rs == UNKNOWN) + (os_ == UNKNOWN) + (ro == UNKNOWN)
    return unknown * model.checks(dist) if unknown else 0


@dataclass
class ReuseLedger:
    """Reusable effort invested so far and the share already claimed by the current search."""

    e_reusable: float = 0.0
    e_claimed: float = 0.0

    @property
    def remaining(self) -> float:
        return self.e_reusable - self.e_claimed

    def invest(self, amount: float) -> None:
        if amount < 0:
            raise ValueError("invested effort must be nonnegative")
        self.e_reusable += amount

    def claim(self, amount: float) -> None:
        self.e_claimed = min(self.e_claimed + max(amount, 0.0), self.e_reusable)

    def reset_claims(self) -> None:
        self.e_claimed = 0.0


def effort_to_go(q, q_goal, ledger: ReuseLedger, model: EffortModel, record: EdgeRecord | None = None,
                 key_full: str = "", key_moved: str = "") -> float:
    """Optimistic remaining effort: direct-edge effort minus unclaimed reusable effort, floored at 0."""
    e = edge_effort(q, q_goal, record, key_full, key_moved, model)
    return max(e - ledger.remaining, 0.0)


def bisection_order(n: int) -> list[int]:
    """Indices ``0..n-1`` in breadth-first midpoint order."""
    out = []
    pending = deque([(0, n - 1)])
    while pending:
        lo, hi = pending.popleft()
        if lo > hi:
            continue
        mid = (lo + hi) // 2
        out.append(mid)
        pending.append((lo, mid - 1))
        pending.append((mid + 1, hi))
    return out


def interior_count(dist: float, resolution: float) -> int:
    return max(math.ceil(dist / resolution) - 1, 0)


def interpolation_sequence(qa, qb, resolution: float, order: str = "bisection") -> np.ndarray:
    """Interior states of the segment ``qa -> qb`` at the given resolution.

    ``n = ceil(|qb - qa| / resolution) - 1`` states at fractions ``k / (n + 1)``;
    endpoints are excluded.
    """
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    n = interior_count(float(np.linalg.norm(qb - qa)), resolution)
    if n == 0:
        return np.zeros((0, qa.shape[0]))
    idx = np.arange(1, n + 1) if order == "sequential" else np.array(bisection_order(n)) + 1
    frac = idx / (n + 1)
    return qa + frac[:, None] * (qb - qa)


@dataclass
class PathCandidate:
    """Vertex ids and configurations of a piecewise-linear path."""

    ids: list
    configs: np.ndarray

    def __post_init__(self):
        self.configs = np.asarray(self.configs, dtype=float)
        if len(self.ids) != len(self.configs):
            raise ValueError("one configuration per vertex required")
        for a, b in zip(self.ids, self.ids[1:]):
            if a == b:
                raise ValueError("consecutive vertices must differ")

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.ids, self.ids[1:]))

    @property
    def cost(self) -> float:
        if len(self.configs) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.configs, axis=0), axis=1)))

    def __call__(self, s: float) -> np.ndarray:
        """Point at arc-length fraction ``s`` in [0, 1]."""
        if len(self.configs) == 1:
            return self.configs[0].copy()
        seg = np.linalg.norm(np.diff(self.configs, axis=0), axis=1)
        total = float(seg.sum())
        target = min(max(s, 0.0), 1.0) * total
        acc = np.concatenate([[0.0], np.cumsum(seg)])
        k = int(np.clip(np.searchsorted(acc, target, side="right") - 1, 0, len(seg) - 1))
        t = 0.0 if seg[k] == 0.0 else (target - acc[k]) / seg[k]
        return self.configs[k] + t * (self.configs[k + 1] - self.configs[k])


@dataclass
class ValidationConfig:
    resolution: float
    order: str = "bisection"
    # also count re-validated movable/static effort as reusable
    reuse_os_effort: bool = False


def validate_edge(qa, qb, rec: EdgeRecord, scene: SceneModel, cfg: ValidationConfig, ledger: ReuseLedger | None,
                  key_full: str, key_moved: str) -> bool:
    """Check one edge, consulting and updating its cached part validity."""
    rs, os_, ro = rec.parts(key_full, key_moved)
    if rs == INVALID or os_ == INVALID or ro == INVALID:
        return False
    mask = (PART_RS if rs == UNKNOWN else 0) | (PART_RO if ro == UNKNOWN else 0) | (PART_OS if os_ == UNKNOWN else 0)
    if not mask:
        return True
    states = interpolation_sequence(qa, qb, cfg.resolution, cfg.order)
    idx, flags = scene.first_collision(states, mask)
    if idx >= 0:
        if flags.coll_rs:
            rec.set_rs(INVALID)
        if flags.coll_os:
            rec.set_os(key_moved, INVALID)
        if flags.coll_ro:
            rec.set_ro(key_full, INVALID)
        return False
    checks = math.ceil(float(np.linalg.norm(np.asarray(qb) - np.asarray(qa))) / cfg.resolution)
    if rs == UNKNOWN:
        rec.set_rs(VALID)
        if ledger is not None:
            ledger.invest(checks)
    if os_ == UNKNOWN:
        rec.set_os(key_moved, VALID)
        if ledger is not None and cfg.reuse_os_effort:
            ledger.invest(checks)
    if ro == UNKNOWN:
        rec.set_ro(key_full, VALID)
    return True


def validate(path: PathCandidate, scene: SceneModel, cache: ValidityCache, cfg: ValidationConfig,
             ledger: ReuseLedger | None = None) -> bool:
    """Densely validate a path edge by edge; stop at the first collision.

    Parts already cached valid are skipped; a colliding part is marked
    invalid under its key, and parts are only marked valid after the whole
    edge was checked.
    """
    param = scene.param
    key_full, key_moved = param.key_full, param.key_moved
    for (a, b), qa, qb in zip(path.edges, path.configs[:-1], path.configs[1:]):
        rec = cache.record(a, b)
        if not validate_edge(qa, qb, rec, scene, cfg, ledger, key_full, key_moved):
            return False
    return True


def monolithic_path_valid(path_configs, scene: SceneModel, resolution: float, factor: int = 1) -> bool:
    """Uncached, non-decomposed check of vertices and interior states.

    ``factor > 1`` refines the resolution by that factor.
    """
    configs = np.asarray(path_configs, dtype=float)
    if np.any(scene.monolithic_collides(configs)):
        return False
    for qa, qb in zip(configs[:-1], configs[1:]):
        states = interpolation_sequence(qa, qb, resolution / factor, "sequential")
        if len(states) and np.any(scene.monolithic_collides(states)):
            return False
    return True
