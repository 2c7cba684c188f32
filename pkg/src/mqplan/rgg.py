"""Persistent sample buffer and the per-query edge-implicit roadmap.

Samples live in a session-wide :class:`SampleStore` under stable ids. The
:class:`SampleBuffer` keeps the order in which robot/static-valid samples
were drawn; every query rewinds a cursor over it and re-activates samples
batch by batch into a fresh :class:`RoadmapGraph`.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from mqplan.kernels import PART_OS, PART_RO, PART_RS
from mqplan.scene import SceneModel

ETA = 1.001


class SampleStore:
    """Configurations for every sample id handed out in a session."""

    def __init__(self, dim: int):
        self.dim = dim
        self._arr = np.zeros((64, dim))
        self._n = 0
        self.tuples: list[tuple] = []
        self._by_bytes: dict[bytes, int] = {}

    def __len__(self) -> int:
        return self._n

    def _append(self, q: np.ndarray) -> int:
        if self._n == len(self._arr):
            self._arr = np.concatenate([self._arr, np.zeros_like(self._arr)])
        i = self._n
        self._arr[i] = q
        self._n += 1
        self.tuples.append(tuple(float(v) for v in q))
        return i

    def add(self, q) -> int:
        """New id for a sampled configuration."""
        q = np.asarray(q, dtype=float).reshape(self.dim)
        i = self._append(q)
        self._by_bytes.setdefault(q.tobytes(), i)
        return i

    def endpoint(self, q) -> int:
        """Id for a query start/goal; bitwise-equal configurations share an id."""
        q = np.asarray(q, dtype=float).reshape(self.dim)
        key = q.tobytes()
        i = self._by_bytes.get(key)
        if i is None:
            i = self._append(q)
            self._by_bytes[key] = i
        return i

    def config(self, i: int) -> np.ndarray:
        if not 0 <= i < self._n:
            raise KeyError(f"unknown sample id {i}")
        return self._arr[i].copy()

    def configs(self, ids) -> np.ndarray:
        return self._arr[np.asarray(ids, dtype=np.int64)]


class SampleBuffer:
    """Ordered, append-only list of sample ids that passed the robot/static check."""

    def __init__(self):
        self.ids: list[int] = []

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i: int) -> int:
        return self.ids[i]

    def append(self, sid: int) -> None:
        self.ids.append(sid)


def sample_uniform(rng: np.random.Generator, bounds, n: int | None = None) -> np.ndarray:
    """Uniform samples in the box ``bounds`` (shape ``(dim, 2)``)."""
    b = np.asarray(bounds, dtype=float)
    lo, hi = b[:, 0], b[:, 1]
    shape = (b.shape[0],) if n is None else (n, b.shape[0])
    return lo + rng.random(shape) * (hi - lo)


def connection_k(n: int, dim: int, eta: float = ETA) -> int:
    """Neighbour count of the k-nearest roadmap for ``n`` active samples."""
    if n < 2:
        return 0
    return min(math.ceil(eta * math.e * (1.0 + 1.0 / dim) * math.log(n)), n - 1)


class RefineResult(NamedTuple):
    ids: list
    truncated: bool


class RoadmapGraph:
    """Active samples of one query, connected by the symmetric k-nearest rule.

    The start-goal pair is always connected. Vertices are addressed by local
    index internally; ``ids[i]`` is the session-wide sample id.
    """

    def __init__(self, store: SampleStore, start_id: int, goal_id: int, eta: float = ETA):
        self.store = store
        self.eta = eta
        self.start_id = start_id
        self.goal_id = goal_id
        self.start = np.asarray(store.config(start_id))
        self.goal = np.asarray(store.config(goal_id))
        self.ids: list[int] = []
        self.local: dict[int, int] = {}
        self.pos: list[tuple] = []
        self.adj: list[list[int]] = []
        self.adj_len: list[list[float]] = []
        self.cursor = 0
        self._add([start_id, goal_id] if start_id != goal_id else [start_id])
        self._connect()

    # -- structure -------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def start_local(self) -> int:
        return self.local[self.start_id]

    @property
    def goal_local(self) -> int:
        return self.local[self.goal_id]

    def _add(self, ids) -> None:
        for sid in ids:
            if sid in self.local:
                continue
            self.local[sid] = len(self.ids)
            self.ids.append(sid)
            self.pos.append(self.store.tuples[sid])

    def add_samples(self, ids) -> None:
        self._add(ids)
        self._connect()

    def _connect(self) -> None:
        n = len(self.ids)
        dim = self.store.dim
        pts = np.asarray(self.pos, dtype=float).reshape(n, dim)
        k = connection_k(n, dim, self.eta)
        rows = []
        cols = []
        if k > 0:
            _, nn = cKDTree(pts).query(pts, k=k + 1)
            nn = np.asarray(nn).reshape(n, k + 1)
            r = np.repeat(np.arange(n), k + 1)
            c = nn.ravel()
            keep = r != c
            rows.append(r[keep])
            cols.append(c[keep])
        if n >= 2:
            s, g = self.local[self.start_id], self.local[self.goal_id]
            rows.append(np.array([s]))
            cols.append(np.array([g]))
        adj: list[list[int]] = [[] for _ in range(n)]
        adj_len: list[list[float]] = [[] for _ in range(n)]
        if rows:
            r = np.concatenate(rows)
            c = np.concatenate(cols)
            both_r = np.concatenate([r, c])
            both_c = np.concatenate([c, r])
            code = np.unique(both_r.astype(np.int64) * n + both_c)
            src = code // n
            dst = code % n
            lengths = np.sqrt(np.sum((pts[src] - pts[dst]) ** 2, axis=1)).tolist()
            for a, b, d in zip(src.tolist(), dst.tolist(), lengths):
                adj[a].append(b)
                adj_len[a].append(d)
        self.adj = adj
        self.adj_len = adj_len
        self._pts = pts

    def distances_to(self, v: int) -> list[float]:
        """Euclidean distance of every local vertex to local vertex ``v``."""
        return np.sqrt(np.sum((self._pts - self._pts[v]) ** 2, axis=1)).tolist()

    def neighbors(self, sid: int) -> list[int]:
        """Neighbour sample ids of an active sample."""
        if sid not in self.local:
            raise KeyError(f"sample {sid} is not active in the graph")
        return [self.ids[j] for j in self.adj[self.local[sid]]]

    def edge_count(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    # -- heuristics --------------------------------------------------------------

    def f_values(self, qs: np.ndarray) -> np.ndarray:
        """Admissible path-cost estimate through each configuration."""
        return np.linalg.norm(qs - self.start, axis=-1) + np.linalg.norm(qs - self.goal, axis=-1)

    def f(self, q) -> float:
        return float(self.f_values(np.asarray(q, dtype=float)[None, :])[0])

    def rewind(self) -> None:
        """Reset to the start/goal pair and the beginning of the buffer."""
        s, g = self.start_id, self.goal_id
        self.ids, self.local, self.pos, self.adj, self.adj_len = [], {}, [], [], []
        self._add([s, g] if s != g else [s])
        self._connect()
        self.cursor = 0


def refine_approximation(graph: RoadmapGraph, buffer: SampleBuffer, scene: SceneModel, rng: np.random.Generator,
                         bounds, m: int, c_best: float, cap_factor: int = 100) -> RefineResult:
    """Activate up to ``m`` buffered samples that may improve on ``c_best``.

    Walks the buffer from the graph's cursor. Past its end, fresh uniform
    samples are drawn and kept if the robot/static check passes. A buffered
    sample is activated if its cost estimate beats ``c_best`` and the
    movable-dependent checks pass under the active parametrization. At most
    ``cap_factor * m`` samples are examined per call.
    """
    store = graph.store
    activated: list[int] = []
    examined = 0
    cap = cap_factor * m
    while len(activated) < m and examined < cap:
        room = min(m - len(activated), cap - examined)
        if graph.cursor >= len(buffer):
            qs = sample_uniform(rng, bounds, room)
            bits = scene.state_flags(qs, PART_RS)
            for q, b in zip(qs, bits):
                if b:
                    examined += 1
                else:
                    buffer.append(store.add(q))
            continue
        chunk = buffer.ids[graph.cursor:graph.cursor + room]
        qs = store.configs(chunk)
        informed = graph.f_values(qs) < c_best
        bits = np.ones(len(chunk), dtype=np.int32)
        if informed.any():
            bits[informed] = scene.state_flags(qs[informed], PART_RO | PART_OS)
        for sid, b in zip(chunk, bits):
            examined += 1
            graph.cursor += 1
            if not b and sid not in graph.local:
                activated.append(sid)
    if activated:
        graph.add_samples(activated)
    return RefineResult(activated, len(activated) < m)
