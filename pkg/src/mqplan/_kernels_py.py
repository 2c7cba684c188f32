"""Pure-Python collision kernels.

Twin of ``_kernels.pyx``; both must return identical results for identical
inputs. Planar bodies are represented as a convex core polygon (1, 2 or
n >= 3 vertices) dilated by a radius, which covers discs, capsules, boxes
and convex polygons with one routine.
"""

from __future__ import annotations

import math

import numpy as np

PART_RS = 1
PART_RO = 2
PART_OS = 4


def _axes(poly):
    n = len(poly)
    if n == 1:
        return []
    if n == 2:
        dx = poly[1][0] - poly[0][0]
        dy = poly[1][1] - poly[0][1]
        return [(-dy, dx), (dx, dy)]
    out = []
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        dx = poly[j][0] - poly[i][0]
        dy = poly[j][1] - poly[i][1]
        out.append((-dy, dx))
    return out


def _separated(a, b):
    axes = _axes(a) + _axes(b)
    if not axes:
        return True
    for nx, ny in axes:
        amin = amax = a[0][0] * nx + a[0][1] * ny
        for p in a[1:]:
            d = p[0] * nx + p[1] * ny
            if d < amin:
                amin = d
            elif d > amax:
                amax = d
        bmin = bmax = b[0][0] * nx + b[0][1] * ny
        for p in b[1:]:
            d = p[0] * nx + p[1] * ny
            if d < bmin:
                bmin = d
            elif d > bmax:
                bmax = d
        if amax < bmin or bmax < amin:
            return True
    return False


def _point_segment_d2(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    ll = dx * dx + dy * dy
    if ll > 0.0:
        t = ((px - ax) * dx + (py - ay) * dy) / ll
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        cx = ax + t * dx - px
        cy = ay + t * dy - py
    else:
        cx = ax - px
        cy = ay - py
    return cx * cx + cy * cy


def _edges(poly):
    n = len(poly)
    if n == 1:
        return [(poly[0], poly[0])]
    if n == 2:
        return [(poly[0], poly[1])]
    return [(poly[i], poly[i + 1 if i + 1 < n else 0]) for i in range(n)]


def _min_d2(a, b):
    best = math.inf
    for p in a:
        for s, e in _edges(b):
            d = _point_segment_d2(p[0], p[1], s[0], s[1], e[0], e[1])
            if d < best:
                best = d
    for p in b:
        for s, e in _edges(a):
            d = _point_segment_d2(p[0], p[1], s[0], s[1], e[0], e[1])
            if d < best:
                best = d
    return best


def rounded_overlap(a, ra, b, rb) -> bool:
    """Closed overlap test of two dilated convex polygons in world coordinates."""
    a = [(float(p[0]), float(p[1])) for p in a]
    b = [(float(p[0]), float(p[1])) for p in b]
    if not _separated(a, b):
        return True
    r = ra + rb
    return _min_d2(a, b) <= r * r


def _world(verts, n, pose):
    c = math.cos(pose[2])
    s = math.sin(pose[2])
    x, y = pose[0], pose[1]
    return [(x + c * verts[k][0] - s * verts[k][1], y + s * verts[k][0] + c * verts[k][1]) for k in range(n)]


def _state_bits(pose_s, verts, nverts, radius, bound, pairs, parts, mask, cache):
    bits = 0
    cache.clear()
    for p in range(len(pairs)):
        bit = parts[p]
        if not (mask & bit) or (bits & bit):
            continue
        i, j = pairs[p]
        pi = pose_s[i]
        pj = pose_s[j]
        dx = pi[0] - pj[0]
        dy = pi[1] - pj[1]
        rr = bound[i] + bound[j]
        if dx * dx + dy * dy > rr * rr:
            continue
        wi = cache.get(i)
        if wi is None:
            wi = cache[i] = _world(verts[i], nverts[i], pi)
        wj = cache.get(j)
        if wj is None:
            wj = cache[j] = _world(verts[j], nverts[j], pj)
        if not _separated(wi, wj):
            bits |= bit
            continue
        r = radius[i] + radius[j]
        if _min_d2(wi, wj) <= r * r:
            bits |= bit
    return bits


def _unpack(poses, verts, nverts, radius, bound, pairs, parts):
    return (
        np.asarray(poses, dtype=np.float64).tolist(),
        np.asarray(verts, dtype=np.float64).tolist(),
        [int(v) for v in nverts],
        [float(v) for v in radius],
        [float(v) for v in bound],
        [(int(a), int(b)) for a, b in np.asarray(pairs).reshape(-1, 2)],
        [int(v) for v in parts],
    )


def first_collision(poses, verts, nverts, radius, bound, pairs, parts, mask):
    """Scan states in order; return ``(index, bits)`` of the first colliding state.

    ``bits`` holds every enabled part that collides at that state. Returns
    ``(-1, 0)`` when all states are free.
    """
    poses, verts, nverts, radius, bound, pairs, parts = _unpack(poses, verts, nverts, radius, bound, pairs, parts)
    cache: dict = {}
    for s, pose_s in enumerate(poses):
        bits = _state_bits(pose_s, verts, nverts, radius, bound, pairs, parts, mask, cache)
        if bits:
            return s, bits
    return -1, 0


def state_flags(poses, verts, nverts, radius, bound, pairs, parts, mask):
    """Collision bits for every state (no early exit)."""
    poses, verts, nverts, radius, bound, pairs, parts = _unpack(poses, verts, nverts, radius, bound, pairs, parts)
    cache: dict = {}
    out = np.zeros(len(poses), dtype=np.int32)
    for s, pose_s in enumerate(poses):
        out[s] = _state_bits(pose_s, verts, nverts, radius, bound, pairs, parts, mask, cache)
    return out
