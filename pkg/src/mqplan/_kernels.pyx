# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled collision kernels; arithmetic mirrors ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, INFINITY

cnp.import_array()

cdef enum:
    MAXV = 32


cdef inline int _n_axes(int n) nogil:
    if n == 1:
        return 0
    if n == 2:
        return 2
    return n


cdef inline void _axis(const double* p, int n, int k, double* nx, double* ny) nogil:
    cdef double dx, dy
    cdef int j
    if n == 2:
        dx = p[2] - p[0]
        dy = p[3] - p[1]
        if k == 0:
            nx[0] = -dy
            ny[0] = dx
        else:
            nx[0] = dx
            ny[0] = dy
        return
    j = k + 1 if k + 1 < n else 0
    dx = p[2 * j] - p[2 * k]
    dy = p[2 * j + 1] - p[2 * k + 1]
    nx[0] = -dy
    ny[0] = dx


cdef inline bint _sep_axis(const double* a, int na, const double* b, int nb, double nx, double ny) nogil:
    cdef double amin, amax, bmin, bmax, d
    cdef int k
    amin = a[0] * nx + a[1] * ny
    amax = amin
    for k in range(1, na):
        d = a[2 * k] * nx + a[2 * k + 1] * ny
        if d < amin:
            amin = d
        elif d > amax:
            amax = d
    bmin = b[0] * nx + b[1] * ny
    bmax = bmin
    for k in range(1, nb):
        d = b[2 * k] * nx + b[2 * k + 1] * ny
        if d < bmin:
            bmin = d
        elif d > bmax:
            bmax = d
    return amax < bmin or bmax < amin


cdef bint _separated(const double* a, int na, const double* b, int nb) nogil:
    cdef int k, ka = _n_axes(na), kb = _n_axes(nb)
    cdef double nx, ny
    if ka == 0 and kb == 0:
        return True
    for k in range(ka):
        _axis(a, na, k, &nx, &ny)
        if _sep_axis(a, na, b, nb, nx, ny):
            return True
    for k in range(kb):
        _axis(b, nb, k, &nx, &ny)
        if _sep_axis(a, na, b, nb, nx, ny):
            return True
    return False


cdef inline double _pseg_d2(double px, double py, double ax, double ay, double bx, double by) nogil:
    cdef double dx = bx - ax, dy = by - ay, ll, t, cx, cy
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


cdef double _min_d2_one(const double* a, int na, const double* b, int nb, double best) nogil:
    # vertices of a against edges of b
    cdef int i, k, j, ne
    cdef double d
    if nb == 1:
        ne = 1
    elif nb == 2:
        ne = 1
    else:
        ne = nb
    for i in range(na):
        for k in range(ne):
            if nb == 1:
                j = 0
            else:
                j = k + 1 if k + 1 < nb else 0
            d = _pseg_d2(a[2 * i], a[2 * i + 1], b[2 * k], b[2 * k + 1], b[2 * j], b[2 * j + 1])
            if d < best:
                best = d
    return best


cdef inline bint _overlap(const double* a, int na, double ra, const double* b, int nb, double rb) nogil:
    cdef double best, r
    if not _separated(a, na, b, nb):
        return True
    best = _min_d2_one(a, na, b, nb, INFINITY)
    best = _min_d2_one(b, nb, a, na, best)
    r = ra + rb
    return best <= r * r


def rounded_overlap(a, double ra, b, double rb):
    """Closed overlap test of two dilated convex polygons in world coordinates."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 2)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 2)
    if av.shape[0] > MAXV or bv.shape[0] > MAXV:
        raise ValueError("polygon has too many vertices")
    return bool(_overlap(&av[0, 0], av.shape[0], ra, &bv[0, 0], bv.shape[0], rb))


cdef int _state_bits(const double[:, ::1] pose_s, const double[:, :, ::1] verts, const int[::1] nverts,
                     const double[::1] radius, const double[::1] bound, const int[:, ::1] pairs,
                     const int[::1] parts, int mask, double* world, int* ready) nogil:
    cdef int bits = 0, p, bit, i, j, k, v, nb = pose_s.shape[0], m
    cdef double dx, dy, rr, c, s, x, y
    for k in range(nb):
        ready[k] = 0
    for p in range(pairs.shape[0]):
        bit = parts[p]
        if not (mask & bit) or (bits & bit):
            continue
        i = pairs[p, 0]
        j = pairs[p, 1]
        dx = pose_s[i, 0] - pose_s[j, 0]
        dy = pose_s[i, 1] - pose_s[j, 1]
        rr = bound[i] + bound[j]
        if dx * dx + dy * dy > rr * rr:
            continue
        for m in range(2):
            k = i if m == 0 else j
            if not ready[k]:
                c = cos(pose_s[k, 2])
                s = sin(pose_s[k, 2])
                x = pose_s[k, 0]
                y = pose_s[k, 1]
                for v in range(nverts[k]):
                    world[(k * MAXV + v) * 2] = x + c * verts[k, v, 0] - s * verts[k, v, 1]
                    world[(k * MAXV + v) * 2 + 1] = y + s * verts[k, v, 0] + c * verts[k, v, 1]
                ready[k] = 1
        if _overlap(&world[i * MAXV * 2], nverts[i], radius[i], &world[j * MAXV * 2], nverts[j], radius[j]):
            bits |= bit
    return bits


def _prep(poses, verts, nverts, radius, bound, pairs, parts):
    poses = np.ascontiguousarray(poses, dtype=np.float64)
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    if verts.shape[1] > MAXV:
        raise ValueError("polygon has too many vertices")
    pairs = np.ascontiguousarray(np.asarray(pairs, dtype=np.int32).reshape(-1, 2))
    return (
        poses,
        verts,
        np.ascontiguousarray(nverts, dtype=np.int32),
        np.ascontiguousarray(radius, dtype=np.float64),
        np.ascontiguousarray(bound, dtype=np.float64),
        pairs,
        np.ascontiguousarray(parts, dtype=np.int32),
    )


def first_collision(poses, verts, nverts, radius, bound, pairs, parts, int mask):
    """Scan states in order; return ``(index, bits)`` of the first colliding state."""
    poses, verts, nverts, radius, bound, pairs, parts = _prep(poses, verts, nverts, radius, bound, pairs, parts)
    cdef const double[:, :, ::1] pv = poses
    cdef const double[:, :, ::1] vv = verts
    cdef const int[::1] nv = nverts
    cdef const double[::1] rv = radius
    cdef const double[::1] bv = bound
    cdef const int[:, ::1] prv = pairs
    cdef const int[::1] ptv = parts
    cdef int nb = vv.shape[0], s, bits, found = -1, fbits = 0
    cdef double[::1] world = np.empty(max(nb, 1) * MAXV * 2, dtype=np.float64)
    cdef int[::1] ready = np.empty(max(nb, 1), dtype=np.int32)
    with nogil:
        for s in range(pv.shape[0]):
            bits = _state_bits(pv[s], vv, nv, rv, bv, prv, ptv, mask, &world[0], &ready[0])
            if bits:
                found = s
                fbits = bits
                break
    return found, fbits


def state_flags(poses, verts, nverts, radius, bound, pairs, parts, int mask):
    """Collision bits for every state (no early exit)."""
    poses, verts, nverts, radius, bound, pairs, parts = _prep(poses, verts, nverts, radius, bound, pairs, parts)
    cdef const double[:, :, ::1] pv = poses
    cdef const double[:, :, ::1] vv = verts
    cdef const int[::1] nv = nverts
    cdef const double[::1] rv = radius
    cdef const double[::1] bv = bound
    cdef const int[:, ::1] prv = pairs
    cdef const int[::1] ptv = parts
    cdef int nb = vv.shape[0], s
    cdef double[::1] world = np.empty(max(nb, 1) * MAXV * 2, dtype=np.float64)
    cdef int[::1] ready = np.empty(max(nb, 1), dtype=np.int32)
    out = np.zeros(pv.shape[0], dtype=np.int32)
    cdef int[::1] ov = out
    with nogil:
        for s in range(pv.shape[0]):
            ov[s] = _state_bits(pv[s], vv, nv, rv, bv, prv, ptv, mask, &world[0], &ready[0])
    return out
