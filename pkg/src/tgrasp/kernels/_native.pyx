# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometry kernels.

Semantics (hit tolerances, tie-breaking, accumulation order) mirror
kernels.numpy_backend exactly; the two backends must stay interchangeable.
"""

from libc.math cimport fabs, INFINITY

import numpy as np

DEF PARALLEL_EPS = 1e-12
DEF BARY_EPS = 1e-12


cdef inline double _det3(double ax, double ay, double az,
                         double bx, double by, double bz,
                         double cx, double cy, double cz) nogil:
    return ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx) + az * (bx * cy - by * cx)


def raycast_nearest(double[:, ::1] origins, double[:, ::1] dirs,
                    double[:, ::1] verts, Py_ssize_t[:, ::1] faces,
                    double t_min=1e-9):
    """Nearest hit per ray; t = inf and tri = -1 where the ray misses."""
    cdef Py_ssize_t n_rays = origins.shape[0]
    cdef Py_ssize_t n_faces = faces.shape[0]
    t_out = np.full(n_rays, np.inf)
    tri_out = np.full(n_rays, -1, dtype=np.intp)
    cdef double[::1] t_v = t_out
    cdef Py_ssize_t[::1] tri_v = tri_out

    cdef Py_ssize_t r, f
    cdef double ox, oy, oz, dx, dy, dz
    cdef double e1x, e1y, e1z, e2x, e2y, e2z
    cdef double px, py, pz, tx, ty, tz, qx, qy, qz
    cdef double det, inv, u, v, t
    cdef Py_ssize_t i0, i1, i2

    for r in range(n_rays):
        ox = origins[r, 0]; oy = origins[r, 1]; oz = origins[r, 2]
        dx = dirs[r, 0]; dy = dirs[r, 1]; dz = dirs[r, 2]
        for f in range(n_faces):
            i0 = faces[f, 0]; i1 = faces[f, 1]; i2 = faces[f, 2]
            e1x = verts[i1, 0] - verts[i0, 0]
            e1y = verts[i1, 1] - verts[i0, 1]
            e1z = verts[i1, 2] - verts[i0, 2]
            e2x = verts[i2, 0] - verts[i0, 0]
            e2y = verts[i2, 1] - verts[i0, 1]
            e2z = verts[i2, 2] - verts[i0, 2]
            # pvec = dir x e2
            px = dy * e2z - dz * e2y
            py = dz * e2x - dx * e2z
            pz = dx * e2y - dy * e2x
            det = e1x * px + e1y * py + e1z * pz
            if fabs(det) < PARALLEL_EPS:
                continue
            inv = 1.0 / det
            tx = ox - verts[i0, 0]
            ty = oy - verts[i0, 1]
            tz = oz - verts[i0, 2]
            u = (tx * px + ty * py + tz * pz) * inv
            if u < -BARY_EPS or u > 1.0 + BARY_EPS:
                continue
            # qvec = tvec x e1
            qx = ty * e1z - tz * e1y
            qy = tz * e1x - tx * e1z
            qz = tx * e1y - ty * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
                continue
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
            if t >= t_min and t < t_v[r]:
                t_v[r] = t
                tri_v[r] = f
    return t_out, tri_out


def line_hits(double[::1] origin, double[::1] direction,
              double[:, ::1] verts, Py_ssize_t[:, ::1] faces):
    """All intersections of an infinite line with a mesh, sorted by t.

    Returns (t values, triangle indices); t may be negative.
    """
    cdef Py_ssize_t n_faces = faces.shape[0]
    t_buf = np.empty(n_faces)
    tri_buf = np.empty(n_faces, dtype=np.intp)
    cdef double[::1] t_v = t_buf
    cdef Py_ssize_t[::1] tri_v = tri_buf

    cdef Py_ssize_t f, n_hits = 0
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double dx = direction[0], dy = direction[1], dz = direction[2]
    cdef double e1x, e1y, e1z, e2x, e2y, e2z
    cdef double px, py, pz, tx, ty, tz, qx, qy, qz
    cdef double det, inv, u, v, t
    cdef Py_ssize_t i0, i1, i2

    for f in range(n_faces):
        i0 = faces[f, 0]; i1 = faces[f, 1]; i2 = faces[f, 2]
        e1x = verts[i1, 0] - verts[i0, 0]
        e1y = verts[i1, 1] - verts[i0, 1]
        e1z = verts[i1, 2] - verts[i0, 2]
        e2x = verts[i2, 0] - verts[i0, 0]
        e2y = verts[i2, 1] - verts[i0, 1]
        e2z = verts[i2, 2] - verts[i0, 2]
        px = dy * e2z - dz * e2y
        py = dz * e2x - dx * e2z
        pz = dx * e2y - dy * e2x
        det = e1x * px + e1y * py + e1z * pz
        if fabs(det) < PARALLEL_EPS:
            continue
        inv = 1.0 / det
        tx = ox - verts[i0, 0]
        ty = oy - verts[i0, 1]
        tz = oz - verts[i0, 2]
        u = (tx * px + ty * py + tz * pz) * inv
        if u < -BARY_EPS or u > 1.0 + BARY_EPS:
            continue
        qx = ty * e1z - tz * e1y
        qy = tz * e1x - tx * e1z
        qz = tx * e1y - ty * e1x
        v = (dx * qx + dy * qy + dz * qz) * inv
        if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
            continue
        t = (e2x * qx + e2y * qy + e2z * qz) * inv
        t_v[n_hits] = t
        tri_v[n_hits] = f
        n_hits += 1

    order = np.argsort(t_buf[:n_hits], kind="stable")
    return t_buf[:n_hits][order], tri_buf[:n_hits][order]


def fps(double[:, ::1] points, Py_ssize_t k, Py_ssize_t seed_index):
    """Greedy farthest point sampling; ties broken by lowest index."""
    cdef Py_ssize_t n = points.shape[0]
    idx_out = np.empty(k, dtype=np.intp)
    cdef Py_ssize_t[::1] idx_v = idx_out
    dist = np.empty(n)
    cdef double[::1] dist_v = dist

    cdef Py_ssize_t i, step, cur, best
    cdef double dx, dy, dz, d, best_d

    cur = seed_index
    idx_v[0] = cur
    for i in range(n):
        dx = points[i, 0] - points[cur, 0]
        dy = points[i, 1] - points[cur, 1]
        dz = points[i, 2] - points[cur, 2]
        dist_v[i] = dx * dx + dy * dy + dz * dz
    for step in range(1, k):
        best = 0
        best_d = dist_v[0]
        for i in range(1, n):
            if dist_v[i] > best_d:
                best_d = dist_v[i]
                best = i
        idx_v[step] = best
        cur = best
        for i in range(n):
            dx = points[i, 0] - points[cur, 0]
            dy = points[i, 1] - points[cur, 1]
            dz = points[i, 2] - points[cur, 2]
            d = dx * dx + dy * dy + dz * dz
            if d < dist_v[i]:
                dist_v[i] = d
    return idx_out


cdef bint _axis_separates(double[3] v0, double[3] v1, double[3] v2,
                          double ax, double ay, double az,
                          double hx, double hy, double hz) nogil:
    cdef double p0 = v0[0] * ax + v0[1] * ay + v0[2] * az
    cdef double p1 = v1[0] * ax + v1[1] * ay + v1[2] * az
    cdef double p2 = v2[0] * ax + v2[1] * ay + v2[2] * az
    cdef double lo = p0, hi = p0
    if p1 < lo: lo = p1
    if p1 > hi: hi = p1
    if p2 < lo: lo = p2
    if p2 > hi: hi = p2
    cdef double r = hx * fabs(ax) + hy * fabs(ay) + hz * fabs(az)
    return lo > r or hi < -r


def any_triangle_box_overlap(double[:, ::1] verts, Py_ssize_t[:, ::1] faces,
                             double[::1] center, double[::1] half):
    """True if any mesh triangle overlaps the axis-aligned box (closed test).

    Vertices must already be expressed in the box's frame.
    """
    cdef Py_ssize_t n_faces = faces.shape[0]
    cdef double hx = half[0], hy = half[1], hz = half[2]
    cdef double cx = center[0], cy = center[1], cz = center[2]
    cdef double[3] v0, v1, v2
    cdef double e0x, e0y, e0z, e1x, e1y, e1z, e2x, e2y, e2z
    cdef double nx, ny, nz
    cdef Py_ssize_t f, i0, i1, i2

    for f in range(n_faces):
        i0 = faces[f, 0]; i1 = faces[f, 1]; i2 = faces[f, 2]
        v0[0] = verts[i0, 0] - cx; v0[1] = verts[i0, 1] - cy; v0[2] = verts[i0, 2] - cz
        v1[0] = verts[i1, 0] - cx; v1[1] = verts[i1, 1] - cy; v1[2] = verts[i1, 2] - cz
        v2[0] = verts[i2, 0] - cx; v2[1] = verts[i2, 1] - cy; v2[2] = verts[i2, 2] - cz

        # box face normals
        if _axis_separates(v0, v1, v2, 1, 0, 0, hx, hy, hz): continue
        if _axis_separates(v0, v1, v2, 0, 1, 0, hx, hy, hz): continue
        if _axis_separates(v0, v1, v2, 0, 0, 1, hx, hy, hz): continue

        e0x = v1[0] - v0[0]; e0y = v1[1] - v0[1]; e0z = v1[2] - v0[2]
        e1x = v2[0] - v1[0]; e1y = v2[1] - v1[1]; e1z = v2[2] - v1[2]
        e2x = v0[0] - v2[0]; e2y = v0[1] - v2[1]; e2z = v0[2] - v2[2]

        # triangle normal
        nx = e0y * e1z - e0z * e1y
        ny = e0z * e1x - e0x * e1z
        nz = e0x * e1y - e0y * e1x
        if _axis_separates(v0, v1, v2, nx, ny, nz, hx, hy, hz): continue

        # 9 edge cross products with box axes
        if _axis_separates(v0, v1, v2, 0, -e0z, e0y, hx, hy, hz): continue
        if _axis_separates(v0, v1, v2, e0z, 0, -e0x, hx, hy, hz): continue
        if _axis_separates(v0, v1, v2, -e0y, e0x, 0, hx, hy, hz): continue
        if _axis_separates(v0, v1, v2, 0, -e1z, e1y, hx, hy, hz): continue
        if _axis_separates(v0, v1, v2, e1z, 0, -e1x, hx, hy, hz): continue
        if _axis_separates(v0, v1, v2, -e1y, e1x, 0, hx, hy, hz): continue
        if _axis_separates(v0, v1, v2, 0, -e2z, e2y, hx, hy, hz): continue
        if _axis_separates(v0, v1, v2, e2z, 0, -e2x, hx, hy, hz): continue
        if _axis_separates(v0, v1, v2, -e2y, e2x, 0, hx, hy, hz): continue

        return True
    return False
