"""Pure-numpy kernel fallbacks.

Formula-for-formula mirrors of _native.pyx. Dot and cross products are spelled
out component-wise so IEEE evaluation order matches the C kernels exactly and
the two backends return bit-identical results.
"""

import numpy as np

PARALLEL_EPS = 1e-12
BARY_EPS = 1e-12

_RAY_CHUNK = 512  # rays per vectorized block; bounds peak memory


def _moller_trumbore(origins, dirs, verts, faces):
    """Hit parameter for every (ray, triangle) pair; inf where no hit."""
    v0 = verts[faces[:, 0]]
    e1 = verts[faces[:, 1]] - v0
    e2 = verts[faces[:, 2]] - v0
    e1x, e1y, e1z = e1[:, 0], e1[:, 1], e1[:, 2]
    e2x, e2y, e2z = e2[:, 0], e2[:, 1], e2[:, 2]

    dx = dirs[:, 0:1]
    dy = dirs[:, 1:2]
    dz = dirs[:, 2:3]
    # pvec = dir x e2, shape (R,F)
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz

    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        tx = origins[:, 0:1] - v0[:, 0]
        ty = origins[:, 1:2] - v0[:, 1]
        tz = origins[:, 2:3] - v0[:, 2]
        u = (tx * px + ty * py + tz * pz) * inv
        # qvec = tvec x e1
        qx = ty * e1z - tz * e1y
        qy = tz * e1x - tx * e1z
        qz = tx * e1y - ty * e1x
        v = (dx * qx + dy * qy + dz * qz) * inv
        t = (e2x * qx + e2y * qy + e2z * qz) * inv

    ok = (np.abs(det) >= PARALLEL_EPS)
    ok &= (u >= -BARY_EPS) & (u <= 1.0 + BARY_EPS)
    ok &= (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS)
    return np.where(ok, t, np.inf)


def raycast_nearest(origins, dirs, verts, faces, t_min=1e-9):
    n_rays = origins.shape[0]
    t_out = np.full(n_rays, np.inf)
    tri_out = np.full(n_rays, -1, dtype=np.intp)
    for lo in range(0, n_rays, _RAY_CHUNK):
        hi = min(lo + _RAY_CHUNK, n_rays)
        t = _moller_trumbore(origins[lo:hi], dirs[lo:hi], verts, faces)
        t = np.where(t >= t_min, t, np.inf)
        best = np.argmin(t, axis=1)
        best_t = t[np.arange(hi - lo), best]
        hit = np.isfinite(best_t)
        t_out[lo:hi] = np.where(hit, best_t, np.inf)
        tri_out[lo:hi] = np.where(hit, best, -1)
    return t_out, tri_out


def line_hits(origin, direction, verts, faces):
    t = _moller_trumbore(origin[None, :], direction[None, :], verts, faces)[0]
    hit = np.isfinite(t)
    tris = np.nonzero(hit)[0].astype(np.intp)
    ts = t[hit]
    order = np.argsort(ts, kind="stable")
    return ts[order], tris[order]


def _sqdist(points, ref):
    dx = points[:, 0] - ref[0]
    dy = points[:, 1] - ref[1]
    dz = points[:, 2] - ref[2]
    return dx * dx + dy * dy + dz * dz


def fps(points, k, seed_index):
    idx = np.empty(k, dtype=np.intp)
    idx[0] = seed_index
    dist = _sqdist(points, points[seed_index])
    for step in range(1, k):
        best = int(np.argmax(dist))
        idx[step] = best
        np.minimum(dist, _sqdist(points, points[best]), out=dist)
    return idx


def _project(vx, vy, vz, ax, ay, az):
    return vx * ax + vy * ay + vz * az


def any_triangle_box_overlap(verts, faces, center, half):
    v0 = verts[faces[:, 0]] - center
    v1 = verts[faces[:, 1]] - center
    v2 = verts[faces[:, 2]] - center

    e0 = v1 - v0
    e1 = v2 - v1
    e2 = v0 - v2
    zeros = np.zeros(len(faces))
    hx, hy, hz = half[0], half[1], half[2]

    n = np.empty_like(e0)
    n[:, 0] = e0[:, 1] * e1[:, 2] - e0[:, 2] * e1[:, 1]
    n[:, 1] = e0[:, 2] * e1[:, 0] - e0[:, 0] * e1[:, 2]
    n[:, 2] = e0[:, 0] * e1[:, 1] - e0[:, 1] * e1[:, 0]

    ones = np.ones(len(faces))
    axes = [(ones, zeros, zeros), (zeros, ones, zeros), (zeros, zeros, ones),
            (n[:, 0], n[:, 1], n[:, 2])]
    for e in (e0, e1, e2):
        axes.append((zeros, -e[:, 2], e[:, 1]))
        axes.append((e[:, 2], zeros, -e[:, 0]))
        axes.append((-e[:, 1], e[:, 0], zeros))

    alive = np.ones(len(faces), dtype=bool)
    for ax, ay, az in axes:
        p0 = _project(v0[:, 0], v0[:, 1], v0[:, 2], ax, ay, az)
        p1 = _project(v1[:, 0], v1[:, 1], v1[:, 2], ax, ay, az)
        p2 = _project(v2[:, 0], v2[:, 1], v2[:, 2], ax, ay, az)
        lo = np.minimum(np.minimum(p0, p1), p2)
        hi = np.maximum(np.maximum(p0, p1), p2)
        r = hx * np.abs(ax) + hy * np.abs(ay) + hz * np.abs(az)
        alive &= ~((lo > r) | (hi < -r))
        if not alive.any():
            return False
    return True
