"""Geometry kernel dispatch: compiled extension when available, numpy otherwise.

Set TGRASP_KERNELS=numpy (or =native) to force a backend. Both produce
identical results; see benchmarks/kernel_bench.py for the speed comparison.
"""

import importlib
import os

import numpy as np

from ..errors import ConfigError
from . import numpy_backend

_requested = os.environ.get("TGRASP_KERNELS", "").strip().lower()

_native = None
if _requested != "numpy":
    try:
        _native = importlib.import_module(__name__ + "._native")
    except ImportError:
        if _requested == "native":
            raise ConfigError("TGRASP_KERNELS=native but the compiled "
                              "extension is not available")

_impl = _native if _native is not None else numpy_backend

BACKEND = "native" if _native is not None else "numpy"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _idx(a):
    return np.ascontiguousarray(a, dtype=np.intp)


def raycast_nearest(origins, dirs, verts, faces, t_min=1e-9):
    """Nearest ray-triangle hit per ray: (t, tri); t=inf, tri=-1 on miss."""
    return _impl.raycast_nearest(_f64(origins), _f64(dirs), _f64(verts),
                                 _idx(faces), t_min)


def line_hits(origin, direction, verts, faces):
    """All hits of an infinite line with the mesh, sorted by signed t."""
    return _impl.line_hits(_f64(origin), _f64(direction), _f64(verts),
                           _idx(faces))


def fps(points, k, seed_index):
    """Greedy farthest-point-sampling indices; ties break to lowest index."""
    return _impl.fps(_f64(points), int(k), int(seed_index))


def any_triangle_box_overlap(verts, faces, center, half):
    """Closed SAT overlap between any triangle and an axis-aligned box."""
    return bool(_impl.any_triangle_box_overlap(_f64(verts), _idx(faces),
                                               _f64(center), _f64(half)))
