"""Procedural mesh corpus, simulated depth camera, and point-cloud sampling.

Meshes are watertight, outward-wound, centered at the origin; the camera is a
pinhole looking along its +z with x right / y down in image coordinates.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DataFormatError, EmptyCloud
from .geometry import GraspPose, PointCloud, Quaternion

PRIMITIVE_KINDS = ("box", "cylinder", "sphere", "capsule", "mug_like", "bottle_like")
DIM_RANGE = (0.02, 0.30)  # meters, corpus sanity bounds

DEFAULT_RESOLUTION = 128
DEFAULT_FOCAL = 120.0


@dataclass
class TriMesh:
    vertices: np.ndarray  # (V,3)
    faces: np.ndarray     # (F,3) int
    object_id: str = ""
    _watertight: bool | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        f = np.asarray(self.faces, dtype=np.intp)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) == 0:
            raise ValueError(f"vertices must be (V,3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3 or len(f) == 0:
            raise ValueError(f"faces must be (F,3), got {f.shape}")
        if f.min() < 0 or f.max() >= len(v):
            raise ValueError("face index out of range")
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        if np.any(np.linalg.norm(cross, axis=1) < 1e-14):
            raise ValueError("mesh contains degenerate (zero-area) faces")
        self.vertices = v
        self.faces = f

    @property
    def is_watertight(self):
        """Every directed edge appears once with its reverse present."""
        if self._watertight is None:
            f = self.faces
            edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
            fwd = set(map(tuple, edges))
            if len(fwd) != len(edges):
                self._watertight = False
            else:
                self._watertight = all((b, a) in fwd for a, b in fwd)
        return self._watertight

    def signed_volume(self):
        v = self.vertices
        f = self.faces
        return float(np.einsum("ij,ij->i", v[f[:, 0]],
                               np.cross(v[f[:, 1]], v[f[:, 2]])).sum() / 6.0)


def _oriented(vertices, faces):
    """Flip winding if the closed mesh is wound inward."""
    m = TriMesh(vertices, faces)
    if m.signed_volume() < 0:
        m = TriMesh(vertices, faces[:, ::-1])
    return m


def _merge(a, b):
    faces_b = b.faces + len(a.vertices)
    return np.vstack([a.vertices, b.vertices]), np.vstack([a.faces, faces_b])


def _box_mesh(lx, ly, lz):
    hx, hy, hz = lx / 2, ly / 2, lz / 2
    v = np.array([[sx * hx, sy * hy, sz * hz]
                  for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
                 dtype=float)
    f = np.array([
        [0, 1, 3], [0, 3, 2],  # -x
        [4, 6, 7], [4, 7, 5],  # +x
        [0, 4, 5], [0, 5, 1],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [0, 2, 6], [0, 6, 4],  # -z
        [1, 5, 7], [1, 7, 3],  # +z
    ])
    return _oriented(v, f)


def _icosphere(radius, subdivisions=3):
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    verts = [row for row in v]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                cache[key] = len(verts)
                verts.append((verts[i] + verts[j]) / 2.0)
            return cache[key]

        for a, b, c in f:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = np.array(new_faces)
    v = np.array(verts)
    v *= radius / np.linalg.norm(v, axis=1, keepdims=True)
    return _oriented(v, f)


def _revolve(profile, segments=32):
    """Close a (r,z) profile whose endpoints have r=0 into a solid of revolution."""
    profile = [(float(r), float(z)) for r, z in profile]
    if profile[0][0] != 0.0 or profile[-1][0] != 0.0:
        raise ValueError("profile must start and end on the axis (r=0)")
    angles = np.arange(segments) * (2 * math.pi / segments)
    cos_a, sin_a = np.cos(angles), np.sin(angles)

    verts = [np.array([0.0, 0.0, profile[0][1]])]
    ring_start = {}
    for k, (r, z) in enumerate(profile[1:-1], start=1):
        ring_start[k] = len(verts)
        for c, s in zip(cos_a, sin_a):
            verts.append(np.array([r * c, r * s, z]))
    top = len(verts)
    verts.append(np.array([0.0, 0.0, profile[-1][1]]))

    faces = []
    first_ring = ring_start[1]
    for i in range(segments):
        j = (i + 1) % segments
        faces.append([0, first_ring + j, first_ring + i])
    n_rings = len(profile) - 2
    for k in range(1, n_rings):
        a, b = ring_start[k], ring_start[k + 1]
        for i in range(segments):
            j = (i + 1) % segments
            faces.append([a + i, a + j, b + j])
            faces.append([a + i, b + j, b + i])
    last_ring = ring_start[n_rings]
    for i in range(segments):
        j = (i + 1) % segments
        faces.append([top, last_ring + i, last_ring + j])
    return _oriented(np.array(verts), np.array(faces))


def _torus(ring_radius, tube_radius, center, n_ring=24, n_tube=12):
    """Torus whose ring lies in the xz-plane (handle shape)."""
    verts = []
    for i in range(n_ring):
        u = 2 * math.pi * i / n_ring
        ru = np.array([math.cos(u), 0.0, math.sin(u)])
        m = np.asarray(center) + ring_radius * ru
        for j in range(n_tube):
            v = 2 * math.pi * j / n_tube
            verts.append(m + tube_radius * (math.cos(v) * ru
                                            + math.sin(v) * np.array([0.0, 1.0, 0.0])))
    faces = []
    for i in range(n_ring):
        i2 = (i + 1) % n_ring
        for j in range(n_tube):
            j2 = (j + 1) % n_tube
            a, b = i * n_tube + j, i2 * n_tube + j
            c, d = i2 * n_tube + j2, i * n_tube + j2
            faces.append([a, b, c])
            faces.append([a, c, d])
    return _oriented(np.array(verts), np.array(faces))


def _check_dims(dims):
    for d in dims:
        if not (DIM_RANGE[0] <= d <= DIM_RANGE[1]):
            raise ConfigError(f"primitive dimension {d} outside "
                              f"[{DIM_RANGE[0]}, {DIM_RANGE[1]}] m")


def gen_primitive(kind, dims, seed=0):
    """Watertight origin-centered primitive, deterministic per (kind, dims, seed)."""
    dims = tuple(float(d) for d in np.atleast_1d(dims))
    _check_dims(dims)
    rng = np.random.default_rng(seed)
    if kind == "box":
        lx, ly, lz = dims
        mesh = _box_mesh(lx, ly, lz)
    elif kind == "cylinder":
        r, h = dims
        mesh = _revolve([(0, -h / 2), (r, -h / 2), (r, h / 2), (0, h / 2)])
    elif kind == "sphere":
        mesh = _icosphere(dims[0])
    elif kind == "capsule":
        r, h = dims
        if h <= 2 * r:
            raise ConfigError("capsule height must exceed its diameter")
        hc = h / 2 - r
        lower = [(r * math.sin(p), -hc - r * math.cos(p))
                 for p in np.linspace(0, math.pi / 2, 7)[1:]]
        upper = [(r * math.sin(p), hc + r * math.cos(p))
                 for p in np.linspace(math.pi / 2, 0, 7)[:-1]]
        profile = [(0, -hc - r)] + lower + upper + [(0, hc + r)]
        mesh = _revolve(profile)
    elif kind == "bottle_like":
        r, h = dims
        neck = r * rng.uniform(0.35, 0.48)
        z0 = -h / 2
        profile = [(0, z0), (r, z0), (r, z0 + 0.55 * h),
                   (neck, z0 + 0.72 * h), (neck, h / 2), (0, h / 2)]
        mesh = _revolve(profile)
    elif kind == "mug_like":
        r, h = dims
        body = _revolve([(0, -h / 2), (r, -h / 2), (r, h / 2), (0, h / 2)])
        tube = max(0.006, min(0.009, r * 0.22))
        ring = h * rng.uniform(0.20, 0.28)
        center = np.array([r + ring * 0.55, 0.0, 0.0])
        handle = _torus(ring, tube, center)
        v, f = _merge(body, handle)
        mesh = TriMesh(v, f)
    else:
        raise ConfigError(f"unknown primitive kind {kind!r}; "
                          f"expected one of {PRIMITIVE_KINDS}")
    return TriMesh(mesh.vertices, mesh.faces, object_id=f"{kind}")


@dataclass(frozen=True)
class CameraModel:
    pose: GraspPose            # camera -> world
    width: int = DEFAULT_RESOLUTION
    height: int = DEFAULT_RESOLUTION
    focal: float = DEFAULT_FOCAL
    cx: float | None = None
    cy: float | None = None

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise ValueError("camera resolution must be at least 16x16")
        if self.focal <= 0:
            raise ValueError("focal length must be positive")
        if self.cx is None:
            object.__setattr__(self, "cx", self.width / 2.0)
        if self.cy is None:
            object.__setattr__(self, "cy", self.height / 2.0)

    def pixel_rays(self):
        """Unit ray directions in the world frame, row-major (H*W, 3)."""
        jj, ii = np.meshgrid(np.arange(self.width), np.arange(self.height))
        x = (jj.ravel() + 0.5 - self.cx) / self.focal
        y = (ii.ravel() + 0.5 - self.cy) / self.focal
        d = np.stack([x, y, np.ones_like(x)], axis=1)
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return d @ self.pose.rotation.to_matrix().T


@dataclass(frozen=True)
class DepthImage:
    depth: np.ndarray  # (H,W) meters along the ray, 0 = no hit

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=float)
        if d.ndim != 2:
            raise ValueError("depth image must be 2-D")
        if not np.all(np.isfinite(d)) or (d < 0).any():
            raise ValueError("depth must be finite and nonnegative")
        object.__setattr__(self, "depth", d)


def render_depth(mesh, cam):
    """Ray-cast depth (distance along each pixel ray; 0 where no hit)."""
    dirs = cam.pixel_rays()
    origins = np.broadcast_to(cam.pose.position, dirs.shape)
    t, _ = kernels.raycast_nearest(np.ascontiguousarray(origins), dirs,
                                   mesh.vertices, mesh.faces)
    depth = np.where(np.isfinite(t), t, 0.0).reshape(cam.height, cam.width)
    return DepthImage(depth)


def depth_to_cloud(img, cam):
    """Back-project nonzero pixels into a world-frame cloud."""
    t = img.depth.ravel()
    hit = t > 0
    if not hit.any():
        raise EmptyCloud("depth image has no hits to back-project")
    dirs = cam.pixel_rays()[hit]
    pts = cam.pose.position + t[hit, None] * dirs
    return PointCloud(pts, frame="object")


def fps(points, k, seed_index):
    """Greedy farthest point sampling indices (first = seed_index)."""
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"fps size k={k} must be in [1, {n}]")
    if not 0 <= seed_index < n:
        raise ValueError(f"seed index {seed_index} out of range")
    return kernels.fps(points, k, seed_index)


def centroid_seed_index(points):
    """Lowest index among points nearest the centroid (FPS seed rule)."""
    points = np.asarray(points, dtype=float)
    d = points - points.mean(axis=0)
    return int(np.argmin((d * d).sum(axis=1)))


def downsample(cloud, n, seed=0):
    """Resize a cloud to exactly n points (FPS down, replicated up)."""
    pts = cloud.points
    if len(pts) >= n:
        idx = fps(pts, n, centroid_seed_index(pts))
    else:
        rng = np.random.default_rng(seed)
        extra = rng.integers(0, len(pts), size=n - len(pts))
        idx = np.concatenate([np.arange(len(pts)), extra])
    return PointCloud(pts[idx], frame=cloud.frame)


def sample_camera(rng, radius_range, width=DEFAULT_RESOLUTION,
                  height=DEFAULT_RESOLUTION, focal=DEFAULT_FOCAL):
    """Camera on a random sphere point, looking at the origin, random roll."""
    lo, hi = radius_range
    if not (0 < lo <= hi):
        raise ValueError(f"invalid radius range [{lo}, {hi}]")
    radius = float(rng.uniform(lo, hi))
    v = rng.standard_normal(3)
    while np.linalg.norm(v) < 1e-9:
        v = rng.standard_normal(3)
    direction = v / np.linalg.norm(v)
    pos = radius * direction
    z_cam = -direction
    base = np.zeros(3)
    base[int(np.argmin(np.abs(z_cam)))] = 1.0
    x0 = base - (base @ z_cam) * z_cam
    x0 /= np.linalg.norm(x0)
    roll = rng.uniform(0.0, 2 * math.pi)
    x_cam = math.cos(roll) * x0 + math.sin(roll) * np.cross(z_cam, x0)
    y_cam = np.cross(z_cam, x_cam)
    rot = np.stack([x_cam, y_cam, z_cam], axis=1)
    pose = GraspPose(Quaternion.from_matrix(rot), pos)
    return CameraModel(pose, width=width, height=height, focal=focal)


# ---------------------------------------------------------------------------
# OFF mesh files and corpus manifests
# ---------------------------------------------------------------------------

def write_off(path, mesh):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(mesh.vertices)} {len(mesh.faces)} 0\n")
        for v in mesh.vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def read_off(path, object_id=""):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh
                 if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != "OFF":
        raise DataFormatError(f"{path}: missing OFF header")
    try:
        nv, nf, _ = (int(x) for x in lines[1].split())
        verts = np.array([[float(x) for x in ln.split()[:3]]
                          for ln in lines[2:2 + nv]])
        faces = []
        for ln in lines[2 + nv:2 + nv + nf]:
            parts = ln.split()
            if parts[0] != "3":
                raise DataFormatError(f"{path}: only triangle faces supported")
            faces.append([int(parts[1]), int(parts[2]), int(parts[3])])
        if len(verts) != nv or len(faces) != nf:
            raise DataFormatError(f"{path}: truncated OFF file")
    except (ValueError, IndexError) as exc:
        raise DataFormatError(f"{path}: malformed OFF file: {exc}") from exc
    return TriMesh(verts, np.array(faces), object_id=object_id)


# Per-family dimension ranges chosen so most objects admit grasps narrower
# than the 0.08 m opening.
_CORPUS_DIMS = {
    "box": lambda r: (r.uniform(0.025, 0.06), r.uniform(0.025, 0.06),
                      r.uniform(0.07, 0.15)),
    "cylinder": lambda r: (r.uniform(0.02, 0.032), r.uniform(0.07, 0.16)),
    "sphere": lambda r: (r.uniform(0.02, 0.034),),
    "capsule": lambda r: (r.uniform(0.02, 0.03), r.uniform(0.09, 0.17)),
    "mug_like": lambda r: (r.uniform(0.028, 0.038), r.uniform(0.08, 0.12)),
    "bottle_like": lambda r: (r.uniform(0.024, 0.034), r.uniform(0.13, 0.21)),
}


def generate_corpus(out_dir, n_objects, seed, kinds=PRIMITIVE_KINDS):
    """Write n_objects OFF meshes + manifest.json; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = []
    for i in range(n_objects):
        kind = kinds[i % len(kinds)]
        rng = np.random.default_rng([seed, i])
        dims = tuple(round(d, 4) for d in _CORPUS_DIMS[kind](rng))
        object_id = f"{kind}_{i:03d}"
        mesh = gen_primitive(kind, dims, seed=seed + i)
        fname = f"{object_id}.off"
        write_off(os.path.join(out_dir, fname), mesh)
        manifest.append({"object_id": object_id, "file": fname,
                         "kind": kind, "dims": list(dims), "scale": 1.0})
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_corpus(corpus_dir):
    """Read manifest.json + meshes -> list of (entry, TriMesh)."""
    mpath = os.path.join(corpus_dir, "manifest.json")
    try:
        with open(mpath) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise DataFormatError(f"no manifest.json in {corpus_dir}")
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{mpath}: {exc}")
    out = []
    for entry in manifest:
        mesh = read_off(os.path.join(corpus_dir, entry["file"]),
                        object_id=entry["object_id"])
        scale = float(entry.get("scale", 1.0))
        if scale != 1.0:
            mesh = TriMesh(mesh.vertices * scale, mesh.faces,
                           object_id=mesh.object_id)
        out.append((entry, mesh))
    return out
