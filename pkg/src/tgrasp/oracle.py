"""Analytic grasp labeling: antipodal friction-cone check + collision test.

Stability = two opposing contacts on the closing line, separation within the
opening, both contact normals inside the friction cone of half-angle atan(mu),
and a collision-free pre-close gripper volume (two finger boxes + palm box).
The closing line runs through the center grasp point along the gripper x axis.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import OracleUnsupported
from .geometry import GraspPose, Quaternion, center_grasp_point, rotate_point

DEFAULT_MU = 0.5

# Pre-close swept volume in the gripper frame (meters).
FINGER_THICKNESS = 0.012
FINGER_WIDTH = 0.018
PALM_DEPTH = 0.020


@dataclass(frozen=True)
class ContactPair:
    p1: np.ndarray  # contact reached by the finger closing in -x
    p2: np.ndarray
    n1: np.ndarray  # outward surface normals
    n2: np.ndarray

    @property
    def separation(self):
        return float(np.linalg.norm(self.p2 - self.p1))


@dataclass(frozen=True)
class GraspLabel:
    stable: bool
    reason: str  # ok | no_contact | too_wide | friction_violation | collision

    def __post_init__(self):
        if self.stable and self.reason != "ok":
            raise ValueError("stable labels must carry reason 'ok'")


def _require_watertight(mesh):
    if not mesh.is_watertight:
        raise OracleUnsupported(
            f"mesh {mesh.object_id or '<anonymous>'} is not watertight")


def _face_normals(mesh, tri_idx):
    v = mesh.vertices
    f = mesh.faces[tri_idx]
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _closing_line(mesh, g, gm):
    """All line hits along the closing axis, t measured from the center point."""
    center = center_grasp_point(g, gm)
    axis = rotate_point(g.rotation, np.array([1.0, 0.0, 0.0]))
    ts, tris = kernels.line_hits(center, axis, mesh.vertices, mesh.faces)
    return center, axis, ts, tris


def find_contacts(mesh, g, gm):
    """Opposing surface hits inside the closing window, or None."""
    _require_watertight(mesh)
    center, axis, ts, tris = _closing_line(mesh, g, gm)
    return _contacts_from_hits(mesh, center, axis, ts, tris, gm.max_opening)


def _contacts_from_hits(mesh, center, axis, ts, tris, max_opening):
    half = max_opening / 2.0
    inside = (ts >= -half) & (ts <= half)
    if not inside.any():
        return None
    ts_in = ts[inside]
    tris_in = tris[inside]
    i1, i2 = np.argmin(ts_in), np.argmax(ts_in)
    t1, t2 = float(ts_in[i1]), float(ts_in[i2])
    if t2 - t1 < 1e-12:
        return None
    n1, n2 = _face_normals(mesh, np.array([tris_in[i1], tris_in[i2]]))
    # the pair must bracket the object: enter at t1, exit at t2
    if np.dot(n1, axis) >= 0 or np.dot(n2, axis) <= 0:
        return None
    return ContactPair(center + t1 * axis, center + t2 * axis, n1, n2)


def _gripper_boxes(gm):
    w = gm.max_opening / 2.0
    f = gm.finger_length
    t, wf = FINGER_THICKNESS, FINGER_WIDTH
    return [
        (np.array([-(w + t / 2), 0.0, f / 2]), np.array([t / 2, wf / 2, f / 2])),
        (np.array([+(w + t / 2), 0.0, f / 2]), np.array([t / 2, wf / 2, f / 2])),
        (np.array([0.0, 0.0, -PALM_DEPTH / 2]),
         np.array([w + t, wf / 2, PALM_DEPTH / 2])),
    ]


def gripper_collides(mesh, g, gm):
    """Closed-overlap test of the pre-close gripper volume against the mesh."""
    rot = g.rotation.to_matrix()
    local = (mesh.vertices - g.position) @ rot
    for center, half in _gripper_boxes(gm):
        if kernels.any_triangle_box_overlap(local, mesh.faces, center, half):
            return True
    return False


def label_grasp(mesh, g, gm, mu=DEFAULT_MU):
    """Stability label with failure reason; see module docstring for the rule."""
    if mu <= 0:
        raise ValueError("friction coefficient must be positive")
    _require_watertight(mesh)
    center, axis, ts, tris = _closing_line(mesh, g, gm)
    half = gm.max_opening / 2.0

    if len(ts) == 0:
        return GraspLabel(False, "no_contact")
    contacts = _contacts_from_hits(mesh, center, axis, ts, tris, gm.max_opening)
    if contacts is None:
        if ts.min() < -half and ts.max() > half:
            return GraspLabel(False, "too_wide")
        return GraspLabel(False, "no_contact")
    if contacts.separation > gm.max_opening + 1e-12:
        return GraspLabel(False, "too_wide")

    cos_half = 1.0 / math.sqrt(1.0 + mu * mu)
    if (np.dot(contacts.n1, -axis) < cos_half - 1e-12
            or np.dot(contacts.n2, axis) < cos_half - 1e-12):
        return GraspLabel(False, "friction_violation")

    if gripper_collides(mesh, g, gm):
        return GraspLabel(False, "collision")
    return GraspLabel(True, "ok")


def _surface_sampler(mesh):
    v = mesh.vertices
    f = mesh.faces
    cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    cdf = np.cumsum(areas)
    cdf /= cdf[-1]

    def sample(rng):
        tri = int(np.searchsorted(cdf, rng.random()))
        tri = min(tri, len(f) - 1)
        r1, r2 = rng.random(), rng.random()
        s1 = math.sqrt(r1)
        a, b, c = v[f[tri, 0]], v[f[tri, 1]], v[f[tri, 2]]
        point = (1 - s1) * a + s1 * (1 - r2) * b + s1 * r2 * c
        normal = cross[tri] / np.linalg.norm(cross[tri])
        return point, normal

    return sample


def _perp_basis(axis):
    base = np.zeros(3)
    base[int(np.argmin(np.abs(axis)))] = 1.0
    b = base - (base @ axis) * axis
    return b / np.linalg.norm(b)


def pose_from_closing_line(line_center, closing_axis, roll, gm, offset=0.0):
    """Grasp pose whose closing line runs through line_center along closing_axis.

    roll spins the approach axis about the closing line; offset slides the
    gripper along it (off-center grasps).
    """
    x = closing_axis / np.linalg.norm(closing_axis)
    b = _perp_basis(x)
    z = math.cos(roll) * b + math.sin(roll) * np.cross(x, b)
    y = np.cross(z, x)
    rot = np.stack([x, y, z], axis=1)
    center = np.asarray(line_center) + offset * x
    gripper_center = rotate_point(Quaternion.from_matrix(rot), gm.center_offset)
    return GraspPose(Quaternion.from_matrix(rot), center - gripper_center)


def _rodrigues(v, axis, angle):
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * (axis @ v) * (1 - c)


def sample_labeled_grasps(mesh, gm, mu, n, seed):
    """n antipodal candidates built from surface points, each labeled.

    The closing direction is the inward surface normal, optionally tilted
    within the friction cone; non-diametral chords keep the center grasp
    point near the surface on rounded bodies. Deterministic per seed; each
    candidate owns a derived rng stream.
    """
    if n < 1:
        raise ValueError("need at least one candidate")
    _require_watertight(mesh)
    sample_surface = _surface_sampler(mesh)
    max_tilt = 0.85 * math.atan(mu)
    children = np.random.SeedSequence(seed).spawn(n)
    out = []
    for child in children:
        rng = np.random.default_rng(child)
        pose = None
        for _ in range(20):
            point, normal = sample_surface(rng)
            inward = -normal
            if rng.random() < 0.5:
                tilt = rng.uniform(0.0, max_tilt)
                azim = rng.uniform(0.0, 2 * math.pi)
                perp = _rodrigues(_perp_basis(inward), inward, azim)
                inward = _rodrigues(inward, perp, tilt)
            ts, tris = kernels.line_hits(point, inward,
                                         mesh.vertices, mesh.faces)
            normals = _face_normals(mesh, tris) if len(ts) else np.zeros((0, 3))
            exits = (ts > 1e-9) & (np.einsum("ij,j->i", normals, inward) > 0)
            if not exits.any():
                continue
            depth = float(ts[exits].min())
            if depth < 1e-4:  # grazing chord
                continue
            line_center = point + 0.5 * depth * inward
            roll = rng.uniform(0.0, 2 * math.pi)
            slack = max(0.0, gm.max_opening - min(depth, gm.max_opening)) / 2.0
            offset = rng.uniform(-0.9, 0.9) * slack
            pose = pose_from_closing_line(line_center, inward, roll, gm, offset)
            break
        if pose is None:  # pathological surface point; emit a centered fallback
            pose = pose_from_closing_line(np.zeros(3), np.array([1.0, 0, 0]),
                                          0.0, gm)
        out.append((pose, label_grasp(mesh, pose, gm, mu)))
    return out
