"""Grasp pose algebra and the gripper control-point model.

Conventions (GRIPPER FRAME):
  +x : closing axis (fingers at x = +/- max_opening/2)
  +z : approach axis (palm at z=0, fingertips at z=finger_length)
  center grasp point : mean of the four fingertip control points,
                       (0, 0, 0.75 * finger_length) at identity pose.

Quaternions are stored (w, x, y, z); q and -q denote the same rotation.
All lengths are meters.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTarget, InvalidRotation

UNIT_TOL = 1e-6

# Canonical parallel-jaw gripper (Franka-Panda-like).
DEFAULT_MAX_OPENING = 0.080
DEFAULT_FINGER_LENGTH = 0.046
DEFAULT_ASSOC_DIST = 0.02


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    def norm(self):
        return float(np.sqrt(self.w ** 2 + self.x ** 2 + self.y ** 2 + self.z ** 2))

    def normalized(self):
        n = self.norm()
        if n < 1e-12:
            raise InvalidRotation("cannot normalize a zero quaternion")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def as_array(self):
        return np.array([self.w, self.x, self.y, self.z])

    @staticmethod
    def identity():
        return Quaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_array(a):
        a = np.asarray(a, dtype=float)
        return Quaternion(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @staticmethod
    def from_axis_angle(axis, angle):
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        h = 0.5 * angle
        s = np.sin(h)
        return Quaternion(float(np.cos(h)), *(s * axis))

    @staticmethod
    def from_matrix(m):
        """Rotation matrix -> quaternion with nonnegative w."""
        m = np.asarray(m, dtype=float)
        t = np.trace(m)
        if t > 0:
            s = np.sqrt(t + 1.0) * 2
            w = 0.25 * s
            x = (m[2, 1] - m[1, 2]) / s
            y = (m[0, 2] - m[2, 0]) / s
            z = (m[1, 0] - m[0, 1]) / s
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
            w = (m[2, 1] - m[1, 2]) / s
            x = 0.25 * s
            y = (m[0, 1] + m[1, 0]) / s
            z = (m[0, 2] + m[2, 0]) / s
        elif m[1, 1] > m[2, 2]:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
            w = (m[0, 2] - m[2, 0]) / s
            x = (m[0, 1] + m[1, 0]) / s
            y = 0.25 * s
            z = (m[1, 2] + m[2, 1]) / s
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
            w = (m[1, 0] - m[0, 1]) / s
            x = (m[0, 2] + m[2, 0]) / s
            y = (m[1, 2] + m[2, 1]) / s
            z = 0.25 * s
        q = Quaternion(w, x, y, z).normalized()
        return q if q.w >= 0 else Quaternion(-q.w, -q.x, -q.y, -q.z)

    def __mul__(self, other):
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def to_matrix(self):
        _check_unit(self)
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array([
            [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
        ])


def _check_unit(q):
    if abs(q.norm() - 1.0) > UNIT_TOL:
        raise InvalidRotation(f"quaternion norm {q.norm():.2e} is not unit "
                              f"within {UNIT_TOL}")


def rotate_point(q, v):
    """Apply the rotation q to a 3-vector. Preserves norm."""
    _check_unit(q)
    v = np.asarray(v, dtype=float)
    u = np.array([q.x, q.y, q.z])
    t = 2.0 * np.cross(u, v)
    return v + q.w * t + np.cross(u, t)


@dataclass(frozen=True)
class GraspPose:
    rotation: Quaternion
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float).reshape(3))
        if not np.all(np.isfinite(self.position)):
            raise ValueError("grasp position must be finite")
        _check_unit(self.rotation)

    @staticmethod
    def identity():
        return GraspPose(Quaternion.identity(), np.zeros(3))

    def as_array(self):
        """7-scalar layout [qw qx qy qz px py pz]."""
        return np.concatenate([self.rotation.as_array(), self.position])

    @staticmethod
    def from_array(a):
        a = np.asarray(a, dtype=float).reshape(7)
        return GraspPose(Quaternion.from_array(a[:4]).normalized(), a[4:])

    def compose(self, other):
        """Rigid composition self o other (apply other first)."""
        q = self.rotation * other.rotation
        p = rotate_point(self.rotation, other.position) + self.position
        return GraspPose(q.normalized(), p)

    def inverse(self):
        qi = Quaternion(self.rotation.w, -self.rotation.x,
                        -self.rotation.y, -self.rotation.z)
        return GraspPose(qi, -rotate_point(qi, self.position))

    def apply(self, pts):
        """Transform points (...,3) by this rigid pose."""
        pts = np.asarray(pts, dtype=float)
        return pts @ self.rotation.to_matrix().T + self.position


@dataclass(frozen=True)
class GripperModel:
    control_points: np.ndarray  # (6,3), gripper frame
    max_opening: float = DEFAULT_MAX_OPENING
    assoc_distance_d: float = DEFAULT_ASSOC_DIST

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=float)
        if cp.shape != (6, 3):
            raise ValueError(f"expected 6 control points, got shape {cp.shape}")
        object.__setattr__(self, "control_points", cp)
        half = self.max_opening / 2.0
        xs = cp[:4, 0]
        if not (np.sum(np.isclose(xs, -half)) == 2
                and np.sum(np.isclose(xs, half)) == 2):
            raise ValueError("fingertip rows must pair at x = +/- max_opening/2")
        if self.assoc_distance_d <= 0:
            raise ValueError("assoc_distance_d must be positive")

    @property
    def finger_length(self):
        return float(np.max(self.control_points[:, 2]))

    @property
    def center_offset(self):
        """Center grasp point in the gripper frame."""
        return self.control_points[:4].mean(axis=0)


def default_gripper(max_opening=DEFAULT_MAX_OPENING,
                    finger_length=DEFAULT_FINGER_LENGTH,
                    assoc_distance_d=DEFAULT_ASSOC_DIST):
    """Canonical gripper: 4 fingertip points, palm, base."""
    w = max_opening / 2.0
    f = finger_length
    cp = np.array([
        [+w, 0.0, f],
        [-w, 0.0, f],
        [+w, 0.0, f / 2.0],
        [-w, 0.0, f / 2.0],
        [0.0, 0.0, 0.0],
        [0.0, 0.0, -0.066],
    ])
    return GripperModel(cp, max_opening, assoc_distance_d)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray     # (N,3)
    frame: str = "object"  # "camera" | "object"

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise ValueError(f"point cloud must be (N,3) with N>=1, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        if self.frame not in ("camera", "object"):
            raise ValueError(f"unknown frame {self.frame!r}")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class TargetMask:
    member: np.ndarray  # (N,) bool

    def __post_init__(self):
        m = np.asarray(self.member, dtype=bool)
        if m.ndim != 1:
            raise ValueError("mask must be 1-D")
        object.__setattr__(self, "member", m)

    def __len__(self):
        return self.member.shape[0]

    @property
    def count(self):
        return int(self.member.sum())


def grasp_to_points(g, gm):
    """Posed control points: row i = R(q) cp_i + p. The h mapping."""
    return g.apply(gm.control_points)


def grasps_to_points(poses7, gm):
    """Vectorized h over an (n,7) pose array -> (n,6,3)."""
    poses7 = np.asarray(poses7, dtype=float)
    q = poses7[:, :4]
    s = (q * q).sum(axis=1)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((len(poses7), 3, 3))
    m[:, 0, 0] = w * w + x * x - y * y - z * z
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = w * w - x * x + y * y - z * z
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = w * w - x * x - y * y + z * z
    m /= s[:, None, None]
    return np.einsum("nij,kj->nki", m, gm.control_points) + poses7[:, None, 4:]


def center_grasp_point(g, gm):
    """Mean of the four posed fingertip control points."""
    return grasp_to_points(g, gm)[:4].mean(axis=0)


def center_grasp_points(poses7, gm):
    """Vectorized center grasp point over (n,7) -> (n,3)."""
    return grasps_to_points(poses7, gm)[:, :4].mean(axis=1)


def min_dist_to_area(g, cloud, mask, gm):
    """Distance from the center grasp point to the nearest masked point."""
    if len(mask) != len(cloud):
        raise ValueError("mask length does not match cloud")
    if mask.count == 0:
        raise EmptyTarget("target mask has no member points")
    c = center_grasp_point(g, gm)
    d = np.asarray(cloud.points, dtype=float)[mask.member] - c
    return float(np.sqrt((d * d).sum(axis=1).min()))


def is_on_target(g, cloud, mask, gm):
    """True iff the center grasp point is within d of some masked point."""
    return min_dist_to_area(g, cloud, mask, gm) <= gm.assoc_distance_d


def write_grasps(path, poses, scores=None):
    """Grasp interchange: JSON array of {"q":[w,x,y,z],"p":[x,y,z],"score"?}."""
    out = []
    for i, g in enumerate(poses):
        entry = {"q": [g.rotation.w, g.rotation.x, g.rotation.y, g.rotation.z],
                 "p": [float(v) for v in g.position]}
        if scores is not None:
            entry["score"] = float(scores[i])
        out.append(entry)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_grasps(path):
    """Inverse of write_grasps -> (poses, scores-or-None)."""
    with open(path) as fh:
        raw = json.load(fh)
    poses = [GraspPose(Quaternion.from_array(e["q"]).normalized(),
                       np.asarray(e["p"], dtype=float)) for e in raw]
    scores = [e.get("score") for e in raw]
    if all(s is None for s in scores):
        scores = None
    return poses, scores
