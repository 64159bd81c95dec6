"""Dataset curation and the binary record container.

Curation, per object and render: render a partial-view cloud, downsample to
n_points, pick K query points by FPS, draw a radius ~ U[0, R] per query
(R = bbox diagonal), build the target mask, and keep the oracle-stable grasps
whose center grasp point lies within d of the masked points. Records with no
surviving grasp are dropped (counted in stats).

Storage is float32 and clouds/grasps live in the camera frame (camera pose
recorded per record). All acceptance gates are evaluated on the float32
round-tripped values, so `verify-dataset` re-checks reproduce them exactly.

Container layout (little-endian), magic "CONG", version 1:
  header: magic, u32 version, u64 record count, u32 n_points, f32 d, f32 mu,
          u64 global seed
  record: u32 id_len, id utf8, u32 render_index, u64 provenance_seed,
          f32[7] camera pose, u32 n, f32[n*3] cloud, bitset mask,
          u32 query_index, f32 radius, u32 k, f32[k*7] grasps
"""

import logging
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import oracle, scene
from .errors import ConfigError, DataFormatError, InvariantViolation
from .geometry import (GraspPose, PointCloud, TargetMask, center_grasp_points,
                       default_gripper)
from .seeds import derive_int, derive_rng

log = logging.getLogger(__name__)

MAGIC = b"CONG"
VERSION = 1

CAMERA_DIST_FACTORS = (1.4, 2.2)  # x bbox diagonal
CAMERA_DIST_MIN = 0.12


@dataclass(frozen=True)
class CurationConfig:
    renders_per_object: int = 100
    n_points: int = 1024
    n_queries: int = 50
    assoc_dist: float = 0.02
    mu: float = 0.5
    candidates_per_object: int = 2000
    resolution: int = scene.DEFAULT_RESOLUTION
    focal: float = scene.DEFAULT_FOCAL
    seed: int = 0

    def __post_init__(self):
        if min(self.renders_per_object, self.n_points, self.n_queries,
               self.candidates_per_object) < 1:
            raise ConfigError("curation counts must be >= 1")
        if self.assoc_dist <= 0:
            raise ConfigError("assoc_dist must be positive")


@dataclass
class DatasetRecord:
    object_id: str
    render_index: int
    camera_pose: np.ndarray   # (7,) f32, camera -> object frame
    cloud: np.ndarray         # (n,3) f32, camera frame
    mask: np.ndarray          # (n,) bool
    query_index: int
    radius: float
    grasps: np.ndarray        # (k,7) f32, camera frame
    provenance_seed: int

    def cloud_obj(self):
        return PointCloud(self.cloud.astype(np.float64), frame="camera")

    def mask_obj(self):
        return TargetMask(self.mask)

    def camera_pose_obj(self):
        return GraspPose.from_array(self.camera_pose.astype(np.float64))

    def grasp_poses(self):
        return [GraspPose.from_array(row) for row in
                self.grasps.astype(np.float64)]


def bbox_diagonal(mesh):
    """Length of the axis-aligned bounding-box diagonal."""
    ext = mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)
    return float(np.linalg.norm(ext))


def build_area(cloud, query_index, radius):
    """Mask of points within radius of the query point (query always member)."""
    pts = np.asarray(cloud.points, dtype=float)
    if not 0 <= query_index < len(pts):
        raise ValueError(f"query index {query_index} out of range")
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    d = pts - pts[query_index]
    member = (d * d).sum(axis=1) <= radius * radius
    member[query_index] = True
    return TargetMask(member)


def associate_grasps(labeled, cloud, mask, gm):
    """Stable grasps whose center point is within d of a masked point."""
    if mask.count == 0:
        return []
    kept = []
    stable = [g for g, lab in labeled if lab.stable]
    if not stable:
        return kept
    poses7 = np.stack([g.as_array() for g in stable])
    centers = center_grasp_points(poses7, gm)
    pts = np.asarray(cloud.points, dtype=float)[mask.member]
    for g, c in zip(stable, centers):
        d2 = ((pts - c) ** 2).sum(axis=1).min()
        if d2 <= gm.assoc_distance_d ** 2:
            kept.append(g)
    return kept


def _camera_range(mesh):
    r = bbox_diagonal(mesh)
    lo = max(CAMERA_DIST_MIN, CAMERA_DIST_FACTORS[0] * r)
    hi = max(lo, CAMERA_DIST_FACTORS[1] * r)
    return (lo, hi)


def curate_object(mesh, cfg, gm=None):
    """All records for one object; deterministic per (cfg.seed, object_id).

    Returns (records, n_dropped) where n_dropped counts zero-grasp areas.
    """
    gm = gm or default_gripper(assoc_distance_d=cfg.assoc_dist)
    oid = mesh.object_id
    labeled = oracle.sample_labeled_grasps(
        mesh, gm, cfg.mu, cfg.candidates_per_object,
        seed=derive_int(cfg.seed, "oracle", oid))
    stable7 = np.array([g.as_array() for g, lab in labeled if lab.stable])
    if len(stable7) == 0:
        log.warning("object %s admits no stable grasps; skipping", oid)
        return [], 0
    diag = bbox_diagonal(mesh)

    records = []
    dropped = 0
    for render_index in range(cfg.renders_per_object):
        rng = derive_rng(cfg.seed, "render", oid, render_index)
        cam = scene.sample_camera(rng, _camera_range(mesh),
                                  width=cfg.resolution, height=cfg.resolution,
                                  focal=cfg.focal)
        depth = scene.render_depth(mesh, cam)
        if not (depth.depth > 0).any():
            log.warning("render %s/%d saw nothing; skipping", oid, render_index)
            continue
        cloud_w = scene.depth_to_cloud(depth, cam)
        cloud_w = scene.downsample(cloud_w, cfg.n_points,
                                   seed=derive_int(cfg.seed, "fill", oid,
                                                   render_index))

        cam_pose32 = cam.pose.as_array().astype(np.float32)
        cam_pose = GraspPose.from_array(cam_pose32.astype(np.float64))
        world_from_cam = cam_pose
        cam_from_world = cam_pose.inverse()

        cloud32 = cam.pose.inverse().apply(cloud_w.points).astype(np.float32)
        cloud_cam = PointCloud(cloud32.astype(np.float64), frame="camera")

        # stable pool, expressed and quantized in the camera frame
        grasp_cam32 = np.stack(
            [cam_from_world.compose(GraspPose.from_array(p)).as_array()
             for p in stable7]).astype(np.float32)
        cam_poses = [GraspPose.from_array(row)
                     for row in grasp_cam32.astype(np.float64)]
        centers = center_grasp_points(grasp_cam32.astype(np.float64), gm)

        qk = min(cfg.n_queries, len(cloud_cam))
        queries = scene.fps(cloud_cam.points, qk,
                            scene.centroid_seed_index(cloud_cam.points))
        relabel_ok = {}
        for qi in queries:
            radius = float(rng.uniform(0.0, diag))
            radius32 = float(np.float32(radius))
            mask = build_area(cloud_cam, int(qi), radius32)
            pts = cloud_cam.points[mask.member]
            kept = []
            for j in range(len(cam_poses)):
                d2 = ((pts - centers[j]) ** 2).sum(axis=1).min()
                if d2 > gm.assoc_distance_d ** 2:
                    continue
                if j not in relabel_ok:
                    g_obj = world_from_cam.compose(cam_poses[j])
                    relabel_ok[j] = oracle.label_grasp(mesh, g_obj, gm,
                                                       cfg.mu).stable
                if relabel_ok[j]:
                    kept.append(j)
            if not kept:
                dropped += 1
                continue
            records.append(DatasetRecord(
                object_id=oid,
                render_index=render_index,
                camera_pose=cam_pose32,
                cloud=cloud32,
                mask=mask.member.copy(),
                query_index=int(qi),
                radius=radius32,
                grasps=grasp_cam32[kept],
                provenance_seed=derive_int(cfg.seed, "render", oid,
                                           render_index),
            ))
    return records, dropped


def _curate_one(args):
    entry, mesh, cfg = args
    try:
        return entry["object_id"], curate_object(mesh, cfg)
    except Exception as exc:  # oracle-unsupported meshes are skipped, logged
        log.warning("skipping object %s: %s", entry["object_id"], exc)
        return entry["object_id"], ([], 0)


def curate_corpus(corpus, cfg, workers=1):
    """Curate every (entry, mesh) pair; returns (records, stats dict)."""
    jobs = [(entry, mesh, cfg) for entry, mesh in corpus]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_curate_one, jobs))
    else:
        results = [_curate_one(j) for j in jobs]
    records = []
    dropped = 0
    for _, (recs, drop) in results:
        records.extend(recs)
        dropped += drop
    return records, {"dropped_zero_grasp_areas": dropped}


def split(records, test_fraction, seed):
    """Object-disjoint (train, test) split; every record follows its object."""
    if not 0 < test_fraction < 1:
        raise ConfigError("test_fraction must be in (0, 1)")
    ids = sorted({r.object_id for r in records})
    if len(ids) < 2:
        raise ConfigError("cannot split a dataset with fewer than 2 objects")
    rng = derive_rng(seed, "split")
    order = list(rng.permutation(ids))
    n_test = min(len(ids) - 1, max(1, round(test_fraction * len(ids))))
    test_ids = set(order[:n_test])
    train = [r for r in records if r.object_id not in test_ids]
    test = [r for r in records if r.object_id in test_ids]
    return train, test


# ---------------------------------------------------------------------------
# Binary container
# ---------------------------------------------------------------------------

def write_dataset(path, records, n_points, assoc_dist, mu, seed):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQIffQ", VERSION, len(records), n_points,
                             assoc_dist, mu, seed & 0xFFFFFFFFFFFFFFFF))
        for r in records:
            ident = r.object_id.encode()
            fh.write(struct.pack("<I", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<IQ", r.render_index, r.provenance_seed))
            fh.write(np.asarray(r.camera_pose, dtype="<f4").tobytes())
            n = len(r.cloud)
            fh.write(struct.pack("<I", n))
            fh.write(np.asarray(r.cloud, dtype="<f4").tobytes())
            fh.write(np.packbits(r.mask, bitorder="little").tobytes())
            fh.write(struct.pack("<If", r.query_index, r.radius))
            fh.write(struct.pack("<I", len(r.grasps)))
            fh.write(np.asarray(r.grasps, dtype="<f4").tobytes())


class _Reader:
    def __init__(self, fh):
        self.fh = fh

    def take(self, n, what):
        data = self.fh.read(n)
        if len(data) != n:
            raise DataFormatError(f"truncated while reading {what}",
                                  offset=self.fh.tell())
        return data

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_dataset(path):
    """Returns (records, meta dict). Raises DataFormatError on bad content."""
    with open(path, "rb") as fh:
        r = _Reader(fh)
        if r.take(4, "magic") != MAGIC:
            raise DataFormatError("bad magic; not a dataset container", offset=0)
        version, count, n_points, d, mu, seed = r.unpack("<IQIffQ", "header")
        if version != VERSION:
            raise DataFormatError(f"unsupported container version {version}",
                                  offset=4)
        meta = {"n_points": n_points, "assoc_dist": float(d), "mu": float(mu),
                "seed": int(seed)}
        records = []
        for i in range(count):
            (id_len,) = r.unpack("<I", f"record {i} id length")
            if id_len > 4096:
                raise DataFormatError(f"implausible id length {id_len}",
                                      offset=fh.tell())
            oid = r.take(id_len, f"record {i} id").decode()
            render_index, pseed = r.unpack("<IQ", f"record {i} provenance")
            cam = np.frombuffer(r.take(28, f"record {i} camera"), dtype="<f4")
            (n,) = r.unpack("<I", f"record {i} cloud size")
            if n < 1 or n > 10_000_000:
                raise DataFormatError(f"implausible cloud size {n}",
                                      offset=fh.tell())
            cloud = np.frombuffer(r.take(12 * n, f"record {i} cloud"),
                                  dtype="<f4").reshape(n, 3)
            mask_bytes = r.take((n + 7) // 8, f"record {i} mask")
            mask = np.unpackbits(np.frombuffer(mask_bytes, dtype=np.uint8),
                                 count=n, bitorder="little").astype(bool)
            qi, radius = r.unpack("<If", f"record {i} query")
            (k,) = r.unpack("<I", f"record {i} grasp count")
            if k > 10_000_000:
                raise DataFormatError(f"implausible grasp count {k}",
                                      offset=fh.tell())
            grasps = np.frombuffer(r.take(28 * k, f"record {i} grasps"),
                                   dtype="<f4").reshape(k, 7)
            records.append(DatasetRecord(
                object_id=oid, render_index=render_index,
                camera_pose=cam.copy(), cloud=cloud.copy(), mask=mask,
                query_index=qi, radius=radius, grasps=grasps.copy(),
                provenance_seed=pseed))
        trailing = fh.read(1)
        if trailing:
            raise DataFormatError("trailing bytes after final record",
                                  offset=fh.tell() - 1)
    return records, meta


# ---------------------------------------------------------------------------
# Stats and verification
# ---------------------------------------------------------------------------

def compute_stats(records, meshes=None, extra=None):
    """DatasetStats as a JSON-ready dict; r/R histogram needs meshes."""
    out = {
        "n_records": len(records),
        "n_objects": len({r.object_id for r in records}),
        "mean_grasps_per_area": (float(np.mean([len(r.grasps) for r in records]))
                                 if records else 0.0),
    }
    if meshes is not None and records:
        diag = {oid: bbox_diagonal(m) for oid, m in meshes.items()}
        ratios = [r.radius / diag[r.object_id] for r in records
                  if r.object_id in diag]
        hist, edges = np.histogram(ratios, bins=10, range=(0.0, 1.0))
        out["radius_over_R_histogram"] = {
            "bin_edges": [round(float(e), 3) for e in edges],
            "counts": [int(c) for c in hist],
        }
    if extra:
        out.update(extra)
    return out


def verify_records(records, meta, meshes, gm=None):
    """Re-check every stored invariant; returns a list of violation strings."""
    gm = gm or default_gripper(assoc_distance_d=meta["assoc_dist"])
    problems = []
    for i, r in enumerate(records):
        tag = f"record {i} ({r.object_id}/r{r.render_index}/q{r.query_index})"
        cloud = r.cloud_obj()
        mask = r.mask_obj()
        if len(mask) != len(cloud):
            problems.append(f"{tag}: mask length mismatch")
            continue
        if mask.count == 0:
            problems.append(f"{tag}: empty mask")
            continue
        if not (0 <= r.query_index < len(cloud)):
            problems.append(f"{tag}: query index out of range")
            continue
        if not r.mask[r.query_index]:
            problems.append(f"{tag}: query point not in mask")
        expected = build_area(cloud, r.query_index, r.radius)
        if not np.array_equal(expected.member, r.mask):
            problems.append(f"{tag}: mask does not match radius ball")
        if len(r.grasps) == 0:
            problems.append(f"{tag}: no grasps stored")
            continue
        centers = center_grasp_points(r.grasps.astype(np.float64), gm)
        pts = cloud.points[mask.member]
        for j, c in enumerate(centers):
            d2 = ((pts - c) ** 2).sum(axis=1).min()
            if d2 > gm.assoc_distance_d ** 2:
                problems.append(f"{tag}: grasp {j} off-target "
                                f"({np.sqrt(d2):.4f} m)")
        mesh = meshes.get(r.object_id)
        if mesh is None:
            problems.append(f"{tag}: object mesh not in corpus")
            continue
        world_from_cam = r.camera_pose_obj()
        for j, g in enumerate(r.grasp_poses()):
            lab = oracle.label_grasp(mesh, world_from_cam.compose(g), gm,
                                     meta["mu"])
            if not lab.stable:
                problems.append(f"{tag}: grasp {j} fails oracle "
                                f"({lab.reason})")
    return problems
