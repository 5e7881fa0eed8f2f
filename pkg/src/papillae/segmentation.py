"""Candidate segments around local maxima, and the radius/height heuristics.

A segment is found by gathering the surface within ``r + delta`` of a seed
point, fitting the base plane with RANSAC, taking the vertex furthest from
that plane as the centre ``M`` and cutting the surface within ``r`` of ``M``.
"""
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .mesh import PointCloud, TriangleMesh, radius_query

logger = logging.getLogger(__name__)

LABELS = ("fungiform", "filiform", "none", "unlabeled")


class RansacError(ValueError):
    """Not enough points, or all points collinear."""


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True)
class Plane:
    """``{x : normal . x = offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float
    inlier_count: int

    def signed_distance(self, points):
        return np.asarray(points, dtype=np.float64) @ self.normal - self.offset

    def facing(self, point):
        """The same plane with its normal flipped, if needed, towards ``point``."""
        if float(np.dot(self.normal, point) - self.offset) < 0:
            return Plane(-self.normal, -self.offset, self.inlier_count)
        return self


@dataclass(frozen=True)
class ExtractionConfig:
    r: float = 450.0
    delta: float = 100.0
    ransac_iters: int = 200
    ransac_tol: float = 15.0
    seed: int = 0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("cut radius r must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")


@dataclass
class Segment:
    mesh: TriangleMesh
    center: np.ndarray
    seed_point: np.ndarray
    cut_radius: float
    center_index: int
    plane: Plane | None = None
    label: str = "unlabeled"
    participant: str = ""
    group_attrs: dict = field(default_factory=dict)
    id: str = ""

    def sidecar(self):
        out = {
            "id": self.id,
            "participant": self.participant,
            "label": self.label,
            "center": [float(x) for x in self.center],
            "cut_radius": float(self.cut_radius),
            "group_attrs": dict(self.group_attrs),
            "seed_point": [float(x) for x in self.seed_point],
        }
        if self.plane is not None:
            out["plane"] = {"normal": [float(x) for x in self.plane.normal],
                            "offset": float(self.plane.offset),
                            "inlier_count": int(self.plane.inlier_count)}
        return out

    @property
    def up(self):
        """Base-plane normal pointing towards the centre, or +z without a plane."""
        if self.plane is None:
            return np.array([0.0, 0.0, 1.0])
        return self.plane.facing(self.center).normal


def _orient(normal):
    # deterministic sign: first non-negligible component from z backwards is positive
    for c in (2, 1, 0):
        if abs(normal[c]) > 1e-12:
            return normal if normal[c] > 0 else -normal
    return normal


def _fit_lsq(points):
    centroid = points.mean(axis=0)
    _, s, vt = np.linalg.svd(points - centroid, full_matrices=False)
    normal = _orient(vt[-1] / np.linalg.norm(vt[-1]))
    return normal, float(normal @ centroid), s


def ransac_plane(points, iters=200, tol=15.0, seed=0):
    """Plane with the most points within ``tol``, refit by least squares.

    ``iters`` random 3-point hypotheses are scored; the best one (first on
    ties) is refit to its inliers and the inliers are recounted.
    """
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    if pts.shape[0] < 3:
        raise RansacError(f"plane fitting needs at least 3 points, got {pts.shape[0]}")
    scale = float(np.ptp(pts, axis=0).max()) or 1.0
    _, s, _ = np.linalg.svd(pts - pts.mean(axis=0), full_matrices=False)
    if s[1] <= 1e-9 * max(s[0], 1e-300) or s[0] == 0:
        raise RansacError("points are collinear; no unique plane")

    rng = np.random.default_rng(seed)
    n = pts.shape[0]
    idx = np.stack([rng.choice(n, 3, replace=False) for _ in range(iters)]) if iters else np.zeros((0, 3), int)
    a, b, c = pts[idx[:, 0]], pts[idx[:, 1]], pts[idx[:, 2]]
    normals = np.cross(b - a, c - a)
    norms = np.linalg.norm(normals, axis=1)
    good = norms > 1e-12 * scale * scale
    best_normal, best_offset, best_count = None, 0.0, -1
    if good.any():
        normals = normals[good] / norms[good, None]
        offsets = np.einsum("ij,ij->i", normals, a[good])
        counts = np.empty(normals.shape[0], dtype=np.int64)
        chunk = max(1, 2_000_000 // n)
        for q in range(0, normals.shape[0], chunk):
            d = np.abs(pts @ normals[q:q + chunk].T - offsets[q:q + chunk])
            counts[q:q + chunk] = (d <= tol).sum(axis=0)
        k = int(np.argmax(counts))
        best_normal, best_offset, best_count = normals[k], offsets[k], int(counts[k])
    if best_normal is None or best_count < 3:
        normal, offset, _ = _fit_lsq(pts)
        return Plane(normal, offset, int((np.abs(pts @ normal - offset) <= tol).sum()))
    inliers = np.abs(pts @ best_normal - best_offset) <= tol
    normal, offset, _ = _fit_lsq(pts[inliers])
    count = int((np.abs(pts @ normal - offset) <= tol).sum())
    if count < best_count:
        # the refit lost support; keep the hypothesis itself
        normal = _orient(best_normal)
        offset = best_offset if normal @ best_normal > 0 else -best_offset
        count = best_count
    return Plane(normal, float(offset), count)


def local_maximum(points, plane):
    """Index of the point furthest (unsigned) from ``plane``; lowest index on ties."""
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    if pts.shape[0] == 0:
        raise ValueError("empty point set")
    return int(np.argmax(np.abs(plane.signed_distance(pts))))


def extract_segment(surface, seed_point, cfg=ExtractionConfig()):
    """Cut the candidate segment around the local maximum nearest ``seed_point``."""
    P = np.asarray(seed_point, dtype=np.float64)
    ball = radius_query(surface.index, P, cfg.r + cfg.delta)
    if ball.shape[0] < 3:
        raise SegmentationError(f"only {ball.shape[0]} vertices within {cfg.r + cfg.delta} of the seed point")
    pts = surface.vertices[ball]
    plane = ransac_plane(pts, cfg.ransac_iters, cfg.ransac_tol, cfg.seed)
    m_global = int(ball[local_maximum(pts, plane)])
    M = surface.vertices[m_global]
    keep = radius_query(surface.index, M, cfg.r)
    sub, kept = surface.submesh(keep)
    center_index = int(np.searchsorted(kept, m_global))
    return Segment(sub, M.copy(), P.copy(), float(cfg.r), center_index, plane.facing(M))


def climb_segment(surface, seed_point, cfg=ExtractionConfig(), peak_radius=None, max_steps=10):
    """Extract, then re-seed until the centre is a local peak.

    A seed ball that clips the flank of a papilla puts ``M`` on the flank at
    the ball's rim, and a ball that misses an apex can settle on a lower
    spike beside it. While ``M`` is on the rim, or a vertex within
    ``peak_radius`` (default ``2 delta``) of ``M`` stands higher above the
    segment's base plane, extraction restarts from there.
    """
    rim = cfg.r + cfg.delta - 0.25 * cfg.delta
    peak_radius = 2 * cfg.delta if peak_radius is None else peak_radius
    P = np.asarray(seed_point, dtype=np.float64)
    seg = extract_segment(surface, P, cfg)
    for _ in range(max_steps):
        if np.linalg.norm(seg.center - P) >= rim:
            P = seg.center
        else:
            v = seg.mesh.vertices
            near = np.flatnonzero(np.linalg.norm(v - seg.center, axis=1) <= peak_radius)
            h = seg.plane.signed_distance(v[near])
            k = near[int(np.argmax(h))]
            if h.max() <= seg.plane.signed_distance(seg.center):
                break
            P = v[k]
        seg = extract_segment(surface, P, cfg)
    seg.seed_point = np.asarray(seed_point, dtype=np.float64).copy()
    return seg


def scan_segments(surface, cfg=ExtractionConfig(), max_segments=1000, dedupe_radius=None, climb=True):
    """Repeatedly extract segments from random seed vertices.

    Seeds are drawn without replacement from a pool of surface vertices.
    With ``climb`` each extraction is repeated from its own centre until
    the centre is stable. After a segment is accepted every vertex within
    ``r`` of its centre leaves the pool. A seed whose local maximum lands
    within ``dedupe_radius`` (default ``delta``) of an accepted centre is a
    duplicate; it removes the vertices within ``delta`` of the seed from the
    pool instead. Stops at ``max_segments`` or when the pool is empty.
    """
    dedupe = cfg.delta if dedupe_radius is None else dedupe_radius
    rng = np.random.default_rng(cfg.seed)
    pool = surface.used.copy()
    n_pool = int(pool.sum())
    order = rng.permutation(surface.n_vertices)
    cursor = 0
    accepted = []
    centers = []
    while len(accepted) < max_segments and n_pool > 0:
        while cursor < order.shape[0] and not pool[order[cursor]]:
            cursor += 1
        if cursor >= order.shape[0]:
            break
        v = int(order[cursor])
        P = surface.vertices[v]
        try:
            seg = climb_segment(surface, P, cfg) if climb else extract_segment(surface, P, cfg)
        except (SegmentationError, RansacError) as exc:
            logger.debug("seed %d skipped: %s", v, exc)
            gone = np.array([v])
        else:
            dup = False
            if centers:
                dist = np.linalg.norm(np.asarray(centers) - seg.center, axis=1)
                dup = bool((dist <= dedupe).any())
            if dup:
                gone = radius_query(surface.index, P, cfg.delta)
            else:
                seg.id = f"seg{len(accepted):05d}"
                accepted.append(seg)
                centers.append(seg.center)
                gone = radius_query(surface.index, seg.center, cfg.r)
            gone = np.union1d(gone, [v])
        n_pool -= int(pool[gone].sum())
        pool[gone] = False
    return accepted


def _segment_points(segment):
    if isinstance(segment, Segment):
        return segment.mesh.vertices, segment.center
    pts, center = segment
    return np.asarray(pts, dtype=np.float64), np.asarray(center, dtype=np.float64)


def radius_feature(segment, step=10.0, start=10.0, fraction=0.9, cap=None):
    """Smallest radius in ``start, start+step, ...`` whose ball around the
    centre holds at least ``fraction`` of the segment vertices.

    ``segment`` is a :class:`Segment` or a ``(points, center)`` pair. The
    search stops at ``cap`` (the cut radius for segments) if given.
    """
    pts, center = _segment_points(segment)
    if pts.shape[0] == 0:
        raise ValueError("empty segment")
    if cap is None and isinstance(segment, Segment):
        cap = segment.cut_radius
    d = np.sort(np.linalg.norm(pts - center, axis=1))
    need = int(np.ceil(fraction * pts.shape[0] - 1e-9))
    # points computed at exactly a step distance may land a few ulps outside
    target = d[max(need, 1) - 1] * (1 - 1e-12)
    i = start
    while i < target:
        i += step
    if cap is not None:
        i = min(i, cap)
    return float(i)


def height_feature(segment, radius, iters=200, tol=15.0, seed=0):
    """Distance from the centre to the RANSAC base plane of the region
    within ``radius`` of it."""
    pts, center = _segment_points(segment)
    region = pts[np.linalg.norm(pts - center, axis=1) <= radius]
    if region.shape[0] < 3:
        raise RansacError(f"only {region.shape[0]} points within {radius} of the centre")
    plane = ransac_plane(region, iters, tol, seed)
    return float(abs(plane.signed_distance(center)))


# --------------------------------------------------------------------------
# on-disk format: <id>.ply plus <id>.json sidecar


def write_segment(segment, directory):
    from .surface_io import write_ply

    os.makedirs(directory, exist_ok=True)
    base = os.path.join(directory, segment.id or "segment")
    write_ply(segment.mesh, base + ".ply", binary=True)
    with open(base + ".json", "w") as fh:
        json.dump(segment.sidecar(), fh, indent=1, sort_keys=True)
    return base


def read_segment(json_path):
    from .surface_io import read_ply

    with open(json_path) as fh:
        meta = json.load(fh)
    mesh = read_ply(os.path.splitext(json_path)[0] + ".ply")
    center = np.asarray(meta["center"], dtype=np.float64)
    center_index = int(np.argmin(np.linalg.norm(mesh.vertices - center, axis=1)))
    plane = None
    if "plane" in meta:
        plane = Plane(np.asarray(meta["plane"]["normal"], dtype=np.float64), float(meta["plane"]["offset"]),
                      int(meta["plane"]["inlier_count"]))
    label = meta.get("label", "unlabeled")
    if label not in LABELS:
        raise SegmentationError(f"{json_path}: unknown label {label!r}")
    return Segment(mesh, center, np.asarray(meta.get("seed_point", center), dtype=np.float64),
                   float(meta["cut_radius"]), center_index, plane, label,
                   str(meta.get("participant", "")), dict(meta.get("group_attrs", {})), str(meta.get("id", "")))


def read_segments(directory):
    files = set(os.listdir(directory))
    names = sorted(f for f in files if f.endswith(".json") and f[:-5] + ".ply" in files)
    return [read_segment(os.path.join(directory, f)) for f in names]
