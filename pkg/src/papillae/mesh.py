"""Geometry containers, exact neighbour queries and subsampling.

Coordinates are micrometres throughout and are never rescaled.
"""
import logging
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)


class MeshError(ValueError):
    """Invalid mesh contents (bad indices, degenerate faces, empty mesh)."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class PointCloud:
    """An immutable (n, 3) array of finite coordinates."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (n, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        self.points = _frozen(pts, np.float64)

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return f"PointCloud(n={len(self)})"


class SpatialIndex:
    """Exact radius and k-nearest queries over a fixed point set.

    The tree only prunes; every radius hit is re-checked against the
    Euclidean norm so the result is exactly ``{i : |p_i - c| <= r}``.
    """

    def __init__(self, points):
        self.points = np.asarray(points, dtype=np.float64)
        self._tree = cKDTree(self.points)

    def __len__(self):
        return self.points.shape[0]

    def radius(self, center, r):
        if r < 0:
            raise ValueError("radius must be non-negative")
        center = np.asarray(center, dtype=np.float64)
        slack = r * 1e-9 + 1e-12
        cand = np.asarray(self._tree.query_ball_point(center, r + slack), dtype=np.int64)
        if cand.size == 0:
            return cand
        d = np.linalg.norm(self.points[cand] - center, axis=1)
        return np.sort(cand[d <= r])

    def knn(self, center, k):
        k = min(int(k), len(self))
        dist, idx = self._tree.query(np.asarray(center, dtype=np.float64), k=k)
        return np.atleast_1d(idx), np.atleast_1d(dist)


def radius_query(index, center, r):
    """Indices (ascending) of the points within Euclidean distance ``r`` of ``center``."""
    return index.radius(center, r)


def _boundary_flags(n_vertices, faces):
    flags = np.zeros(n_vertices, dtype=bool)
    if faces.shape[0] == 0:
        return flags
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges.sort(axis=1)
    keys = edges[:, 0] * np.int64(n_vertices) + edges[:, 1]
    uniq, counts = np.unique(keys, return_counts=True)
    once = uniq[counts == 1]
    flags[once // n_vertices] = True
    flags[once % n_vertices] = True
    return flags


class TriangleMesh:
    """Indexed triangle mesh with per-vertex boundary flags.

    A vertex is on the boundary iff it touches an edge used by exactly one
    face. Vertices that belong to no face are not boundary vertices; they
    are simply isolated.
    """

    def __init__(self, vertices, faces):
        v = np.asarray(vertices, dtype=np.float64)
        if v.size == 0:
            v = v.reshape(0, 3)
        f = np.asarray(faces, dtype=np.int64)
        if f.size == 0:
            f = f.reshape(0, 3)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must have shape (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must have shape (m, 3), got {f.shape}")
        if not np.all(np.isfinite(v)):
            raise MeshError("vertex coordinates must be finite")
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            bad = int(np.argmax((f < 0).any(axis=1) | (f >= v.shape[0]).any(axis=1)))
            raise MeshError(f"face {bad} has a vertex index out of range 0..{v.shape[0] - 1}: {f[bad].tolist()}")
        degenerate = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        if degenerate.any():
            raise MeshError(f"face {int(np.argmax(degenerate))} repeats a vertex index")
        self.vertices = _frozen(v, np.float64)
        self.faces = _frozen(f, np.int64)
        self.boundary_flags = _frozen(_boundary_flags(v.shape[0], f), bool)

    def __repr__(self):
        return f"TriangleMesh(vertices={self.n_vertices}, faces={self.n_faces})"

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    @cached_property
    def index(self):
        return SpatialIndex(self.vertices)

    @cached_property
    def face_areas(self):
        v = self.vertices
        f = self.faces
        cr = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        return 0.5 * np.linalg.norm(cr, axis=1)

    @property
    def area(self):
        return float(self.face_areas.sum())

    @cached_property
    def used(self):
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.faces.ravel()] = True
        return used

    def cloud(self):
        return PointCloud(self.vertices)

    @cached_property
    def vertex_faces(self):
        """CSR map vertex -> incident faces as ``(indptr, face_ids)``."""
        flat = self.faces.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.n_vertices)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return indptr, order // 3

    def submesh(self, keep):
        """Mesh on the selected vertices with every face whose three corners
        are all kept. Returns ``(mesh, kept_indices)``."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            mask = keep
            kept = np.flatnonzero(mask)
        else:
            kept = np.unique(keep.astype(np.int64))
            mask = np.zeros(self.n_vertices, dtype=bool)
            mask[kept] = True
        if kept.shape[0] * 8 < self.n_vertices:
            indptr, face_ids = self.vertex_faces
            cand = np.unique(np.concatenate([face_ids[indptr[v]:indptr[v + 1]] for v in kept])) \
                if kept.shape[0] else np.zeros(0, dtype=np.int64)
            cand = cand[mask[self.faces[cand]].all(axis=1)]
            faces = self.faces[cand]
        else:
            faces = self.faces[mask[self.faces].all(axis=1)]
        remap = np.full(self.n_vertices, -1, dtype=np.int64)
        remap[kept] = np.arange(kept.shape[0])
        return TriangleMesh(self.vertices[kept], remap[faces]), kept

    def transformed(self, rotation=None, translation=None, scale=1.0):
        v = self.vertices * scale
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return TriangleMesh(v, self.faces)


def subsample_indices(n_points, n, seed=0, method="uniform", points=None):
    if n < 1:
        raise ValueError("subsample size must be at least 1")
    if n_points <= n:
        return np.arange(n_points)
    if method == "uniform":
        rng = np.random.default_rng(seed)
        return np.sort(rng.choice(n_points, size=n, replace=False))
    if method == "farthest":
        if points is None:
            raise ValueError("farthest-point sampling needs the points")
        pts = np.asarray(points, dtype=np.float64)
        rng = np.random.default_rng(seed)
        chosen = np.empty(n, dtype=np.int64)
        chosen[0] = rng.integers(n_points)
        dist = np.linalg.norm(pts - pts[chosen[0]], axis=1)
        for q in range(1, n):
            chosen[q] = int(np.argmax(dist))
            dist = np.minimum(dist, np.linalg.norm(pts - pts[chosen[q]], axis=1))
        return np.sort(chosen)
    raise ValueError(f"unknown sampling method {method!r}")


def subsample(cloud, n, seed=0, method="uniform"):
    """At most ``n`` points of ``cloud``; unchanged if it already has <= n.

    ``method="uniform"`` draws without replacement; ``"farthest"`` is greedy
    farthest-point sampling from a seeded start.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    idx = subsample_indices(pts.shape[0], n, seed, method, pts)
    if idx.shape[0] == pts.shape[0]:
        return cloud if isinstance(cloud, PointCloud) else PointCloud(pts)
    return PointCloud(pts[idx])
