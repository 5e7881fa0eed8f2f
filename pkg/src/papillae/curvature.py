"""Discrete Gaussian and mean curvature on triangle meshes.

Gaussian curvature is the angle deficit divided by the mixed (Voronoi /
obtuse-safe) area of the vertex; mean curvature is the magnitude of the
cotangent Laplacian over four times that area, signed against the vertex
normal. Boundary and isolated vertices are marked invalid and excluded from
every statistic.
"""
import csv
import math
from dataclasses import dataclass, fields

import numpy as np

TWO_PI = 2.0 * math.pi


class BoundaryVertexError(ValueError):
    pass


@dataclass(frozen=True)
class CurvatureField:
    gaussian: np.ndarray
    mean: np.ndarray
    mixed_area: np.ndarray
    valid: np.ndarray
    deficit: np.ndarray

    def __len__(self):
        return self.valid.shape[0]


@dataclass(frozen=True)
class CurvatureFeatures:
    min_gaussian: float
    max_gaussian: float
    min_mean: float
    max_mean: float
    ratio_gaussian: float
    ratio_mean: float
    positive_gaussian: float
    positive_mean: float

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    def as_list(self):
        return [getattr(self, n) for n in self.names()]


def _face_geometry(vertices, faces):
    """Per-face corner angles, cotangents, areas and unnormalised normals."""
    p = [vertices[faces[:, c]] for c in range(3)]
    # edge opposite corner c runs between the other two corners
    e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]]
    cross = np.cross(e[2], -e[1])
    dbl_area = np.linalg.norm(cross, axis=1)
    angles = np.empty((faces.shape[0], 3))
    cots = np.empty((faces.shape[0], 3))
    for c in range(3):
        u = e[(c + 2) % 3]   # corner c -> next corner
        w = -e[(c + 1) % 3]  # corner c -> previous corner
        dot = np.einsum("ij,ij->i", u, w)
        angles[:, c] = np.arctan2(dbl_area, dot)
        with np.errstate(divide="ignore", invalid="ignore"):
            cots[:, c] = dot / dbl_area
    sq = np.stack([np.einsum("ij,ij->i", x, x) for x in e], axis=1)
    return angles, cots, 0.5 * dbl_area, cross, sq, e


def _valid_mask(mesh):
    return mesh.used & ~mesh.boundary_flags


def angle_deficits(mesh):
    """``2*pi`` minus the incident corner-angle sum, for every vertex."""
    angles, *_ = _face_geometry(mesh.vertices, mesh.faces)
    total = np.bincount(mesh.faces.ravel(), weights=angles.ravel(), minlength=mesh.n_vertices)
    return TWO_PI - total


def mixed_areas(mesh):
    """Per-vertex mixed area.

    Non-obtuse triangles contribute their Voronoi region
    ``(|PR|^2 cot Q + |PQ|^2 cot R) / 8``; an obtuse triangle gives half its
    area to the obtuse corner and a quarter to each other corner.
    """
    angles, cots, area, _, sq, _ = _face_geometry(mesh.vertices, mesh.faces)
    contrib = np.empty_like(angles)
    for c in range(3):
        nxt, prv = (c + 1) % 3, (c + 2) % 3
        # edge opposite prv joins c and nxt, edge opposite nxt joins c and prv
        contrib[:, c] = (sq[:, prv] * cots[:, prv] + sq[:, nxt] * cots[:, nxt]) / 8.0
    obtuse = angles > math.pi / 2
    any_obtuse = obtuse.any(axis=1)
    for c in range(3):
        contrib[any_obtuse, c] = np.where(obtuse[any_obtuse, c], area[any_obtuse] / 2, area[any_obtuse] / 4)
    return np.bincount(mesh.faces.ravel(), weights=contrib.ravel(), minlength=mesh.n_vertices)


def _check_interior(mesh, v):
    if not (0 <= v < mesh.n_vertices):
        raise IndexError(f"vertex {v} out of range")
    if not mesh.used[v]:
        raise BoundaryVertexError(f"vertex {v} is isolated")
    if mesh.boundary_flags[v]:
        raise BoundaryVertexError(f"vertex {v} is on the boundary")


def angle_deficit(mesh, v):
    _check_interior(mesh, v)
    return float(angle_deficits(mesh)[v])


def mixed_area(mesh, v):
    _check_interior(mesh, v)
    return float(mixed_areas(mesh)[v])


def _oriented_normals(mesh, face_normals, up):
    vn = np.zeros((mesh.n_vertices, 3))
    for c in range(3):
        np.add.at(vn, mesh.faces[:, c], face_normals)
    if up is not None and np.dot(face_normals.sum(axis=0), up) < 0:
        vn = -vn
    return vn


def compute_curvature(mesh, up=None):
    """Full :class:`CurvatureField` of ``mesh``.

    Face winding defines the outward side. If ``up`` is given and the summed
    face normals point away from it, all normals are flipped, so convex bumps
    on a surface seen from ``up`` get positive mean curvature.
    """
    valid = _valid_mask(mesh)
    if not valid.any():
        raise BoundaryVertexError("mesh has no interior vertex")
    angles, cots, area, cross, sq, e = _face_geometry(mesh.vertices, mesh.faces)
    f = mesh.faces
    n = mesh.n_vertices
    deficit = TWO_PI - np.bincount(f.ravel(), weights=angles.ravel(), minlength=n)
    A = mixed_areas(mesh)

    lap = np.zeros((n, 3))
    v = mesh.vertices
    for c in range(3):
        a, b = f[:, (c + 1) % 3], f[:, (c + 2) % 3]
        w = cots[:, c][:, None] * (v[a] - v[b])
        np.add.at(lap, a, w)
        np.add.at(lap, b, -w)
    normals = _oriented_normals(mesh, cross, None if up is None else np.asarray(up, dtype=float))

    gaussian = np.zeros(n)
    mean = np.zeros(n)
    ok = valid & (A > 0)
    gaussian[ok] = deficit[ok] / A[ok]
    sign = np.sign(np.einsum("ij,ij->i", lap, normals))
    sign[sign == 0] = 1.0
    mean[ok] = sign[ok] * np.linalg.norm(lap[ok], axis=1) / (4.0 * A[ok])
    return CurvatureField(gaussian, mean, A, ok, deficit)


def gaussian_curvature(mesh, up=None):
    return compute_curvature(mesh, up)


def mean_curvature(mesh, up=None):
    return compute_curvature(mesh, up)


def _sign_ratios(values, zero_tol):
    x = int(np.count_nonzero(values > zero_tol))
    y = int(np.count_nonzero(values < -zero_tol))
    ratio = min(x, y) / max(x, y) if max(x, y) else 0.0
    positive = x / (x + y) if x + y else 0.0
    return ratio, positive


def curvature_features(field, zero_tol=1e-8):
    """Min/max of K and H plus the sign-count ratios over valid vertices.

    ``ratio = min(x, y) / max(x, y)`` and ``positive = x / (x + y)`` where x
    and y count values above ``zero_tol`` and below ``-zero_tol``.
    """
    if not field.valid.any():
        raise ValueError("no valid vertex to aggregate")
    K = field.gaussian[field.valid]
    H = field.mean[field.valid]
    rk, pk = _sign_ratios(K, zero_tol)
    rh, ph = _sign_ratios(H, zero_tol)
    return CurvatureFeatures(float(K.min()), float(K.max()), float(H.min()), float(H.max()), rk, rh, pk, ph)


def write_curvature_csv(field, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id", "K", "H", "A_mixed", "valid"])
        for q in range(len(field)):
            w.writerow([q, repr(float(field.gaussian[q])), repr(float(field.mean[q])),
                        repr(float(field.mixed_area[q])), int(field.valid[q])])
