"""Simple parametric meshes: icospheres, height-field grids, cylinders."""
import math

import numpy as np

from .mesh import TriangleMesh


def icosphere(level=0, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Subdivided icosahedron projected onto a sphere, outward winding."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center, dtype=float)
    return TriangleMesh(v, np.array(faces))


def grid_faces(nx, ny):
    """Faces of an ``nx`` by ``ny`` vertex grid (row-major, x fastest),
    counter-clockwise seen from +z."""
    ix, iy = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1))
    a = (iy * nx + ix).ravel()
    b, c, d = a + 1, a + nx + 1, a + nx
    return np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])


def heightfield(xs, ys, z):
    """Triangulated height field ``z[iy, ix]`` over the grid ``xs`` x ``ys``."""
    X, Y = np.meshgrid(xs, ys)
    z = np.broadcast_to(np.asarray(z, dtype=float), X.shape)
    v = np.column_stack([X.ravel(), Y.ravel(), z.ravel()])
    return TriangleMesh(v, grid_faces(len(xs), len(ys)))


def square_grid(size, spacing, zfunc=None):
    """Height field on ``[-size/2, size/2]^2`` sampled every ``spacing``."""
    n = int(round(size / spacing)) + 1
    xs = np.linspace(-size / 2, size / 2, n)
    X, Y = np.meshgrid(xs, xs)
    z = np.zeros_like(X) if zfunc is None else zfunc(X, Y)
    return heightfield(xs, xs, z)


def cylinder(radius, height, n_around, n_up):
    """Open cylinder around the z axis with outward winding."""
    theta = np.linspace(0, 2 * math.pi, n_around, endpoint=False)
    zs = np.linspace(0, height, n_up)
    T, Z = np.meshgrid(theta, zs)
    v = np.column_stack([radius * np.cos(T.ravel()), radius * np.sin(T.ravel()), Z.ravel()])
    faces = []
    for r in range(n_up - 1):
        for q in range(n_around):
            a = r * n_around + q
            b = r * n_around + (q + 1) % n_around
            c, d = b + n_around, a + n_around
            faces += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, np.array(faces))


def fan(center, ring):
    """Closed fan of triangles around ``center`` through the ``ring`` points."""
    ring = np.asarray(ring, dtype=float)
    v = np.vstack([np.asarray(center, dtype=float)[None], ring])
    k = ring.shape[0]
    faces = [(0, 1 + q, 1 + (q + 1) % k) for q in range(k)]
    return TriangleMesh(v, np.array(faces))
