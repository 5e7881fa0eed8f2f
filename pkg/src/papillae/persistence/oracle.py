"""Reference persistence by reducing the full boundary matrix.

Every vertex, edge and triangle is materialised, so this is only usable for
a handful of points. It shares nothing with the fast path except the
distance matrix.
"""
from itertools import combinations

import numpy as np

from .rips import pairwise_distances


def naive_diagram(points, t_max=np.inf):
    """H0 and H1 bars ``(dim0, dim1)`` via textbook Z/2 column reduction.

    Bars still alive at the end get death ``inf``; zero-length bars are
    dropped.
    """
    pts = np.asarray(points, dtype=np.float64)
    D = pairwise_distances(pts)
    n = pts.shape[0]
    simplices = []
    for v in range(n):
        simplices.append((0.0, 0, (v,)))
    for a, b in combinations(range(n), 2):
        if D[a, b] <= t_max:
            simplices.append((D[a, b], 1, (a, b)))
    for a, b, c in combinations(range(n), 3):
        d = max(D[a, b], D[a, c], D[b, c])
        if d <= t_max:
            simplices.append((d, 2, (a, b, c)))
    simplices.sort()
    position = {s[2]: q for q, s in enumerate(simplices)}

    columns = []
    for value, dim, verts in simplices:
        if dim == 0:
            columns.append(set())
        else:
            columns.append({position[f] for f in combinations(verts, dim)})

    low_owner = {}
    paired = set()
    bars = {0: [], 1: []}
    for q, col in enumerate(columns):
        while col:
            low = max(col)
            if low not in low_owner:
                break
            col ^= columns[low_owner[low]]
        if col:
            low = max(col)
            low_owner[low] = q
            paired.update((low, q))
            birth = simplices[low][0]
            death = simplices[q][0]
            if death > birth:
                bars[simplices[low][1]].append((birth, death))
    for q, (value, dim, verts) in enumerate(simplices):
        if q not in paired and dim <= 1:
            bars[dim].append((value, np.inf))
    out = []
    for dim in (0, 1):
        arr = np.array(sorted(bars[dim]), dtype=np.float64).reshape(-1, 2)
        out.append(arr)
    return tuple(out)
