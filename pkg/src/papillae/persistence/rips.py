"""Vietoris-Rips persistence in dimensions 0 and 1 over Z/2.

A single reduction runs on one thread: columns are processed in a fixed
order and each one may depend on every column before it. Separate diagrams
share no state and can be computed concurrently.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..mesh import PointCloud, subsample
from . import _kernels


class SimplexCapError(RuntimeError):
    """The filtration would store more simplices than the configured cap."""


def pairwise_distances(points):
    points = np.asarray(points, dtype=np.float64)
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


@dataclass(frozen=True)
class RipsFiltration:
    """Edges of a Rips complex sorted by ``(length, i, j)``.

    Triangles are implicit: their filtration value is the longest side and
    they are enumerated from ``distances`` when needed.
    """

    n: int
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_len: np.ndarray
    t_max: float
    distances: np.ndarray = field(repr=False)

    @property
    def edges(self):
        return list(zip(self.edge_i.tolist(), self.edge_j.tolist(), self.edge_len.tolist()))

    def __len__(self):
        return int(self.edge_len.shape[0])


@dataclass(frozen=True)
class DiagramConfig:
    n_subsample: int = 1000
    seed: int = 0
    t_max: float | None = None
    max_simplices: int = 50_000_000
    sampling: str = "uniform"


@dataclass
class PersistenceDiagram:
    dim0: np.ndarray
    dim1: np.ndarray
    t_max: float = math.inf
    censored0: np.ndarray | None = None
    censored1: np.ndarray | None = None

    def __post_init__(self):
        self.dim0 = np.asarray(self.dim0, dtype=np.float64).reshape(-1, 2)
        self.dim1 = np.asarray(self.dim1, dtype=np.float64).reshape(-1, 2)
        if self.censored0 is None:
            self.censored0 = np.zeros(len(self.dim0), dtype=bool)
        if self.censored1 is None:
            self.censored1 = np.zeros(len(self.dim1), dtype=bool)
        self.censored0 = np.asarray(self.censored0, dtype=bool)
        self.censored1 = np.asarray(self.censored1, dtype=bool)

    def finite(self, dim):
        bars = self.dim0 if dim == 0 else self.dim1
        return bars[np.isfinite(bars[:, 1])]

    def to_json(self):
        def enc(bars):
            return [[float(b), "inf" if math.isinf(d) else float(d)] for b, d in bars]

        return json.dumps({
            "dim0": enc(self.dim0),
            "dim1": enc(self.dim1),
            "t_max": "inf" if math.isinf(self.t_max) else float(self.t_max),
            "censored": {"dim0": self.censored0.tolist(), "dim1": self.censored1.tolist()},
        })

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)

        def dec(bars):
            return np.array([[float(b), float(d)] for b, d in bars], dtype=np.float64).reshape(-1, 2)

        censored = obj.get("censored", {})
        return cls(dec(obj["dim0"]), dec(obj["dim1"]), float(obj["t_max"]),
                   np.array(censored.get("dim0", []), dtype=bool) if censored.get("dim0") else None,
                   np.array(censored.get("dim1", []), dtype=bool) if censored.get("dim1") else None)


def _as_array(points):
    if isinstance(points, PointCloud):
        return points.points
    return np.asarray(points, dtype=np.float64).reshape(-1, 3) if np.ndim(points) != 2 else np.asarray(points, dtype=np.float64)


def filtration_from_distances(D, t_max, max_simplices=50_000_000):
    D = np.ascontiguousarray(D, dtype=np.float64)
    n = D.shape[0]
    if not t_max > 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    iu, ju = np.triu_indices(n, k=1)
    lengths = D[iu, ju]
    keep = lengths <= t_max
    iu, ju, lengths = iu[keep], ju[keep], lengths[keep]
    if iu.shape[0] > max_simplices:
        raise SimplexCapError(
            f"{iu.shape[0]} edges exceed the simplex cap of {max_simplices}; lower t_max or n_subsample")
    order = np.lexsort((ju, iu, lengths))
    return RipsFiltration(n, iu[order].astype(np.int64), ju[order].astype(np.int64),
                          lengths[order], float(t_max), D)


def build_filtration(points, t_max, max_simplices=50_000_000):
    """All point pairs at distance <= ``t_max``, sorted by ``(length, i, j)``."""
    pts = _as_array(points)
    if pts.shape[0] < 2:
        raise ValueError("a Rips filtration needs at least 2 points")
    return filtration_from_distances(pairwise_distances(pts), t_max, max_simplices)


def _h0_from_filtration(filt):
    is_death = _kernels.death_edges(filt.n, filt.edge_i, filt.edge_j)
    deaths = filt.edge_len[is_death]
    n_inf = filt.n - int(is_death.sum())
    bars = np.concatenate([
        np.column_stack([np.zeros(deaths.shape[0]), deaths]),
        np.tile([0.0, np.inf], (n_inf, 1)),
    ])
    return bars, is_death


def compute_h0(points):
    """H0 bars of the full Rips filtration: the MST edge lengths plus one
    infinite bar. Zero-length bars (duplicate points) are dropped."""
    pts = _as_array(points)
    if pts.shape[0] == 0:
        raise ValueError("empty point set")
    if pts.shape[0] == 1:
        return np.array([[0.0, np.inf]])
    filt = build_filtration(pts, np.inf)
    bars, _ = _h0_from_filtration(filt)
    return bars[bars[:, 1] > bars[:, 0]]


def compute_h1(filt, skip=None, return_stats=False):
    """H1 bars ``(birth, death, censored)`` of a Rips filtration.

    Classes still alive at ``filt.t_max`` are truncated there and flagged as
    censored.
    """
    if skip is None:
        _, skip = _h0_from_filtration(filt)
    births, deaths, ess, stats = _kernels.reduce_h1(
        filt.distances, filt.edge_i, filt.edge_j, filt.edge_len, skip, filt.t_max)
    finite = np.column_stack([births, deaths])
    censored = np.zeros(finite.shape[0], dtype=bool)
    if ess.shape[0] and math.isfinite(filt.t_max):
        ess = ess[ess < filt.t_max]
        finite = np.concatenate([finite, np.column_stack([ess, np.full(ess.shape[0], filt.t_max)])])
        censored = np.concatenate([censored, np.ones(ess.shape[0], dtype=bool)])
    order = np.lexsort((finite[:, 1], finite[:, 0])) if finite.shape[0] else np.zeros(0, dtype=int)
    out = (finite[order], censored[order])
    if return_stats:
        return out + (stats,)
    return out


def diagram_from_distances(D, t_max=None, max_simplices=50_000_000):
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if n == 1:
        return PersistenceDiagram([[0.0, np.inf]], np.zeros((0, 2)), math.inf)
    if t_max is None:
        t_max = float(D.max())
        if t_max == 0.0:
            # all points coincide
            return PersistenceDiagram([[0.0, np.inf]], np.zeros((0, 2)), 0.0)
    filt = filtration_from_distances(D, t_max, max_simplices)
    h0, is_death = _h0_from_filtration(filt)
    h0 = h0[h0[:, 1] > h0[:, 0]]
    h0 = h0[np.lexsort((h0[:, 1], h0[:, 0]))]
    h1, censored = compute_h1(filt, skip=is_death)
    return PersistenceDiagram(h0, h1, filt.t_max, None, censored)


def diagram(points, cfg=None):
    """Subsample, then compute H0 and H1 of the Rips filtration.

    ``t_max`` defaults to the diameter of the (subsampled) cloud, so no H1
    bar is censored.
    """
    cfg = cfg or DiagramConfig()
    pts = _as_array(points)
    if pts.shape[0] == 0:
        raise ValueError("empty point cloud")
    cloud = subsample(PointCloud(pts), cfg.n_subsample, cfg.seed, method=cfg.sampling)
    return diagram_from_distances(pairwise_distances(cloud.points), cfg.t_max, cfg.max_simplices)
