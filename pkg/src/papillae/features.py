"""Per-segment feature rows: baseline, curvature and topological columns."""
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curvature import CurvatureFeatures, compute_curvature, curvature_features
from .persistence import DiagramConfig, diagram
from .segmentation import height_feature, radius_feature
from .vectorize import TopoConfig, TopoFeatures, topo_features

logger = logging.getLogger(__name__)

BASELINE_COLUMNS = ("radius", "height")
CURVATURE_COLUMNS = tuple(CurvatureFeatures.names())
TOPO_COLUMNS = tuple(TopoFeatures.names())
FEATURE_COLUMNS = BASELINE_COLUMNS + CURVATURE_COLUMNS + TOPO_COLUMNS

FEATURE_GROUPS = {
    "baseline": BASELINE_COLUMNS,
    "curvature": CURVATURE_COLUMNS,
    "topological": TOPO_COLUMNS,
    "combined": FEATURE_COLUMNS,
}


@dataclass(frozen=True)
class FeatureConfig:
    radius_step: float = 10.0
    radius_start: float = 10.0
    radius_fraction: float = 0.9
    ransac_iters: int = 200
    ransac_tol: float = 15.0
    zero_tol: float = 1e-8
    diagram: DiagramConfig = field(default_factory=DiagramConfig)
    topo: TopoConfig = field(default_factory=TopoConfig)
    seed: int = 0


def baseline_features(segment, cfg=FeatureConfig()):
    radius = radius_feature(segment, cfg.radius_step, cfg.radius_start, cfg.radius_fraction)
    height = height_feature(segment, radius, cfg.ransac_iters, cfg.ransac_tol, cfg.seed)
    return [radius, height]


def segment_features(segment, cfg=FeatureConfig()):
    """The 22 canonical feature values of one segment, in FEATURE_COLUMNS order."""
    row = baseline_features(segment, cfg)
    field_ = compute_curvature(segment.mesh, up=segment.up)
    row += curvature_features(field_, cfg.zero_tol).as_list()
    dg = diagram(segment.mesh.vertices, cfg.diagram)
    row += [float(x) for x in topo_features(dg, cfg.topo).as_list()]
    return row


def _worker_init(numba_enabled):
    from . import _accel

    _accel.set_numba(numba_enabled)


def featurize_segments(segments, cfg=FeatureConfig(), workers=1):
    """Feature matrix (n_segments x 22). Rows keep the input order whatever
    the worker count."""
    if workers <= 1 or len(segments) <= 1:
        rows = [segment_features(s, cfg) for s in segments]
    else:
        from . import _accel

        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                                 initargs=(_accel.use_numba(),)) as pool:
            rows = list(pool.map(segment_features, segments, [cfg] * len(segments),
                                 chunksize=max(1, len(segments) // (4 * workers))))
    out = np.asarray(rows, dtype=np.float64).reshape(-1, len(FEATURE_COLUMNS))
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.isfinite(out).all(axis=1)))
        raise FloatingPointError(f"non-finite feature value in segment {getattr(segments[bad], 'id', bad)!r}")
    return out


def default_workers():
    return max(1, min(4, os.cpu_count() or 1))
