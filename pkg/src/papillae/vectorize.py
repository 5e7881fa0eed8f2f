"""One-number summaries of persistence diagrams.

Each summary takes the finite bars of one homology dimension as an (n, 2)
array of ``(birth, death)``; the infinite H0 bar is removed beforehand.
"""
import math
from dataclasses import dataclass, fields

import numpy as np

SQRT2_2 = math.sqrt(2.0) / 2.0


def _bars(bars):
    b = np.asarray(bars, dtype=np.float64).reshape(-1, 2)
    return b[np.isfinite(b[:, 1])]


def persistent_entropy(bars):
    """Shannon entropy (nats) of the normalised bar lengths; 0 for no bars."""
    b = _bars(bars)
    lengths = b[:, 1] - b[:, 0]
    lengths = lengths[lengths > 0]
    total = lengths.sum()
    if lengths.shape[0] == 0 or total <= 0:
        return 0.0
    p = lengths / total
    return float(-(p * np.log(p)).sum())


def short_bars(bars, threshold=10.0):
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    b = _bars(bars)
    return int(np.count_nonzero((b[:, 1] - b[:, 0]) < threshold))


def wasserstein_amplitude(bars, p=2.0):
    if p < 1:
        raise ValueError("order p must be >= 1")
    b = _bars(bars)
    if b.shape[0] == 0:
        return 0.0
    lengths = b[:, 1] - b[:, 0]
    return float(SQRT2_2 * np.sum(lengths ** p) ** (1.0 / p))


def bottleneck_amplitude(bars):
    b = _bars(bars)
    if b.shape[0] == 0:
        return 0.0
    return float(SQRT2_2 * np.max(b[:, 1] - b[:, 0]))


def first_landscape(bars, grid):
    """Top landscape layer: the largest tent value at each grid point."""
    b = _bars(bars)
    t = np.asarray(grid, dtype=np.float64)[:, None]
    tents = np.minimum(t - b[:, 0], b[:, 1] - t)
    return np.clip(tents, 0.0, None).max(axis=1) if b.shape[0] else np.zeros(t.shape[0])


def landscape_amplitude(bars, grid_points=100):
    """Functional L2 norm of the first landscape on a uniform grid over
    ``[min birth, max death]`` (rectangle rule)."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    b = _bars(bars)
    if b.shape[0] == 0:
        return 0.0
    lo, hi = float(b[:, 0].min()), float(b[:, 1].max())
    if hi <= lo:
        return 0.0
    grid = np.linspace(lo, hi, grid_points)
    step = (hi - lo) / (grid_points - 1)
    lam = first_landscape(b, grid)
    return float(np.sqrt(np.sum(lam ** 2) * step))


@dataclass(frozen=True)
class ImageConfig:
    bins: int = 100
    sigma_scale: float = 0.1
    padding: float = 0.05


def persistence_image(bars, cfg=ImageConfig()):
    """Raster of persistence-weighted, unnormalised Gaussians in
    (birth, persistence) coordinates. Returns ``(image, birth_grid, pers_grid)``."""
    if cfg.bins < 1:
        raise ValueError("bins must be >= 1")
    b = _bars(bars)
    pers = b[:, 1] - b[:, 0]
    b, pers = b[pers > 0], pers[pers > 0]
    if b.shape[0] == 0:
        return np.zeros((cfg.bins, cfg.bins)), None, None
    pmax = float(pers.max())
    sigma = cfg.sigma_scale * pmax
    x_lo, x_hi = float(b[:, 0].min()), float(b[:, 0].max())
    if x_hi - x_lo < pmax:
        # narrow birth range: widen symmetrically to the persistence scale
        mid, half = (x_lo + x_hi) / 2, pmax / 2
        x_lo, x_hi = mid - half, mid + half
    y_lo, y_hi = 0.0, pmax
    pad_x, pad_y = cfg.padding * (x_hi - x_lo), cfg.padding * (y_hi - y_lo)
    xs = np.linspace(x_lo - pad_x, x_hi + pad_x, cfg.bins)
    ys = np.linspace(y_lo - pad_y, y_hi + pad_y, cfg.bins)
    gx = np.exp(-((xs[None, :] - b[:, 0:1]) ** 2) / (2 * sigma ** 2))
    gy = np.exp(-((ys[None, :] - pers[:, None]) ** 2) / (2 * sigma ** 2))
    image = np.einsum("k,ky,kx->yx", pers, gy, gx)
    return image, xs, ys


def image_amplitude(bars, cfg=ImageConfig()):
    image, _, _ = persistence_image(bars, cfg)
    return float(np.linalg.norm(image.ravel()))


@dataclass(frozen=True)
class TopoConfig:
    short_threshold_0: float = 10.0
    short_threshold_1: float = 10.0
    wasserstein_p: float = 2.0
    landscape_points: int = 100
    image: ImageConfig = ImageConfig()


@dataclass(frozen=True)
class TopoFeatures:
    entropy_0: float
    entropy_1: float
    short_bars_0: int
    short_bars_1: int
    amp_wasserstein_0: float
    amp_wasserstein_1: float
    amp_bottleneck_0: float
    amp_bottleneck_1: float
    amp_landscape_0: float
    amp_landscape_1: float
    amp_image_0: float
    amp_image_1: float

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    def as_list(self):
        return [getattr(self, n) for n in self.names()]


def topo_features(diag, cfg=TopoConfig()):
    """All twelve summaries of ``diag`` (H0 without its infinite bar, and H1)."""
    h0, h1 = diag.finite(0), diag.finite(1)
    return TopoFeatures(
        persistent_entropy(h0), persistent_entropy(h1),
        short_bars(h0, cfg.short_threshold_0), short_bars(h1, cfg.short_threshold_1),
        wasserstein_amplitude(h0, cfg.wasserstein_p), wasserstein_amplitude(h1, cfg.wasserstein_p),
        bottleneck_amplitude(h0), bottleneck_amplitude(h1),
        landscape_amplitude(h0, cfg.landscape_points), landscape_amplitude(h1, cfg.landscape_points),
        image_amplitude(h0, cfg.image), image_amplitude(h1, cfg.image),
    )
