"""Synthetic papilla surfaces with known ground truth.

Every surface is a height field sampled on a regular grid. Fungiform
papillae are super-ellipsoid domes; filiform papillae are a central cone
ringed by shorter, outward-tilted spikes; "none" is a gently undulating
noise surface. All shapes beyond the published diameters and densities are
modelling choices, recorded in each manifest row.
"""
import csv
import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .primitives import heightfield
from .segmentation import ExtractionConfig, SegmentationError, extract_segment, write_segment

CM2 = 1e8  # µm² per cm²


@dataclass(frozen=True)
class SynthConfig:
    fungiform_diameter: float = 878.0
    filiform_diameter: float = 355.0
    filiform_density: float = 150.0
    fungiform_density: float = 20.0
    spike_count: int = 6
    noise_amplitude: float = 2.0
    roughness_range: tuple = (0.5, 4.0)
    fungiform_height: float = 150.0
    filiform_height: float = 150.0
    height_range: tuple = (100.0, 200.0)
    dome_exponent: float = 2.0
    dome_vertical_exponent: float = 1.0
    spacing: float = 15.0
    patch_size: float = 1500.0
    clearance: float = 200.0
    participant_jitter: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not (self.fungiform_diameter > 0 and self.filiform_diameter > 0):
            raise ValueError("diameters must be positive")
        if self.spike_count < 3:
            raise ValueError("spike_count must be >= 3")
        if self.filiform_density < 0 or self.fungiform_density < 0:
            raise ValueError("densities must be non-negative")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")


# --------------------------------------------------------------------------
# height profiles, evaluated at offsets (dx, dy) from the papilla centre


def dome_profile(dx, dy, diameter, height, exponent=2.0, vertical_exponent=1.0):
    """Super-ellipsoid cap ``|rho/R|^n + |z/h|^m = 1`` (zero outside R).

    The defaults (n=2, m=1) give a paraboloid whose top is rounded enough
    that the base, not the cap, is the dominant plane around it.
    """
    R = diameter / 2
    u = np.minimum(np.hypot(dx, dy) / R, 1.0)
    return height * (1.0 - u ** exponent) ** (1.0 / vertical_exponent)


def _tilted_cone(dx, dy, base_radius, height, shift):
    # heightfield of a cone whose apex is displaced horizontally by ``shift``
    # (|shift| < base_radius, so it never overhangs)
    sx, sy = shift
    A = sx * sx + sy * sy - base_radius ** 2
    B = -2.0 * (dx * sx + dy * sy) + 2.0 * base_radius ** 2
    C = dx * dx + dy * dy - base_radius ** 2
    disc = np.sqrt(np.maximum(B * B - 4 * A * C, 0.0))
    t = (-B + disc) / (2 * A)
    t = np.where(C <= 0, np.clip(t, 0.0, 1.0), 0.0)
    return height * t


def crown_profile(dx, dy, diameter, height, spike_count=6, phase=0.0):
    """Central cone (the tallest point, at the centre) ringed by
    ``spike_count`` outward-tilted spikes at 70% of its height."""
    R = diameter / 2
    z = _tilted_cone(dx, dy, 0.45 * R, height, (0.0, 0.0))
    for q in range(spike_count):
        a = phase + 2 * math.pi * q / spike_count
        cx, cy = 0.6 * R * math.cos(a), 0.6 * R * math.sin(a)
        tilt = (0.12 * R * math.cos(a), 0.12 * R * math.sin(a))
        z = np.maximum(z, _tilted_cone(dx - cx, dy - cy, 0.25 * R, 0.7 * height, tilt))
    return z


def smooth_noise(shape, amplitude, spacing, rng, correlation=60.0):
    """Gaussian-filtered white noise scaled to peak ``amplitude``."""
    if amplitude == 0:
        return np.zeros(shape)
    white = rng.standard_normal(shape)
    field = gaussian_filter(white, correlation / spacing, mode="wrap")
    peak = np.abs(field).max()
    return field * (amplitude / peak) if peak > 0 else field


@dataclass(frozen=True)
class Placement:
    kind: str
    center: tuple
    diameter: float
    height: float
    phase: float = 0.0

    @property
    def radius(self):
        return self.diameter / 2

    @property
    def apex(self):
        return np.array([self.center[0], self.center[1], self.height])


def _render(placements, xs, ys, cfg, rng, noise_amplitude=None):
    X, Y = np.meshgrid(xs, ys)
    amp = cfg.noise_amplitude if noise_amplitude is None else noise_amplitude
    z = smooth_noise(X.shape, amp, cfg.spacing, rng)
    for p in placements:
        R = p.radius
        ix = np.flatnonzero(np.abs(xs - p.center[0]) <= R + cfg.spacing)
        iy = np.flatnonzero(np.abs(ys - p.center[1]) <= R + cfg.spacing)
        if ix.size == 0 or iy.size == 0:
            continue
        sl = (slice(iy[0], iy[-1] + 1), slice(ix[0], ix[-1] + 1))
        dx, dy = X[sl] - p.center[0], Y[sl] - p.center[1]
        if p.kind == "fungiform":
            bump = dome_profile(dx, dy, p.diameter, p.height, cfg.dome_exponent, cfg.dome_vertical_exponent)
        else:
            bump = crown_profile(dx, dy, p.diameter, p.height, cfg.spike_count, p.phase)
        # papilla skin is smooth: the noise stops at the footprint
        z[sl] = np.where(bump > 0, bump, z[sl])
    return heightfield(xs, ys, z)


def _patch_axes(size, spacing):
    n = int(round(size / 2 / spacing))
    a = np.arange(-n, n + 1) * spacing
    return a, a


def _single(kind, cfg, seed, diameter, height):
    rng = np.random.default_rng(seed)
    xs, ys = _patch_axes(cfg.patch_size, cfg.spacing)
    phase = float(rng.uniform(0, 2 * math.pi))
    return _render([Placement(kind, (0.0, 0.0), diameter, height, phase)], xs, ys, cfg, rng)


def gen_fungiform(cfg=SynthConfig(), seed=0):
    """Dome of ``cfg.fungiform_diameter`` centred on a grid vertex at the origin."""
    return _single("fungiform", cfg, seed, cfg.fungiform_diameter, cfg.fungiform_height)


def gen_filiform(cfg=SynthConfig(), seed=0):
    return _single("filiform", cfg, seed, cfg.filiform_diameter, cfg.filiform_height)


def gen_none(cfg=SynthConfig(), seed=0):
    rng = np.random.default_rng(seed)
    xs, ys = _patch_axes(cfg.patch_size, cfg.spacing)
    return _render([], xs, ys, cfg, rng)


# --------------------------------------------------------------------------
# placement


class InfeasibleDensity(ValueError):
    pass


def place_papillae(requests, width, height, cfg, rng, fixed=(), max_attempts=20000):
    """Random sequential placement with separation ``r_i + r_j + clearance``.

    ``requests`` is a list of ``(kind, diameter, height_sampler)``; papillae
    lie fully inside the ``width`` x ``height`` rectangle centred at 0.
    """
    placed = list(fixed)
    cx = np.array([p.center[0] for p in placed], dtype=np.float64)
    cy = np.array([p.center[1] for p in placed], dtype=np.float64)
    rad = np.array([p.radius for p in placed], dtype=np.float64)
    out = []
    for kind, diameter, draw_height in requests:
        R = diameter / 2
        if 2 * R > min(width, height):
            raise InfeasibleDensity(f"a {kind} papilla of diameter {diameter} does not fit the sheet")
        for _ in range(max_attempts):
            x = rng.uniform(-width / 2 + R, width / 2 - R)
            y = rng.uniform(-height / 2 + R, height / 2 - R)
            if cx.size == 0 or np.all(np.hypot(cx - x, cy - y) >= rad + R + cfg.clearance):
                break
        else:
            raise InfeasibleDensity(f"could not place {len(requests)} papillae in {width} x {height} µm")
        p = Placement(kind, (float(x), float(y)), float(diameter), float(draw_height(rng)),
                      float(rng.uniform(0, 2 * math.pi)))
        out.append(p)
        cx, cy, rad = np.append(cx, x), np.append(cy, y), np.append(rad, R)
    return out


def _sheet_axes(width, height, spacing):
    nx, ny = int(round(width / spacing)) + 1, int(round(height / spacing)) + 1
    return np.linspace(-width / 2, width / 2, nx), np.linspace(-height / 2, height / 2, ny)


def gen_sheet(cfg=SynthConfig(), width=10000.0, height=10000.0, seed=0):
    """Flat noisy sheet with fungiform and filiform papillae at the configured
    densities. Returns ``(mesh, placements)``; apex positions are ground truth."""
    if min(width, height) < cfg.filiform_diameter:
        raise ValueError("sheet smaller than one papilla footprint")
    rng = np.random.default_rng(seed)
    area = width * height / CM2
    lo, hi = cfg.height_range
    requests = [("fungiform", cfg.fungiform_diameter, lambda g: g.uniform(lo, hi))] * int(round(cfg.fungiform_density * area))
    requests += [("filiform", cfg.filiform_diameter, lambda g: g.uniform(lo, hi))] * int(round(cfg.filiform_density * area))
    placements = place_papillae(requests, width, height, cfg, rng)
    xs, ys = _sheet_axes(width, height, cfg.spacing)
    mesh = _render(placements, xs, ys, cfg, rng)
    return mesh, placements


# --------------------------------------------------------------------------
# labelled corpus


def participant_factors(participants, jitter, seed):
    """Per-participant multiplicative factors for (diameter, height) in
    ``[1 - jitter, 1 + jitter]``."""
    rng = np.random.default_rng([seed, 7])
    return rng.uniform(1 - jitter, 1 + jitter, size=(participants, 2))


def participant_attrs(k):
    """Placeholder demographic labels so every label column is populated."""
    return {"gender": "F" if k % 2 == 0 else "M", "age_group": ("18-30", "31-50", "51+")[k % 3]}


def _corpus_scene(kind, cfg, factors, rng):
    """Patch with the target at the origin and filiform clutter around it."""
    size = cfg.patch_size
    lo, hi = cfg.height_range
    fd, fh = factors
    target = None
    fixed = []
    if kind != "none":
        diameter = (cfg.fungiform_diameter if kind == "fungiform" else cfg.filiform_diameter) * fd
        target = Placement(kind, (0.0, 0.0), diameter, float(rng.uniform(lo, hi) * fh),
                           float(rng.uniform(0, 2 * math.pi)))
        fixed = [target]
    else:
        # keep clutter out of reach of the seed ball so the segment is papilla-free
        fixed = [Placement("none", (0.0, 0.0), 2 * 550.0, 0.0)]
    n_clutter = rng.poisson(cfg.filiform_density * size * size / CM2)
    requests = [("filiform", cfg.filiform_diameter * fd, lambda g: g.uniform(lo, hi) * fh)] * int(n_clutter)
    try:
        clutter = place_papillae(requests, size, size, cfg, rng, fixed=fixed, max_attempts=200)
    except InfeasibleDensity:
        clutter = []
    # surface roughness varies from scene to scene
    amp = cfg.noise_amplitude * float(rng.uniform(*cfg.roughness_range))
    xs, ys = _patch_axes(size, cfg.spacing)
    mesh = _render(([target] if target else []) + clutter, xs, ys, cfg, rng, amp)
    return mesh, target, clutter, amp


def gen_corpus(n_per_class=100, participants=5, seed=0, cfg=SynthConfig(), out_dir=None,
               extraction=ExtractionConfig(), max_tries=20):
    """Labelled segments for every class, extracted the same way as from a
    real surface. Returns ``(segments, manifest_rows)``; writes segment
    files plus ``manifest.csv`` when ``out_dir`` is given.

    Participant ``k`` scales diameters and heights by its own factors.
    Seeds are offset up to ``delta`` from the true centre, so extraction has
    to snap to the apex; a scene where it snaps elsewhere is redrawn.
    """
    if n_per_class < 1 or participants < 1:
        raise ValueError("n_per_class and participants must be >= 1")
    factors = participant_factors(participants, cfg.participant_jitter, seed)
    segments, rows = [], []
    ss = np.random.SeedSequence([seed, 1])
    children = ss.spawn(3 * n_per_class)
    q = 0
    for kind in ("fungiform", "filiform", "none"):
        for i in range(n_per_class):
            rng = np.random.default_rng(children[q])
            q += 1
            part = i % participants
            for _ in range(max_tries):
                mesh, target, clutter, amp = _corpus_scene(kind, cfg, factors[part], rng)
                ang = rng.uniform(0, 2 * math.pi)
                off = rng.uniform(0, extraction.delta)
                seed_xy = (off * math.cos(ang), off * math.sin(ang))
                v = mesh.index.knn((seed_xy[0], seed_xy[1], 0.0), 1)[0][0]
                try:
                    seg = extract_segment(mesh, mesh.vertices[v], extraction)
                except SegmentationError:
                    continue
                if target is None or np.hypot(seg.center[0], seg.center[1]) <= 50.0:
                    break
            else:
                raise RuntimeError(f"could not extract a {kind} segment after {max_tries} scenes")
            seg.id = f"{kind[:3]}{i:04d}"
            seg.label = kind
            seg.participant = f"P{part + 1:02d}"
            seg.group_attrs = participant_attrs(part)
            params = {"diameter": target.diameter if target else 0.0,
                      "height": target.height if target else 0.0,
                      "participant_factors": [float(f) for f in factors[part]],
                      "clutter": len(clutter), "seed_offset": float(off),
                      "noise_amplitude": amp, "spike_count": cfg.spike_count,
                      "dome_exponent": [cfg.dome_exponent, cfg.dome_vertical_exponent], "spacing": cfg.spacing}
            true_center = [float(x) for x in (target.apex if target else (0.0, 0.0, 0.0))]
            segments.append(seg)
            rows.append({"id": seg.id, "class": kind, "participant": seg.participant,
                         "true_center_xyz": true_center, "parameters": params})
    if out_dir is not None:
        write_corpus(segments, rows, out_dir, cfg)
    return segments, rows


MANIFEST_FIELDS = ("id", "class", "participant", "true_center_xyz", "parameters-json")


def write_corpus(segments, rows, out_dir, cfg=None):
    os.makedirs(out_dir, exist_ok=True)
    for seg in segments:
        write_segment(seg, out_dir)
    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_FIELDS)
        for r in rows:
            w.writerow([r["id"], r["class"], r["participant"], " ".join(repr(x) for x in r["true_center_xyz"]),
                        json.dumps(r["parameters"], sort_keys=True)])
    if cfg is not None:
        with open(os.path.join(out_dir, "synth_config.json"), "w") as fh:
            json.dump(asdict(cfg), fh, indent=1, sort_keys=True)


def read_manifest(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["true_center_xyz"] = [float(x) for x in r["true_center_xyz"].split()]
        r["parameters"] = json.loads(r.pop("parameters-json"))
    return rows
