"""Locate and classify papillae across a whole surface."""
import json

import numpy as np

from .features import FEATURE_COLUMNS, FeatureConfig, featurize_segments
from .segmentation import ExtractionConfig, scan_segments

PAPILLA_TYPES = ("fungiform", "filiform")


def map_surface(surface, model, extraction=ExtractionConfig(), features=FeatureConfig(), workers=1,
                max_segments=100_000):
    """Scan, featurise and classify every candidate segment.

    Returns all candidates as dicts ``{id, center, type, score}``; ``score``
    is the winning class score (probability for the logistic model,
    decision value for the kernel model).
    """
    segments = scan_segments(surface, extraction, max_segments=max_segments)
    if not segments:
        return []
    X = featurize_segments(segments, features, workers)
    cols = [FEATURE_COLUMNS.index(n) for n in model.feature_names]
    Xm = X[:, cols]
    scores = model.predict_proba(Xm) if model.kind == "logistic" else model.decision(Xm)
    best = np.argmax(scores, axis=1)
    out = []
    for seg, k, row in zip(segments, best, scores):
        out.append({"id": seg.id, "center": [float(x) for x in seg.center],
                    "type": model.classes[int(k)], "score": float(row[k])})
    return out


def papilla_detections(candidates):
    return [d for d in candidates if d["type"] in PAPILLA_TYPES]


def match_detections(detections, truth, radius=50.0):
    """Greedy nearest matching of true papillae to detections (each
    detection used once). Returns per-truth records and summary counts."""
    det = np.array([d["center"][:2] for d in detections], dtype=np.float64).reshape(-1, 2)
    used = np.zeros(det.shape[0], dtype=bool)
    records = []
    for t in truth:
        c = np.asarray(t["center"][:2], dtype=np.float64)
        rec = {"center": list(map(float, c)), "type": t["type"], "matched": False, "correct_type": False}
        if det.shape[0]:
            dist = np.where(used, np.inf, np.hypot(*(det - c).T))
            k = int(np.argmin(dist))
            if dist[k] <= radius:
                used[k] = True
                rec.update(matched=True, distance=float(dist[k]), detected_type=detections[k]["type"],
                           correct_type=detections[k]["type"] == t["type"])
        records.append(rec)
    n = len(truth)
    hits = sum(r["matched"] and r["correct_type"] for r in records)
    summary = {"truth": n, "matched": sum(r["matched"] for r in records), "correct": hits,
               "recall": hits / n if n else 1.0, "false_positives": int((~used).sum())}
    return records, summary


def write_map_json(detections, path, meta=None):
    with open(path, "w") as fh:
        json.dump({"detections": [{k: d[k] for k in ("center", "type", "score")} for d in detections],
                   **({"meta": meta} if meta else {})}, fh, indent=1, sort_keys=True)
        fh.write("\n")


COLORS = {"fungiform": "#1f4eb4", "filiform": "#e6b800", "none": "#999999"}


def write_map_svg(surface, detections, path, size=800):
    """Top-down scatter of detections over the surface footprint."""
    v = surface.vertices
    lo, hi = v[:, :2].min(axis=0), v[:, :2].max(axis=0)
    span = float(max(hi - lo)) or 1.0
    s = size / span
    w, h = (hi - lo) * s
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" viewBox="0 0 {w:.2f} {h:.2f}">',
             f'<rect width="{w:.2f}" height="{h:.2f}" fill="#f4e1dc"/>']
    for d in detections:
        x, y = (d["center"][0] - lo[0]) * s, (hi[1] - d["center"][1]) * s
        r = (439.0 if d["type"] == "fungiform" else 177.5) * s
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{max(r, 1.5):.2f}" fill="{COLORS.get(d["type"], "#000")}" '
                     f'fill-opacity="0.8"><title>{d["type"]} {d["score"]:.3f}</title></circle>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
