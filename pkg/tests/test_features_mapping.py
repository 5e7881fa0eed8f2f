import dataclasses
import time

import numpy as np
import pytest

from papillae import _accel
from papillae.features import (FEATURE_COLUMNS, FEATURE_GROUPS, FeatureConfig, baseline_features, featurize_segments,
                               segment_features)
from papillae.learn import train
from papillae.mapping import map_surface, match_detections, papilla_detections, write_map_json, write_map_svg
from papillae.segmentation import extract_segment
from papillae.synth import Placement, SynthConfig, _render, _sheet_axes, gen_filiform, gen_fungiform, gen_none


@pytest.fixture(scope="module")
def segments():
    out = []
    for k, gen in enumerate((gen_fungiform, gen_filiform, gen_none)):
        seg = extract_segment(gen(seed=k), [30.0, -20.0, 0.0])
        seg.id = f"s{k}"
        out.append(seg)
    return out


def test_column_layout():
    assert len(FEATURE_COLUMNS) == 22 and len(set(FEATURE_COLUMNS)) == 22
    assert FEATURE_COLUMNS[:2] == ("radius", "height")
    assert sum(len(FEATURE_GROUPS[g]) for g in ("baseline", "curvature", "topological")) == 22
    assert FEATURE_GROUPS["combined"] == FEATURE_COLUMNS


def test_baseline_orders_classes(segments):
    heights = [baseline_features(s)[1] for s in segments]
    # the whole crown sits inside the cut ball, so its height is the true one
    assert heights[1] == pytest.approx(SynthConfig().filiform_height, rel=0.1)
    # the dome's rim is farther than r from its apex: the cut holds only the
    # cap and the plane fit to it hugs the top, so the height collapses
    assert heights[0] < 0.25 * SynthConfig().fungiform_height
    assert heights[2] < 0.25 * SynthConfig().filiform_height


def test_segment_features_finite_and_deterministic(segments):
    row = segment_features(segments[1])
    assert len(row) == 22 and np.all(np.isfinite(row))
    assert segment_features(segments[1]) == row


def test_featurize_worker_count_invariant(segments):
    cfg = FeatureConfig(diagram=dataclasses.replace(FeatureConfig().diagram, n_subsample=300))
    a = featurize_segments(segments, cfg, workers=1)
    b = featurize_segments(segments, cfg, workers=2)
    np.testing.assert_array_equal(a, b)


def test_featurize_numba_and_numpy_agree(segments):
    cfg = FeatureConfig(diagram=dataclasses.replace(FeatureConfig().diagram, n_subsample=300))
    previous = _accel.set_numba(False)
    try:
        slow = featurize_segments(segments[:1], cfg)
    finally:
        _accel.set_numba(previous)
    np.testing.assert_allclose(featurize_segments(segments[:1], cfg), slow, rtol=1e-12)


def test_single_segment_time_budget(segments):
    segment_features(segments[0])  # warm the compiled kernels
    t = time.perf_counter()
    segment_features(segments[1])
    assert time.perf_counter() - t < 10


# ---------------------------------------------------------------- matching


def test_match_detections_greedy():
    truth = [{"center": [0, 0, 0], "type": "fungiform"}, {"center": [100, 0, 0], "type": "filiform"},
             {"center": [500, 500, 0], "type": "filiform"}]
    det = [{"center": [10, 0, 0], "type": "fungiform", "score": 1.0},
           {"center": [95, 5, 0], "type": "fungiform", "score": 1.0},
           {"center": [900, 0, 0], "type": "filiform", "score": 1.0}]
    records, summary = match_detections(det, truth, 50)
    assert [r["matched"] for r in records] == [True, True, False]
    assert [r["correct_type"] for r in records] == [True, False, False]
    assert summary == {"truth": 3, "matched": 2, "correct": 1, "recall": 1 / 3, "false_positives": 1}


def test_match_each_detection_used_once():
    truth = [{"center": [0, 0], "type": "filiform"}, {"center": [20, 0], "type": "filiform"}]
    det = [{"center": [10, 0], "type": "filiform", "score": 0.5}]
    _, summary = match_detections(det, truth, 50)
    assert summary["matched"] == 1
    _, empty = match_detections([], truth)
    assert empty["recall"] == 0.0 and empty["false_positives"] == 0


def test_map_small_sheet(tmp_path):
    cfg = SynthConfig()
    xs, ys = _sheet_axes(2400, 1600, cfg.spacing)
    truth = [Placement("fungiform", (-500.0, 0.0), 878, 160), Placement("filiform", (550.0, 200.0), 355, 150, 0.7)]
    mesh = _render(truth, xs, ys, cfg, np.random.default_rng(2))
    # a tiny model: four example segments of each class
    segs = [extract_segment(g(seed=s), [0.0, 0.0, 0.0]) for s in range(4) for g in (gen_fungiform, gen_filiform, gen_none)]
    labels = ["fungiform", "filiform", "none"] * 4
    model = train("rbf", featurize_segments(segs), labels, list(FEATURE_COLUMNS))
    candidates = map_surface(mesh, model)
    dets = papilla_detections(candidates)
    _, summary = match_detections(dets, [{"center": list(p.apex), "type": p.kind} for p in truth])
    assert summary["correct"] == 2
    write_map_json(dets, tmp_path / "m.json", {"n": 1})
    write_map_svg(mesh, dets, tmp_path / "m.svg")
    assert (tmp_path / "m.svg").read_text().count("<circle") == len(dets)
