import csv
import dataclasses
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from papillae import cli
from papillae.config import ConfigError, PipelineConfig, from_ini, load_config, save_config, to_ini
from papillae.features import FEATURE_COLUMNS
from papillae.learn import FeatureTable

CONFIG = """\
[features]
diagram.n_subsample = 300

[split]
repeats = 5
"""


def run(*argv):
    return cli.main([str(a) for a in argv])


def files(directory):
    out = {}
    for root, _, names in os.walk(directory):
        for n in names:
            p = os.path.join(root, n)
            out[os.path.relpath(p, directory)] = open(p, "rb").read()
    return out


# ---------------------------------------------------------------- config


def test_config_round_trip(tmp_path):
    cfg = PipelineConfig().with_seed(17)
    cfg = dataclasses.replace(cfg, synth=dataclasses.replace(cfg.synth, roughness_range=(0.25, 3.0)))
    save_config(cfg, tmp_path / "c.ini")
    assert load_config(tmp_path / "c.ini") == cfg
    assert from_ini(to_ini(cfg)) == cfg


def test_config_seed_propagates():
    cfg = PipelineConfig().with_seed(5)
    assert (cfg.synth.seed, cfg.extraction.seed, cfg.features.seed, cfg.features.diagram.seed,
            cfg.rbf.seed, cfg.split.seed) == (5,) * 6


def test_config_partial_and_errors():
    cfg = from_ini(CONFIG)
    assert cfg.features.diagram.n_subsample == 300 and cfg.split.repeats == 5
    assert cfg.extraction == PipelineConfig().extraction
    with pytest.raises(ConfigError, match="unknown key"):
        from_ini("[split]\nrepeatz = 3\n")
    with pytest.raises(ConfigError, match="unknown config section"):
        from_ini("[bogus]\nx = 1\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        from_ini("[split]\nrepeats = five\n")
    with pytest.raises(ConfigError):
        from_ini("[extraction]\nr = -1.0\n")


# ---------------------------------------------------------------- end-to-end chain


def chain(root):
    """synth -> featurize -> train -> evaluate -> importance -> pca, plus
    synth sheet -> extract -> map. Returns the output directories."""
    cfg = root / "pipeline.ini"
    cfg.write_text(CONFIG)
    d = {k: root / k for k in ("corpus", "feat", "train", "logo", "eval", "imp", "pca", "sheet", "seg", "map")}
    common = ("--seed", 3, "--config", cfg)
    assert run("synth", "--n-per-class", 4, "--participants", 2, "--out", d["corpus"], *common) == 0
    assert run("featurize", d["corpus"], "--out", d["feat"], *common) == 0
    table = d["feat"] / "features.csv"
    assert run("train", table, "--out", d["train"], *common) == 0
    assert run("train", table, "--classifier", "logistic", "--protocol", "logo", "--feature-set", "curvature",
               "--out", d["logo"], *common) == 0
    model = d["train"] / "model.json"
    assert run("evaluate", table, "--model", model, "--out", d["eval"], *common) == 0
    assert run("importance", table, "--model", model, "--n-perm", 5, "--best-split", "--out", d["imp"], *common) == 0
    assert run("pca", table, "--out", d["pca"], *common) == 0
    assert run("synth", "--kind", "sheet", "--width", 2500, "--height", 2500, "--out", d["sheet"], *common) == 0
    assert run("extract", d["sheet"] / "sheet.ply", "--max-segments", 4, "--out", d["seg"], *common) == 0
    assert run("map", d["sheet"] / "sheet.ply", "--model", model, "--truth", d["sheet"] / "placements.json",
               "--svg", "--out", d["map"], *common) == 0
    return d


@pytest.fixture(scope="module")
def chains(tmp_path_factory):
    return chain(tmp_path_factory.mktemp("a")), chain(tmp_path_factory.mktemp("b"))


def test_chain_artifacts(chains):
    d, _ = chains
    assert len([f for f in os.listdir(d["corpus"]) if f.endswith(".ply")]) == 12
    assert (d["corpus"] / "manifest.csv").exists()
    t = FeatureTable.from_csv(d["feat"] / "features.csv", FEATURE_COLUMNS)
    assert len(t) == 12
    report = json.loads((d["train"] / "report.json").read_text())
    assert report["protocol"] == "random-split" and len(report["scores"]) == 5
    assert json.loads((d["logo"] / "report.json").read_text())["protocol"] == "logo"
    assert 0 <= json.loads((d["eval"] / "evaluation.json").read_text())["balanced_accuracy"] <= 1
    rows = list(csv.reader(open(d["imp"] / "importance.csv")))
    assert rows[0] == ["rank", "feature", "importance", "std"] and len(rows) > 1
    assert json.loads((d["pca"] / "pca.json").read_text())["explained_variance_ratio"]
    assert json.loads((d["sheet"] / "placements.json").read_text())["placements"]
    assert len([f for f in os.listdir(d["seg"]) if f.endswith(".ply")]) == 4
    m = json.loads((d["map"] / "map.json").read_text())
    assert "detections" in m and "match" in m["meta"]
    for det in m["detections"]:
        assert set(det) == {"center", "type", "score"}
    assert (d["map"] / "map.svg").read_text().startswith("<svg")
    for k in d:
        assert any(f.endswith(".config.ini") for f in os.listdir(d[k]))


def test_chain_byte_identical(chains):
    a, b = chains
    for k in a:
        fa, fb = files(a[k]), files(b[k])
        assert fa.keys() == fb.keys(), k
        for name in fa:
            assert fa[name] == fb[name], f"{k}/{name} differs between runs"


def test_written_config_reproduces_run(chains, tmp_path):
    d, _ = chains
    ini = d["feat"] / "featurize.config.ini"
    assert load_config(ini).features.diagram.n_subsample == 300
    assert run("featurize", d["corpus"], "--config", ini, "--out", tmp_path) == 0
    assert (tmp_path / "features.csv").read_bytes() == (d["feat"] / "features.csv").read_bytes()


def test_featurize_threads_do_not_change_output(chains, tmp_path):
    d, _ = chains
    assert run("featurize", d["corpus"], "--config", d["feat"] / "featurize.config.ini", "--threads", 2,
               "--out", tmp_path) == 0
    assert (tmp_path / "features.csv").read_bytes() == (d["feat"] / "features.csv").read_bytes()


# ---------------------------------------------------------------- failures


def last_error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return json.loads(err[0])


def test_usage_errors(capsys, tmp_path):
    assert run("bogus") == 2
    assert last_error(capsys)["code"] == 2
    assert run("train") == 2
    assert last_error(capsys)["code"] == 2
    assert run("featurize", tmp_path, "--threads", 0, "--out", tmp_path) == 2
    assert last_error(capsys)["code"] == 2


def test_data_errors(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    assert run("train", bad, "--out", tmp_path) == 3
    e = last_error(capsys)
    assert e["kind"] == "SchemaError" and "schema v1" in e["error"]
    assert run("map", tmp_path / "missing.ply", "--model", tmp_path / "m.json", "--out", tmp_path) == 3
    last_error(capsys)
    assert run("featurize", tmp_path, "--out", tmp_path / "o") == 3
    last_error(capsys)
    cfg = tmp_path / "c.ini"
    cfg.write_text("[nope]\n")
    assert run("pca", bad, "--config", cfg, "--out", tmp_path) == 3
    assert last_error(capsys)["kind"] == "ConfigError"


def test_reordered_feature_columns_rejected(chains, capsys, tmp_path):
    d, _ = chains
    lines = (d["feat"] / "features.csv").read_text().splitlines()
    header = lines[0].split(",")
    header[5], header[6] = header[6], header[5]
    (tmp_path / "f.csv").write_text("\n".join([",".join(header)] + lines[1:]) + "\n")
    assert run("pca", tmp_path / "f.csv", "--out", tmp_path) == 3
    assert "canonical order" in last_error(capsys)["error"]


def test_numeric_failure_exit_code(monkeypatch, chains, capsys, tmp_path):
    def boom(*a, **k):
        raise FloatingPointError("non-finite feature value")

    monkeypatch.setattr(cli, "featurize_segments", boom)
    assert run("featurize", chains[0]["corpus"], "--out", tmp_path) == 4
    assert last_error(capsys)["code"] == 4


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "papillae", "train", str(tmp_path / "nope.csv"), "--out",
                           str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 3
    assert len(proc.stderr.strip().splitlines()) == 1
    assert json.loads(proc.stderr)["code"] == 3
    ok = subprocess.run([sys.executable, "-m", "papillae", "--version"], capture_output=True, text=True)
    assert ok.returncode == 0 and ok.stdout.strip()


def test_map_scores_placements(chains):
    d, _ = chains
    meta = json.loads((d["map"] / "map.json").read_text())["meta"]
    truth = json.loads((d["sheet"] / "placements.json").read_text())["placements"]
    assert meta["match"]["truth"] == len(truth)
    assert np.isfinite(meta["match"]["recall"])
