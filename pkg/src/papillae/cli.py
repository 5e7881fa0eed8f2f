"""Command-line entry point: ``papillae <command> [options]``.

Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure. Failures print
one JSON line ``{"error": ..., "kind": ..., "code": ...}`` on stderr.
"""
import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, PipelineConfig, load_config, save_config
from .features import FEATURE_COLUMNS, FEATURE_GROUPS, featurize_segments
from .learn import (ClassifierModel, EvaluationError, FeatureTable, ModelError, SchemaError, balanced_accuracy,
                    confusion_matrix, correlation_filter, logo_eval, pca_project, permutation_importance,
                    random_split_eval, train)
from .mapping import match_detections, map_surface, papilla_detections, write_map_json, write_map_svg
from .mesh import MeshError
from .segmentation import RansacError, SegmentationError, read_segments, scan_segments, write_segment
from .surface_io import load_surface, save_surface
from .synth import InfeasibleDensity, gen_corpus, gen_sheet

logger = logging.getLogger("papillae")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DATA_ERRORS = (SchemaError, ModelError, MeshError, SegmentationError, ConfigError, EvaluationError,
               InfeasibleDensity, FileNotFoundError, IsADirectoryError, NotADirectoryError, KeyError,
               json.JSONDecodeError)
NUMERIC_ERRORS = (FloatingPointError, np.linalg.LinAlgError, RansacError, ZeroDivisionError, OverflowError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _out(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _model_cfg(cfg, kind):
    return cfg.logistic if kind == "logistic" else cfg.rbf


def _table_rows(segments, X):
    meta = {"id": [s.id for s in segments], "participant": [s.participant for s in segments],
            "label_type": [s.label for s in segments],
            "label_gender": [s.group_attrs.get("gender", "") for s in segments],
            "label_age_group": [s.group_attrs.get("age_group", "") for s in segments]}
    return FeatureTable(X, list(FEATURE_COLUMNS), meta)


def _select(table, which):
    if which in FEATURE_GROUPS:
        cols = FEATURE_GROUPS[which]
    else:
        cols = [c.strip() for c in spec.split(",") if c.strip()]
    return table.select(cols)


# --------------------------------------------------------------------------
# commands


def cmd_synth(args, cfg):
    if args.kind == "corpus":
        segments, rows = gen_corpus(args.n_per_class, args.participants, cfg.seed, cfg.synth,
                                    out_dir=args.out, extraction=cfg.extraction)
        logger.info("wrote %d segments to %s", len(segments), args.out)
    else:
        mesh, placements = gen_sheet(cfg.synth, args.width, args.height, cfg.seed)
        save_surface(mesh, _out(args, "sheet.ply"), binary=True)
        _dump_json({"placements": [{"center": [float(x) for x in p.apex], "type": p.kind,
                                    "diameter": p.diameter} for p in placements],
                    "width": args.width, "height": args.height}, _out(args, "placements.json"))
        logger.info("wrote sheet with %d papillae to %s", len(placements), args.out)


def cmd_extract(args, cfg):
    surface = load_surface(args.surface)
    segments = scan_segments(surface, cfg.extraction, max_segments=args.max_segments)
    for seg in segments:
        write_segment(seg, args.out)
    _dump_json({"surface": os.path.basename(args.surface), "segments": [
        {"id": s.id, "center": [float(x) for x in s.center]} for s in segments]}, _out(args, "manifest.json"))
    logger.info("extracted %d segments", len(segments))


def cmd_featurize(args, cfg):
    segments = read_segments(args.segments)
    if not segments:
        raise SegmentationError(f"no segments found in {args.segments}")
    X = featurize_segments(segments, cfg.features, args.threads)
    path = args.output or _out(args, "features.csv")
    _table_rows(segments, X).to_csv(path)
    logger.info("wrote %d rows to %s", len(segments), path)


def _load_table(path):
    return FeatureTable.from_csv(path, expected_features=FEATURE_COLUMNS)


def cmd_train(args, cfg):
    table = _select(_load_table(args.features), args.feature_set)
    if args.corr_threshold < 1.0:
        table = correlation_filter(table, args.corr_threshold)
    y = table.labels(args.label)
    mcfg = _model_cfg(cfg, args.classifier)
    if args.protocol == "logo":
        report = logo_eval(table.X, y, table.labels("participant"), args.classifier, mcfg, table.feature_names)
    else:
        report = random_split_eval(table.X, y, args.classifier, cfg.split, mcfg, table.feature_names)
    model = train(args.classifier, table.X, y, table.feature_names, mcfg)
    model.save(_out(args, "model.json"))
    rep = json.loads(report.to_json())
    rep["features"] = table.feature_names
    rep["label"] = args.label
    _dump_json(rep, _out(args, "report.json"))
    print(json.dumps({"protocol": report.protocol, "balanced_accuracy_mean": report.mean,
                      "balanced_accuracy_std": report.std, "n_features": len(table.feature_names)}, sort_keys=True))


def cmd_evaluate(args, cfg):
    model = ClassifierModel.load(args.model)
    table = _load_table(args.features).select(model.feature_names)
    y = table.labels(args.label)
    pred = model.predict(table.X)
    classes = sorted(set(model.classes) | set(y.tolist()))
    out = {"balanced_accuracy": balanced_accuracy(pred, y), "classes": classes,
           "confusion": confusion_matrix(pred, y, classes).tolist(), "n_rows": len(table)}
    _dump_json(out, _out(args, "evaluation.json"))
    print(json.dumps({"balanced_accuracy": out["balanced_accuracy"]}))


def cmd_importance(args, cfg):
    model = ClassifierModel.load(args.model)
    table = _load_table(args.features).select(model.feature_names)
    y = table.labels(args.label)
    X = table.X
    if args.best_split:
        rep = random_split_eval(X, y, model.kind, cfg.split, _model_cfg(cfg, model.kind), model.feature_names,
                                keep_models=True)
        score, model, test = max(rep.splits, key=lambda s: s[0])
        X, y = X[test], y[test]
    ranked, base = permutation_importance(model, X, y, model.feature_names, args.n_perm, cfg.seed)
    path = _out(args, "importance.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature", "importance", "std"])
        for k, imp in enumerate(ranked, 1):
            w.writerow([k, imp.feature, repr(imp.importance), repr(imp.std)])
    print(json.dumps({"base_balanced_accuracy": base, "top": ranked[0].feature}))


def cmd_map(args, cfg):
    surface = load_surface(args.surface)
    model = ClassifierModel.load(args.model)
    unknown = [n for n in model.feature_names if n not in FEATURE_COLUMNS]
    if unknown:
        raise ModelError(f"model uses unknown feature columns {unknown}")
    candidates = map_surface(surface, model, cfg.extraction, cfg.features, args.threads)
    detections = papilla_detections(candidates)
    meta = {"candidates": len(candidates), "model_kind": model.kind}
    if args.truth:
        with open(args.truth) as fh:
            truth = json.load(fh)["placements"]
        _, summary = match_detections(detections, truth, args.match_radius)
        meta["match"] = summary
    write_map_json(detections, _out(args, "map.json"), meta)
    if args.svg:
        write_map_svg(surface, detections, _out(args, "map.svg"))
    print(json.dumps({"detections": len(detections), **({"match": meta["match"]} if "match" in meta else {})},
                     sort_keys=True))


def cmd_pca(args, cfg):
    table = _select(_load_table(args.features), args.feature_set)
    coords, ratio, comps = pca_project(table.X, args.dims)
    with open(_out(args, "pca.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "participant", "label_type"] + [f"pc{k + 1}" for k in range(args.dims)])
        for i in range(len(table)):
            w.writerow([table.meta["id"][i], table.meta["participant"][i], table.meta["label_type"][i]]
                       + [repr(float(x)) for x in coords[i]])
    _dump_json({"explained_variance_ratio": ratio.tolist(), "features": table.feature_names,
                "components": comps.tolist()}, _out(args, "pca.json"))


# --------------------------------------------------------------------------
# parser


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="top-level seed (overrides the config file)")
    common.add_argument("--config", default=None, help="INI config file")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="papillae", description="Tongue papilla segmentation and classification")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a labelled corpus or a populated sheet")
    s.add_argument("--kind", choices=("corpus", "sheet"), default="corpus")
    s.add_argument("--n-per-class", type=int, default=100)
    s.add_argument("--participants", type=int, default=5)
    s.add_argument("--width", type=float, default=10000.0)
    s.add_argument("--height", type=float, default=10000.0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", parents=[common], help="scan a surface for candidate segments")
    s.add_argument("surface")
    s.add_argument("--max-segments", type=int, default=100_000)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("featurize", parents=[common], help="feature table from a segment directory")
    s.add_argument("segments")
    s.add_argument("--output", default=None, help="CSV path (default OUT/features.csv)")
    s.set_defaults(func=cmd_featurize)

    for name, func, hlp in (("train", cmd_train, "train a classifier and evaluate it"),
                            ("evaluate", cmd_evaluate, "score a saved model on a feature table")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("features")
        s.add_argument("--label", default="type", help="type | gender | age_group | participant")
        if name == "train":
            s.add_argument("--classifier", choices=("rbf", "logistic"), default="rbf")
            s.add_argument("--protocol", choices=("random-split", "logo"), default="random-split")
            s.add_argument("--feature-set", default="combined",
                           help="baseline | curvature | topological | combined | comma-separated columns")
            s.add_argument("--corr-threshold", type=float, default=0.65,
                           help="drop features correlated above this (1 disables)")
        else:
            s.add_argument("--model", required=True)
        s.set_defaults(func=func)

    s = sub.add_parser("importance", parents=[common], help="permutation feature importance")
    s.add_argument("features")
    s.add_argument("--model", required=True)
    s.add_argument("--label", default="type")
    s.add_argument("--n-perm", type=int, default=30)
    s.add_argument("--best-split", action="store_true",
                   help="retrain over random splits and use the test rows of the best one")
    s.set_defaults(func=cmd_importance)

    s = sub.add_parser("map", parents=[common], help="detect and classify papillae on a surface")
    s.add_argument("surface")
    s.add_argument("--model", required=True)
    s.add_argument("--truth", default=None, help="placements.json to score against")
    s.add_argument("--match-radius", type=float, default=50.0)
    s.add_argument("--svg", action="store_true", help="also write an overhead SVG")
    s.set_defaults(func=cmd_map)

    s = sub.add_parser("pca", parents=[common], help="principal components of a feature table")
    s.add_argument("features")
    s.add_argument("--dims", type=int, default=2)
    s.add_argument("--feature-set", default="combined")
    s.set_defaults(func=cmd_pca)
    return p


def _fail(code, exc):
    msg = str(exc).replace("\n", " ") or type(exc).__name__
    print(json.dumps({"error": msg, "kind": type(exc).__name__, "code": code}, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = load_config(args.config) if args.config else PipelineConfig()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        os.makedirs(args.out, exist_ok=True)
        save_config(cfg, os.path.join(args.out, f"{args.command}.config.ini"))
        args.func(args, cfg)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except NUMERIC_ERRORS as exc:
        return _fail(EXIT_NUMERIC, exc)
    except DATA_ERRORS as exc:
        return _fail(EXIT_DATA, exc)
    except (ValueError, OSError) as exc:
        return _fail(EXIT_DATA, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
