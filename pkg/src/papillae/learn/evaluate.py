"""Evaluation protocols: repeated random splits and leave-one-group-out."""
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .models import LogisticConfig, RBFConfig, train

logger = logging.getLogger(__name__)


class EvaluationError(ValueError):
    pass


def balanced_accuracy(predicted, actual):
    """Unweighted mean recall over the classes present in ``actual``."""
    predicted, actual = np.asarray(predicted), np.asarray(actual)
    if predicted.shape != actual.shape:
        raise ValueError(f"length mismatch: {predicted.shape[0]} predictions for {actual.shape[0]} labels")
    classes = np.unique(actual)
    if classes.shape[0] == 0:
        raise ValueError("no labels")
    return float(np.mean([np.mean(predicted[actual == c] == c) for c in classes]))


def confusion_matrix(predicted, actual, classes):
    index = {c: q for q, c in enumerate(classes)}
    M = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for p, a in zip(predicted, actual):
        M[index[a], index[p]] += 1
    return M


@dataclass
class EvalReport:
    protocol: str
    scores: list
    classes: list
    confusion: list
    mean: float = 0.0
    std: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        # sorted, so the summary does not depend on completion order
        self.scores = sorted(float(s) for s in self.scores)
        s = np.asarray(self.scores)
        self.mean = float(s.mean()) if s.size else float("nan")
        self.std = float(s.std()) if s.size else float("nan")

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=1)


@dataclass(frozen=True)
class SplitConfig:
    test_frac: float = 0.2
    repeats: int = 50
    seed: int = 0
    max_attempts: int = 100


def _fit_predict(kind, model_cfg, X, y, names, train_idx, test_idx):
    model = train(kind, X[train_idx], y[train_idx], names, model_cfg)
    return model, model.predict(X[test_idx])


def random_splits(n, y, cfg):
    """Index pairs for every repeat; each training part covers every class."""
    n_test = max(1, int(round(cfg.test_frac * n)))
    if n_test >= n:
        raise EvaluationError("test fraction leaves no training rows")
    classes = np.unique(y)
    out = []
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.repeats):
        rng = np.random.default_rng(child)
        for _ in range(cfg.max_attempts):
            perm = rng.permutation(n)
            test, tr = np.sort(perm[:n_test]), np.sort(perm[n_test:])
            if np.unique(y[tr]).shape[0] == classes.shape[0]:
                break
        else:
            raise EvaluationError(f"no split with every class in training after {cfg.max_attempts} attempts")
        out.append((tr, test))
    return out


def random_split_eval(X, y, kind="rbf", cfg=SplitConfig(), model_cfg=None, feature_names=None, keep_models=False):
    """Mean/stdev balanced accuracy over ``repeats`` uniform random splits;
    standardisation is refit inside every training part."""
    X, y = np.asarray(X, dtype=np.float64), np.asarray(y)
    classes = sorted(np.unique(y).tolist())
    scores, conf, per_split = [], np.zeros((len(classes),) * 2, dtype=np.int64), []
    for tr, test in random_splits(X.shape[0], y, cfg):
        model, pred = _fit_predict(kind, model_cfg, X, y, feature_names, tr, test)
        scores.append(balanced_accuracy(pred, y[test]))
        conf += confusion_matrix(pred, y[test], classes)
        if keep_models:
            per_split.append((scores[-1], model, test))
    report = EvalReport("random-split", scores, classes, conf.tolist(),
                        details={"test_frac": cfg.test_frac, "repeats": cfg.repeats, "seed": cfg.seed, "model": kind})
    if keep_models:
        report.splits = per_split
    return report


def logo_eval(X, y, groups, kind="rbf", model_cfg=None, feature_names=None):
    """One fold per group: train on every other group, test on this one.
    Folds whose training part misses a class are skipped with a warning."""
    X, y, groups = np.asarray(X, dtype=np.float64), np.asarray(y), np.asarray(groups)
    uniq = sorted(np.unique(groups).tolist())
    if len(uniq) < 2:
        raise EvaluationError("leave-one-group-out needs at least 2 groups")
    classes = sorted(np.unique(y).tolist())
    scores, conf, skipped = [], np.zeros((len(classes),) * 2, dtype=np.int64), []
    for g in uniq:
        test = np.flatnonzero(groups == g)
        tr = np.flatnonzero(groups != g)
        if np.unique(y[tr]).shape[0] < len(classes):
            logger.warning("fold %r skipped: training part lacks a class", g)
            skipped.append(g)
            continue
        _, pred = _fit_predict(kind, model_cfg, X, y, feature_names, tr, test)
        scores.append(balanced_accuracy(pred, y[test]))
        conf += confusion_matrix(pred, y[test], classes)
    if not scores:
        raise EvaluationError("every fold was skipped")
    return EvalReport("logo", scores, classes, conf.tolist(),
                      details={"groups": uniq, "skipped": skipped, "model": kind})


def model_config(kind, **overrides):
    base = LogisticConfig() if kind == "logistic" else RBFConfig()
    return type(base)(**{**asdict(base), **overrides})
