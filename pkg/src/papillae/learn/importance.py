"""Permutation feature importance on held-out rows."""
from dataclasses import dataclass

import numpy as np

from .evaluate import balanced_accuracy
from .models import ModelError


@dataclass(frozen=True)
class Importance:
    feature: str
    importance: float
    std: float


def permutation_importance(model, X_test, y_test, feature_names, n_perm=30, seed=0):
    """Drop in balanced accuracy when one column of the test rows is
    shuffled, averaged over ``n_perm`` seeded shuffles; sorted descending
    (ties by column order)."""
    if list(feature_names) != model.feature_names:
        raise ModelError("test features do not match the model's feature names")
    X_test = np.asarray(X_test, dtype=np.float64)
    y_test = np.asarray(y_test)
    base = balanced_accuracy(model.predict(X_test), y_test)
    children = np.random.SeedSequence(seed).spawn(X_test.shape[1])
    out = []
    for q, name in enumerate(feature_names):
        rng = np.random.default_rng(children[q])
        drops = np.empty(n_perm)
        for k in range(n_perm):
            Xp = X_test.copy()
            Xp[:, q] = X_test[rng.permutation(X_test.shape[0]), q]
            drops[k] = base - balanced_accuracy(model.predict(Xp), y_test)
        out.append(Importance(name, float(drops.mean()), float(drops.std())))
    order = sorted(range(len(out)), key=lambda q: (-out[q].importance, q))
    return [out[q] for q in order], base
