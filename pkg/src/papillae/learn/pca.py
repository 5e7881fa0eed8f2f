"""Principal components of standardised features."""
import numpy as np

from .table import Standardizer


def pca_project(X, dims=2):
    """Returns ``(coords, explained_ratio, components)``.

    Components come from the eigen-decomposition of the covariance of the
    z-scored columns; each is signed so its largest-magnitude loading is
    positive (first such loading on ties).
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if dims > d:
        raise ValueError(f"dims={dims} exceeds the feature count {d}")
    if n < dims:
        raise ValueError(f"need at least {dims} rows")
    Z = Standardizer.fit(X).transform(X)
    C = Z.T @ Z / max(n - 1, 1)
    w, V = np.linalg.eigh(C)
    order = np.argsort(-w, kind="stable")
    w, V = np.clip(w[order], 0.0, None), V[:, order]
    for q in range(d):
        k = int(np.argmax(np.abs(V[:, q])))
        if V[k, q] < 0:
            V[:, q] = -V[:, q]
    total = w.sum()
    ratio = w / total if total > 0 else np.zeros(d)
    comps = V[:, :dims]
    return Z @ comps, ratio[:dims], comps.T
