"""Feature tables: CSV I/O, correlation filtering, standardisation."""
import csv
import logging

import numpy as np

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ID_COLUMNS = ("id", "participant", "label_type", "label_gender", "label_age_group")
LABEL_COLUMNS = {"type": "label_type", "gender": "label_gender", "age_group": "label_age_group",
                 "participant": "participant"}


class SchemaError(ValueError):
    pass


class FeatureTable:
    """Rows of named numeric features plus id/label columns.

    ``X`` is float64 (n_rows, n_features); ``meta`` maps each of
    ID_COLUMNS to a list of strings.
    """

    def __init__(self, X, feature_names, meta=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(feature_names):
            raise SchemaError(f"feature matrix shape {X.shape} does not match {len(feature_names)} names")
        if len(set(feature_names)) != len(feature_names):
            raise SchemaError("duplicate feature names")
        if not np.all(np.isfinite(X)):
            raise SchemaError("feature table has missing or non-finite values")
        n = X.shape[0]
        meta = dict(meta or {})
        for col in ID_COLUMNS:
            vals = list(meta.get(col, [""] * n))
            if len(vals) != n:
                raise SchemaError(f"column {col!r} has {len(vals)} values for {n} rows")
            meta[col] = [str(v) for v in vals]
        self.X = X
        self.feature_names = list(feature_names)
        self.meta = meta

    def __len__(self):
        return self.X.shape[0]

    def labels(self, label):
        col = LABEL_COLUMNS.get(label, label)
        if col not in self.meta:
            raise SchemaError(f"unknown label column {label!r}")
        return np.asarray(self.meta[col])

    def select(self, columns):
        idx = [self.column_index(c) for c in columns]
        return FeatureTable(self.X[:, idx], [self.feature_names[i] for i in idx], self.meta)

    def rows(self, idx):
        idx = np.asarray(idx)
        return FeatureTable(self.X[idx], self.feature_names, {k: [v[i] for i in idx] for k, v in self.meta.items()})

    def column_index(self, name):
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature column {name!r}") from None

    def with_column(self, name, values):
        values = np.asarray(values, dtype=np.float64).reshape(-1, 1)
        return FeatureTable(np.hstack([self.X, values]), self.feature_names + [name], self.meta)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(ID_COLUMNS) + self.feature_names)
            for i in range(len(self)):
                w.writerow([self.meta[c][i] for c in ID_COLUMNS] + [repr(float(x)) for x in self.X[i]])

    @classmethod
    def from_csv(cls, path, expected_features=None):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header[:len(ID_COLUMNS)]) != ID_COLUMNS:
                raise SchemaError(f"{path}: not a feature table of schema v{SCHEMA_VERSION}; "
                                  f"header must start with {','.join(ID_COLUMNS)}")
            names = header[len(ID_COLUMNS):]
            if expected_features is not None and list(names) != list(expected_features):
                raise SchemaError(f"{path}: feature columns differ from schema v{SCHEMA_VERSION} canonical order")
            meta = {c: [] for c in ID_COLUMNS}
            values = []
            for lineno, rec in enumerate(reader, 2):
                if len(rec) != len(header):
                    raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
                for c, v in zip(ID_COLUMNS, rec):
                    meta[c].append(v)
                try:
                    values.append([float(v) for v in rec[len(ID_COLUMNS):]])
                except ValueError:
                    raise SchemaError(f"{path}:{lineno}: non-numeric feature value") from None
        X = np.asarray(values, dtype=np.float64).reshape(-1, len(names))
        return cls(X, names, meta)


def correlation_filter(table, threshold=0.65):
    """Keep columns in declared order, dropping any whose |Pearson r| with
    an already kept column exceeds ``threshold``. Constant columns count as
    uncorrelated and are kept with a warning."""
    if len(table) < 2:
        raise ValueError("correlation filter needs at least 2 rows")
    X = table.X
    Z = X - X.mean(axis=0)
    norms = np.linalg.norm(Z, axis=0)
    const = norms <= 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0))
    for q in np.flatnonzero(const):
        logger.warning("feature %r is constant; kept", table.feature_names[q])
    U = np.where(const, 0.0, Z / np.where(const, 1.0, norms))
    kept = []
    for q in range(X.shape[1]):
        if kept and not const[q]:
            r = np.abs(U[:, kept].T @ U[:, q])
            if (r > threshold).any():
                continue
        kept.append(q)
    return table.select([table.feature_names[q] for q in kept])


class Standardizer:
    def __init__(self, mean, scale):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] == 0:
            raise ValueError("cannot fit standardisation on zero rows")
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mean"], d["scale"])


def standardize(table, fit_rows):
    """Z-score every feature with statistics of ``fit_rows`` only."""
    params = Standardizer.fit(table.X[np.asarray(fit_rows)])
    return FeatureTable(params.transform(table.X), table.feature_names, table.meta), params
