"""Multinomial logistic regression and one-vs-rest RBF support vector
machines, both on standardised features and JSON-serialisable."""
import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .table import Standardizer

logger = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class LogisticConfig:
    l2_lambda: float = 1.0
    max_iter: int = 1000
    tol: float = 1e-6


@dataclass(frozen=True)
class RBFConfig:
    C: float = 1.0
    gamma: float | None = None  # None: 1 / (d * mean feature variance)
    max_iter: int = 100_000
    tol: float = 1e-3
    seed: int = 0


def _check_training(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ModelError("feature matrix and labels disagree in length")
    if not np.all(np.isfinite(X)):
        raise ModelError("non-finite feature values")
    classes = np.unique(y)
    if classes.shape[0] < 2:
        raise ModelError(f"need at least 2 classes to train, got {classes.tolist()}")
    return X, y, classes


class ClassifierModel:
    def __init__(self, kind, classes, feature_names, standardizer, params, config):
        self.kind = kind
        self.classes = [str(c) for c in classes]
        self.feature_names = list(feature_names)
        self.standardizer = standardizer
        self.params = params
        self.config = config

    def decision(self, X):
        """Per-class scores, shape (n, n_classes); larger is more likely."""
        Z = self.standardizer.transform(X)
        if self.kind == "logistic":
            return Z @ self.params["W"].T + self.params["b"]
        K = rbf_kernel(Z, self.params["support"], self.params["gamma"])
        return K @ self.params["dual"].T - self.params["rho"]

    def predict_proba(self, X):
        if self.kind != "logistic":
            raise ModelError("probabilities are only defined for the logistic model")
        return _softmax(self.decision(X))

    def predict(self, X):
        scores = self.decision(X)
        return np.asarray(self.classes)[np.argmax(scores, axis=1)]

    def check_features(self, names):
        if list(names) != self.feature_names:
            raise ModelError(f"feature names {list(names)} do not match the model's {self.feature_names}")

    def to_json(self):
        params = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}
        return json.dumps({"schema_version": MODEL_SCHEMA_VERSION, "kind": self.kind, "classes": self.classes,
                           "feature_names": self.feature_names, "standardization": self.standardizer.to_dict(),
                           "params": params, "config": self.config}, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        if d.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise ModelError(f"unsupported model schema version {d.get('schema_version')!r} "
                             f"(supported: {MODEL_SCHEMA_VERSION})")
        params = {k: (np.asarray(v, dtype=np.float64) if isinstance(v, list) else v) for k, v in d["params"].items()}
        return cls(d["kind"], d["classes"], d["feature_names"], Standardizer.from_dict(d["standardization"]),
                   params, d.get("config", {}))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


# --------------------------------------------------------------------------
# logistic


def _softmax(S):
    S = S - S.max(axis=1, keepdims=True)
    E = np.exp(S)
    return E / E.sum(axis=1, keepdims=True)


def _logistic_loss(W, b, Z, Y, lam):
    S = Z @ W.T + b
    S = S - S.max(axis=1, keepdims=True)
    logp = S - np.log(np.exp(S).sum(axis=1, keepdims=True))
    n = Z.shape[0]
    loss = -(Y * logp).sum() / n + 0.5 * lam * (W * W).sum() / n
    P = np.exp(logp)
    gW = (P - Y).T @ Z / n + lam * W / n
    gb = (P - Y).sum(axis=0) / n
    return loss, gW, gb


def fit_logistic(Z, y, classes, cfg=LogisticConfig()):
    """Minimise ``(1/n) [sum NLL + lambda/2 |W|^2]`` by gradient descent with
    backtracking; the bias is not penalised. Returns ``(W, b, loss_trace)``;
    the trace is non-increasing."""
    Y = (y[:, None] == classes[None, :]).astype(np.float64)
    k, d = classes.shape[0], Z.shape[1]
    W, b = np.zeros((k, d)), np.zeros(k)
    loss, gW, gb = _logistic_loss(W, b, Z, Y, cfg.l2_lambda)
    trace = [loss]
    step = 1.0
    for _ in range(cfg.max_iter):
        gnorm2 = (gW * gW).sum() + (gb * gb).sum()
        if np.sqrt(gnorm2) < cfg.tol:
            break
        while True:
            W1, b1 = W - step * gW, b - step * gb
            loss1, gW1, gb1 = _logistic_loss(W1, b1, Z, Y, cfg.l2_lambda)
            if loss1 <= loss - 0.5 * step * gnorm2 or step < 1e-12:
                break
            step *= 0.5
        if loss1 > loss:
            break
        done = loss - loss1 < cfg.tol * max(1.0, abs(loss))
        W, b, loss, gW, gb = W1, b1, loss1, gW1, gb1
        trace.append(loss)
        step = min(step * 2.0, 1e3)
        if done:
            break
    return W, b, np.asarray(trace)


def train_logistic(X, y, feature_names=None, cfg=LogisticConfig()):
    X, y, classes = _check_training(X, y)
    std = Standardizer.fit(X)
    W, b, trace = fit_logistic(std.transform(X), y, classes, cfg)
    names = feature_names or [f"f{q}" for q in range(X.shape[1])]
    model = ClassifierModel("logistic", classes, names, std, {"W": W, "b": b}, asdict(cfg))
    model.loss_trace = trace
    return model


# --------------------------------------------------------------------------
# kernel machine


def rbf_kernel(A, B, gamma):
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def smo_binary(K, y, C=1.0, tol=1e-3, max_iter=100_000):
    """Dual soft-margin SVM by SMO with second-order working-set selection.

    ``y`` in {-1, +1}. Returns ``(alpha, rho)`` with decision
    ``sum_i alpha_i y_i K(x_i, x) - rho``.
    """
    n = y.shape[0]
    yf = y.astype(np.float64)
    alpha = np.zeros(n)
    G = -np.ones(n)
    diagK = np.diag(K).copy()
    tau = 1e-12
    for it in range(max_iter):
        pos = yf > 0
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        score = -yf * G
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        gmax = score[i]
        gmin = score[low].min()
        if gmax - gmin < tol:
            break
        cand = low & (score < gmax)
        bdiff = gmax - score
        quad = diagK[i] + diagK - 2.0 * K[i]
        quad = np.where(quad > 0, quad, tau)
        obj = np.where(cand, -(bdiff * bdiff) / quad, np.inf)
        j = int(np.argmin(obj))
        yi, yj = yf[i], yf[j]
        Kij = K[i, j]
        ai, aj = alpha[i], alpha[j]
        if yi != yj:
            q = diagK[i] + diagK[j] + 2.0 * Kij
            q = q if q > 0 else tau
            delta = (-G[i] - G[j]) / q
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            q = diagK[i] + diagK[j] - 2.0 * Kij
            q = q if q > 0 else tau
            delta = (G[i] - G[j]) / q
            s = ai + aj
            ni, nj = ai - delta, aj + delta
            if s > C:
                if ni > C:
                    ni, nj = C, s - C
            elif nj < 0:
                nj, ni = 0.0, s
            if s > C:
                if nj > C:
                    nj, ni = C, s - C
            elif ni < 0:
                ni, nj = 0.0, s
        dai, daj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        G += yf * (K[i] * (yi * dai) + K[j] * (yj * daj))
    else:
        logger.warning("SMO reached max_iter=%d before convergence", max_iter)
    yG = yf * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yG[free].mean())
    else:
        at_up = alpha >= C
        ub_mask = (at_up & (yf < 0)) | (~at_up & (yf > 0))
        lb_mask = ~ub_mask
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub + lb) else float(ub if np.isfinite(ub) else lb)
    return alpha, rho


def scale_gamma(Z):
    v = float(Z.var(axis=0).mean())
    return 1.0 / (Z.shape[1] * v) if v > 0 else 1.0


def train_rbf(X, y, feature_names=None, cfg=RBFConfig()):
    """One-vs-rest soft-margin SVMs with an RBF kernel, one per class."""
    X, y, classes = _check_training(X, y)
    std = Standardizer.fit(X)
    Z = std.transform(X)
    gamma = scale_gamma(Z) if cfg.gamma is None else float(cfg.gamma)
    K = rbf_kernel(Z, Z, gamma)
    duals, rhos = [], []
    for c in classes:
        yc = np.where(y == c, 1, -1)
        alpha, rho = smo_binary(K, yc, cfg.C, cfg.tol, cfg.max_iter)
        duals.append(alpha * yc)
        rhos.append(rho)
    duals = np.asarray(duals)
    sv = np.flatnonzero(np.abs(duals).sum(axis=0) > 0)
    params = {"support": Z[sv], "dual": duals[:, sv], "rho": np.asarray(rhos), "gamma": gamma}
    names = feature_names or [f"f{q}" for q in range(X.shape[1])]
    return ClassifierModel("rbf", classes, names, std, params, asdict(cfg))


def train(kind, X, y, feature_names=None, cfg=None):
    if kind == "logistic":
        return train_logistic(X, y, feature_names, cfg or LogisticConfig())
    if kind in ("rbf", "svm", "rbf-kernel"):
        return train_rbf(X, y, feature_names, cfg or RBFConfig())
    raise ModelError(f"unknown classifier kind {kind!r}")
