import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from papillae.learn import (ClassifierModel, EvaluationError, FeatureTable, ID_COLUMNS, LogisticConfig, ModelError,
                            RBFConfig, SchemaError, SplitConfig, Standardizer, balanced_accuracy, confusion_matrix,
                            correlation_filter, logo_eval, pca_project, permutation_importance, random_split_eval,
                            random_splits, rbf_kernel, smo_binary, standardize, train, train_logistic, train_rbf)


def blobs(n, seed, sep=6.0, d=2):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(n, d)), rng.normal(size=(n, d)) + sep])
    return X, np.array(["a"] * n + ["b"] * n)


def xor(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 2))
    X = X + 0.3 * np.sign(X)
    return X, np.where(X[:, 0] * X[:, 1] > 0, "same", "diff")


def table(X, names=None, **meta):
    names = names or [f"f{q}" for q in range(X.shape[1])]
    return FeatureTable(X, names, meta)


# ---------------------------------------------------------------- correlation filter


def test_correlation_filter_drops_duplicate(rng):
    x = rng.normal(size=100)
    t = correlation_filter(table(np.column_stack([x, rng.normal(size=100), x])))
    assert t.feature_names == ["f0", "f1"]


def test_correlation_filter_keeps_independent():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(1000, 2))
    assert abs(np.corrcoef(X.T)[0, 1]) < 0.65
    assert correlation_filter(table(X)).feature_names == ["f0", "f1"]


def test_correlation_filter_constructed_mix(rng):
    a, b = rng.normal(size=(2, 5000))
    c = 0.7 * a + np.sqrt(1 - 0.49) * b
    assert np.corrcoef(a, c)[0, 1] == pytest.approx(0.7, abs=0.03)
    assert correlation_filter(table(np.column_stack([a, c]))).feature_names == ["f0"]
    assert correlation_filter(table(np.column_stack([a, c])), 0.75).feature_names == ["f0", "f1"]


def test_correlation_filter_constant_column_kept(rng, caplog):
    X = np.column_stack([rng.normal(size=50), np.full(50, 3.0), rng.normal(size=50)])
    with caplog.at_level(logging.WARNING):
        t = correlation_filter(table(X))
    assert t.feature_names == ["f0", "f1", "f2"]
    assert "constant" in caplog.text
    with pytest.raises(ValueError):
        correlation_filter(table(X[:1]))


def test_correlation_filter_compares_only_kept_columns(rng):
    # f1 is dropped for tracking f0; f2 tracks f1 but not f0, so it stays
    a, b = rng.normal(size=(2, 4000))
    f1 = 0.7 * a + np.sqrt(0.51) * b
    f2 = b
    assert abs(np.corrcoef(f1, f2)[0, 1]) > 0.65
    t = correlation_filter(table(np.column_stack([a, f1, f2])))
    assert t.feature_names == ["f0", "f2"]


# ---------------------------------------------------------------- standardisation


def test_standardize_identity_on_z_scores(rng):
    x = rng.normal(size=200)
    x = (x - x.mean()) / x.std()
    t, _ = standardize(table(x[:, None]), np.arange(200))
    np.testing.assert_allclose(t.X[:, 0], x, atol=1e-9)


def test_standardize_constant_column():
    t, p = standardize(table(np.full((10, 1), 4.0)), np.arange(10))
    assert np.all(t.X == 0)
    assert p.scale.tolist() == [1.0]


def test_standardize_uses_fit_rows_only(rng):
    X = np.concatenate([rng.normal(0, 1, 100), rng.normal(10, 1, 100)])[:, None]
    train_idx, test_idx = np.arange(100), np.arange(100, 200)
    t, _ = standardize(table(X), train_idx)
    assert abs(t.X[train_idx].mean()) < 1e-9
    assert t.X[test_idx].mean() > 5
    swapped, _ = standardize(table(X), test_idx)
    assert not np.allclose(swapped.X[test_idx], t.X[test_idx])
    assert abs(swapped.X[test_idx].mean()) < 1e-9


def test_standardizer_round_trip(rng):
    s = Standardizer.fit(rng.normal(size=(20, 3)))
    s2 = Standardizer.from_dict(json.loads(json.dumps(s.to_dict())))
    np.testing.assert_array_equal(s2.mean, s.mean)
    np.testing.assert_array_equal(s2.scale, s.scale)


# ---------------------------------------------------------------- classifiers


def test_logistic_blobs():
    X, y = blobs(100, 0)
    Xt, yt = blobs(100, 1)
    m = train_logistic(X, y)
    assert balanced_accuracy(m.predict(Xt), yt) >= 0.95
    assert balanced_accuracy(m.predict(X), y) >= 0.95


def test_logistic_xor_is_chance():
    X, y = xor(400, 0)
    Xt, yt = xor(400, 1)
    m = train_logistic(X, y)
    assert abs(balanced_accuracy(m.predict(Xt), yt) - 0.5) <= 0.1


def test_logistic_loss_trace_monotone():
    X, y = blobs(60, 2, sep=1.5, d=4)
    m = train_logistic(X, y, cfg=LogisticConfig(l2_lambda=0.1))
    trace = np.asarray(m.loss_trace)
    assert trace.shape[0] > 2
    assert np.all(np.diff(trace) <= 0)


def test_logistic_multiclass_probabilities(rng):
    X = np.vstack([rng.normal(size=(40, 2)) + c for c in ([0, 0], [6, 0], [0, 6])])
    y = np.repeat(["p", "q", "r"], 40)
    m = train_logistic(X, y)
    P = m.predict_proba(X)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    assert balanced_accuracy(m.predict(X), y) >= 0.95
    assert m.classes == ["p", "q", "r"]


def test_single_class_and_non_finite_rejected():
    X = np.zeros((5, 2))
    for kind in ("logistic", "rbf"):
        with pytest.raises(ModelError):
            train(kind, X, ["a"] * 5)
    X[0, 0] = np.nan
    with pytest.raises(ModelError):
        train_logistic(X, ["a", "b", "a", "b", "a"])


def test_rbf_xor():
    X, y = xor(300, 0)
    Xt, yt = xor(300, 1)
    m = train_rbf(X, y)
    assert balanced_accuracy(m.predict(Xt), yt) >= 0.95


def test_rbf_blobs_and_training_points():
    X, y = blobs(80, 3)
    Xt, yt = blobs(80, 4)
    m = train_rbf(X, y)
    assert balanced_accuracy(m.predict(Xt), yt) >= 0.95
    # trivially separated set, large C: every training point keeps its label
    Xs = np.array([[0.0, 0], [0, 1], [5, 5], [5, 6]])
    ys = np.array(["u", "u", "v", "v"])
    assert train_rbf(Xs, ys, cfg=RBFConfig(C=100)).predict(Xs).tolist() == ys.tolist()


def test_rbf_default_gamma_scale_rule(rng):
    X = rng.normal(size=(50, 3)) * [1, 2, 3]
    m = train_rbf(X, np.where(X[:, 0] > 0, "a", "b"))
    # features are standardised first, so the mean variance is 1
    assert m.params["gamma"] == pytest.approx(1 / 3, rel=1e-9)


def test_smo_kkt_conditions(rng):
    X, y = blobs(40, 5, sep=2.0)
    s = np.where(y == "a", 1.0, -1.0)
    K = rbf_kernel(X, X, 0.5)
    C = 1.0
    alpha, rho = smo_binary(K, s, C, tol=1e-6)
    assert np.all(alpha >= -1e-12) and np.all(alpha <= C + 1e-12)
    assert abs(np.dot(alpha, s)) < 1e-9
    f = K @ (alpha * s) - rho
    margin = s * f
    free = (alpha > 1e-6) & (alpha < C - 1e-6)
    np.testing.assert_allclose(margin[free], 1.0, atol=1e-3)
    assert np.all(margin[alpha <= 1e-6] >= 1 - 1e-3)
    assert np.all(margin[alpha >= C - 1e-6] <= 1 + 1e-3)


def test_linearly_separable_training_accuracy():
    for kind in ("logistic", "rbf"):
        X, y = blobs(50, 9)
        assert balanced_accuracy(train(kind, X, y).predict(X), y) >= 0.95


def test_model_json_round_trip(tmp_path, rng):
    X, y = blobs(30, 6)
    for kind in ("logistic", "rbf"):
        m = train(kind, X, y, ["u", "v"])
        m.save(tmp_path / f"{kind}.json")
        back = ClassifierModel.load(tmp_path / f"{kind}.json")
        np.testing.assert_array_equal(back.decision(X), m.decision(X))
        assert back.feature_names == ["u", "v"] and back.kind == m.kind
    obj = json.loads((tmp_path / "rbf.json").read_text())
    obj["schema_version"] = 99
    with pytest.raises(ModelError, match="schema version"):
        ClassifierModel.from_json(json.dumps(obj))
    with pytest.raises(ModelError):
        back.check_features(["v", "u"])


# ---------------------------------------------------------------- balanced accuracy


def test_balanced_accuracy_examples():
    assert balanced_accuracy(["a", "b", "c"], ["a", "b", "c"]) == 1.0
    assert balanced_accuracy(["a", "a", "b", "a"], ["a", "a", "b", "b"]) == 0.75
    assert balanced_accuracy(["a"] * 9, ["a", "b", "c"] * 3) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        balanced_accuracy(["a"], ["a", "b"])


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=50), st.permutations(range(4)))
def test_balanced_accuracy_relabel_invariant(pairs, perm):
    pred, act = np.array(pairs).T
    mapped = np.array(perm)
    assert balanced_accuracy(mapped[pred], mapped[act]) == pytest.approx(balanced_accuracy(pred, act))


def test_confusion_matrix():
    M = confusion_matrix(["a", "b", "b"], ["a", "a", "b"], ["a", "b"])
    assert M.tolist() == [[1, 1], [0, 1]]


# ---------------------------------------------------------------- protocols


def test_random_split_deterministic_feature():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(150, 3))
    # the label is a threshold on column 1, kept away from the boundary
    X[:, 1] = rng.choice([-1, 1], 150) * rng.uniform(0.5, 2.0, 150)
    y = np.where(X[:, 1] > 0, "pos", "neg")
    rep = random_split_eval(X, y, "logistic", SplitConfig(repeats=10, seed=1))
    assert rep.mean >= 0.99
    assert len(rep.scores) == 10 and rep.std >= 0
    assert np.sum(rep.confusion) == 10 * 30


def test_random_split_coin_flips():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 3))
    y = rng.choice(["h", "t"], 200)
    rep = random_split_eval(X, y, "logistic", SplitConfig(repeats=20, seed=2))
    assert abs(rep.mean - 0.5) <= 0.1


def test_random_split_reproducible():
    X, y = blobs(40, 3, sep=1.0)
    a = random_split_eval(X, y, "rbf", SplitConfig(repeats=1, seed=5))
    b = random_split_eval(X, y, "rbf", SplitConfig(repeats=1, seed=5))
    assert a.to_json() == b.to_json()


def test_random_splits_cover_classes():
    y = np.array(["a"] * 20 + ["b"])
    for tr, test in random_splits(21, y, SplitConfig(repeats=30, seed=0)):
        assert "b" in y[tr]
        assert len(np.intersect1d(tr, test)) == 0 and len(tr) + len(test) == 21
    with pytest.raises(EvaluationError):
        random_splits(3, np.array(["a", "b", "c"]), SplitConfig(test_frac=0.34, repeats=5, max_attempts=1))


def test_logo_detects_group_leak():
    rng = np.random.default_rng(3)
    groups = np.repeat([f"P{g:02d}" for g in range(20)], 15)
    group_label = dict(zip(np.unique(groups), rng.choice(["x", "y"], 20)))
    y = np.array([group_label[g] for g in groups])
    # pure group identity: a random 5-d code per group, plus one noise column
    code = dict(zip(np.unique(groups), rng.normal(size=(20, 5))))
    X = np.column_stack([np.array([code[g] for g in groups]), rng.normal(size=300)])
    rand = random_split_eval(X, y, "rbf", SplitConfig(repeats=10, seed=0))
    logo = logo_eval(X, y, groups, "rbf")
    assert rand.mean >= 0.9
    assert logo.mean <= 0.7
    assert logo.protocol == "logo" and len(logo.scores) == 20


def test_logo_group_independent_signal():
    rng = np.random.default_rng(4)
    groups = np.repeat(["A", "B", "C", "D", "E"], 40)
    X = rng.normal(size=(200, 2))
    X[:, 0] = rng.choice([-1, 1], 200) * rng.uniform(0.5, 2.0, 200)
    y = np.where(X[:, 0] > 0, "pos", "neg")
    assert logo_eval(X, y, groups, "logistic").mean >= 0.99


def test_logo_errors_and_skips():
    X = np.random.default_rng(0).normal(size=(12, 2))
    with pytest.raises(EvaluationError):
        logo_eval(X, ["a", "b"] * 6, ["g"] * 12)
    y = np.array(["a", "b"] * 5 + ["c", "c"])
    groups = np.array(["g1"] * 5 + ["g2"] * 5 + ["g3"] * 2)
    rep = logo_eval(X, y, groups, "logistic")
    assert rep.details["skipped"] == ["g3"]


# ---------------------------------------------------------------- permutation importance


def _importance_setup(seed=0):
    rng = np.random.default_rng(seed)
    n = 200
    y = rng.choice(["a", "b"], n)
    signal = (y == "a").astype(float) + 0.05 * rng.normal(size=n)
    X = np.column_stack([rng.normal(size=n), signal, np.full(n, 2.0)])
    X[:100, 2] = rng.normal(size=100)
    names = ["noise", "label", "const_in_test"]
    m = train_logistic(X[:100], y[:100], names)
    return m, X[100:], y[100:], names


def test_permutation_importance_ranking():
    m, Xt, yt, names = _importance_setup()
    ranked, base = permutation_importance(m, Xt, yt, names, n_perm=30, seed=0)
    assert ranked[0].feature == "label"
    assert ranked[0].importance == pytest.approx(base - 0.5, abs=0.1)
    by = {r.feature: r for r in ranked}
    assert by["const_in_test"].importance == 0.0 and by["const_in_test"].std == 0.0
    assert abs(by["noise"].importance) <= 0.05


def test_permutation_importance_stable_across_seeds():
    m, Xt, yt, names = _importance_setup()
    tops = {permutation_importance(m, Xt, yt, names, n_perm=10, seed=s)[0][0].feature for s in range(10)}
    assert tops == {"label"}


def test_permutation_importance_name_mismatch():
    m, Xt, yt, names = _importance_setup()
    with pytest.raises(ModelError):
        permutation_importance(m, Xt, yt, names[::-1])


# ---------------------------------------------------------------- PCA


def test_pca_plane_in_five_space(rng):
    coef = rng.normal(size=(2, 5))
    X = rng.normal(size=(300, 2)) @ coef + rng.normal(size=5)
    coords, ratio, comps = pca_project(X, 2)
    assert ratio.sum() == pytest.approx(1.0, abs=1e-9)
    Z = Standardizer.fit(X).transform(X)
    np.testing.assert_allclose(coords @ comps, Z, atol=1e-8)


def test_pca_isotropic():
    X = np.random.default_rng(7).normal(size=(5000, 4))
    _, ratio, _ = pca_project(X, 4)
    assert ratio[0] / ratio[-1] < 1.3


def test_pca_repeated_point_and_errors():
    coords, ratio, _ = pca_project(np.ones((10, 3)), 2)
    assert np.all(coords == 0) and np.all(ratio == 0)
    with pytest.raises(ValueError):
        pca_project(np.ones((10, 3)), 4)


def test_pca_sign_convention(rng):
    X = rng.normal(size=(100, 3)) * [3, 1, 0.5]
    _, _, comps = pca_project(X, 3)
    for c in comps:
        assert c[np.argmax(np.abs(c))] > 0
    a = pca_project(X, 2)[0]
    np.testing.assert_array_equal(a, pca_project(X, 2)[0])


# ---------------------------------------------------------------- feature-table CSV


def test_csv_round_trip(tmp_path, rng):
    meta = {"id": ["s0", "s1", "s2"], "participant": ["P01", "P01", "P02"], "label_type": ["fungiform"] * 3,
            "label_gender": ["F"] * 3, "label_age_group": ["20-29"] * 3}
    t = FeatureTable(rng.normal(size=(3, 2)) * 1e5, ["radius", "height"], meta)
    t.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == ",".join(ID_COLUMNS + ("radius", "height"))
    back = FeatureTable.from_csv(tmp_path / "t.csv", ["radius", "height"])
    np.testing.assert_array_equal(back.X, t.X)
    assert back.meta == t.meta
    assert back.labels("type").tolist() == ["fungiform"] * 3
    assert back.rows([2]).meta["participant"] == ["P02"]


def test_csv_schema_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError, match="schema v1"):
        FeatureTable.from_csv(p)
    p.write_text(",".join(ID_COLUMNS) + ",radius,height\nx,P,f,F,a,1,2\n")
    with pytest.raises(SchemaError, match="canonical order"):
        FeatureTable.from_csv(p, ["height", "radius"])
    p.write_text(",".join(ID_COLUMNS) + ",radius\nx,P,f,F,a,1,2\n")
    with pytest.raises(SchemaError, match="expected"):
        FeatureTable.from_csv(p)
    p.write_text(",".join(ID_COLUMNS) + ",radius\nx,P,f,F,a,oops\n")
    with pytest.raises(SchemaError, match="non-numeric"):
        FeatureTable.from_csv(p)
    with pytest.raises(SchemaError):
        FeatureTable(np.array([[np.nan]]), ["r"])
    with pytest.raises(SchemaError):
        FeatureTable(np.zeros((1, 2)), ["r", "r"])
