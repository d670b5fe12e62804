import json

import numpy as np
import pytest

from egoengage import forest
from egoengage.errors import DimensionMismatch, EmptyTrainingSet, LabelOutOfRange
from egoengage.forest import (
    ForestParams,
    forest_from_dict,
    forest_to_dict,
    predict_proba,
    predict_proba_matrix,
    train_forest,
)


def xor_blobs(n_per=200, sigma=0.15, seed=42):
    rng = np.random.default_rng(seed)
    centers = [(-1, -1, 0), (1, 1, 0), (-1, 1, 1), (1, -1, 1)]
    X, y = [], []
    for cx, cy, label in centers:
        X.append(rng.normal([cx, cy], sigma, size=(n_per, 2)))
        y += [label] * n_per
    X = np.vstack(X)
    y = np.array(y)
    perm = rng.permutation(len(y))
    return X[perm], y[perm]


class TestTraining:
    def test_single_class_posterior(self):
        X = np.array([[0.0], [1.0], [2.0]])
        model = train_forest(X, [1, 1, 1], ForestParams(n_trees=5), seed=0)
        assert model.n_classes == 2
        for x in X:
            assert np.array_equal(predict_proba(model, x), [0.0, 1.0])

    def test_xor_blobs_accuracy(self):
        X, y = xor_blobs()
        model = train_forest(X[:400], y[:400], ForestParams(n_trees=100), seed=3)
        acc = (predict_proba_matrix(model, X[400:]).argmax(1) == y[400:]).mean()
        assert acc >= 0.95

    def test_deterministic(self):
        X, y = xor_blobs(n_per=40)
        params = ForestParams(n_trees=20)
        assert train_forest(X, y, params, seed=9) == train_forest(X, y, params, seed=9)

    def test_seed_changes_model(self):
        X, y = xor_blobs(n_per=40)
        params = ForestParams(n_trees=5)
        assert train_forest(X, y, params, seed=1) != train_forest(X, y, params, seed=2)

    def test_parallel_matches_serial(self):
        X, y = xor_blobs(n_per=50)
        params = ForestParams(n_trees=12)
        serial = train_forest(X, y, params, seed=5)
        parallel = train_forest(X, y, params, seed=5, n_jobs=2)
        assert serial == parallel

    def test_in_bag_memorization(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(300, 6))
        y = rng.integers(0, 2, size=300)
        model = train_forest(X, y, ForestParams(n_trees=5, bootstrap=False), seed=1)
        acc = (predict_proba_matrix(model, X).argmax(1) == y).mean()
        assert acc == 1.0

    def test_depth_zero_gives_prior_leaf(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = [0, 0, 0, 1]
        model = train_forest(
            X, y, ForestParams(n_trees=1, max_depth=0, bootstrap=False), seed=0
        )
        assert np.array_equal(predict_proba(model, np.array([9.0])), [0.75, 0.25])

    def test_midpoint_threshold(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = [0, 0, 1, 1]
        model = train_forest(
            X, y, ForestParams(n_trees=1, max_features=1, bootstrap=False), seed=0
        )
        root = model.trees[0]
        assert root.feature_index == 0
        assert root.threshold == 1.5
        assert np.array_equal(predict_proba(model, np.array([0.7])), [1.0, 0.0])
        assert np.array_equal(predict_proba(model, np.array([1.6])), [0.0, 1.0])

    def test_errors(self):
        with pytest.raises(EmptyTrainingSet):
            train_forest(np.zeros((0, 3)), [], ForestParams(n_trees=1), seed=0)
        with pytest.raises(LabelOutOfRange):
            train_forest(np.zeros((2, 3)), [0, -1], ForestParams(n_trees=1), seed=0)
        with pytest.raises(LabelOutOfRange):
            train_forest(np.zeros((2, 3)), [0, 3], ForestParams(n_trees=1), seed=0, n_classes=2)
        with pytest.raises(LabelOutOfRange):
            train_forest(np.zeros((2, 3)), [0.5, 1.0], ForestParams(n_trees=1), seed=0)


class TestPrediction:
    def test_posterior_is_distribution(self):
        X, y = xor_blobs(n_per=60)
        model = train_forest(X, y, ForestParams(n_trees=30), seed=2)
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = predict_proba(model, rng.normal(size=2))
            assert p.min() >= 0.0 and p.max() <= 1.0
            assert abs(p.sum() - 1.0) < 1e-9

    def test_tree_order_invariance(self):
        X, y = xor_blobs(n_per=40)
        model = train_forest(X, y, ForestParams(n_trees=10), seed=4)
        shuffled = forest.ForestModel(
            trees=model.trees[::-1],
            n_features=model.n_features,
            n_classes=model.n_classes,
            params=model.params,
            master_seed=model.master_seed,
        )
        x = np.array([0.3, -0.9])
        assert predict_proba(model, x) == pytest.approx(predict_proba(shuffled, x), abs=1e-12)

    def test_matrix_matches_single(self):
        X, y = xor_blobs(n_per=40)
        model = train_forest(X, y, ForestParams(n_trees=15), seed=6)
        rng = np.random.default_rng(1)
        Q = rng.normal(size=(25, 2))
        batch = predict_proba_matrix(model, Q)
        for i, x in enumerate(Q):
            assert np.array_equal(batch[i], predict_proba(model, x))

    def test_dimension_mismatch(self):
        X, y = xor_blobs(n_per=10)
        model = train_forest(X, y, ForestParams(n_trees=2), seed=0)
        with pytest.raises(DimensionMismatch):
            predict_proba(model, np.zeros(3))
        with pytest.raises(DimensionMismatch):
            predict_proba_matrix(model, np.zeros((4, 3)))


class TestPersistence:
    def test_json_roundtrip_exact(self):
        X, y = xor_blobs(n_per=50)
        model = train_forest(X, y, ForestParams(n_trees=10), seed=8)
        doc = json.dumps(forest_to_dict(model))
        back = forest_from_dict(json.loads(doc))
        assert back == model

    def test_file_roundtrip(self, tmp_path):
        X, y = xor_blobs(n_per=30)
        model = train_forest(X, y, ForestParams(n_trees=4), seed=1)
        path = tmp_path / "forest.json"
        forest.save_forest(model, path)
        assert forest.load_forest(path) == model

    def test_unknown_version_rejected(self):
        X, y = xor_blobs(n_per=10)
        doc = forest_to_dict(train_forest(X, y, ForestParams(n_trees=1), seed=0))
        doc["version"] = 9
        with pytest.raises(ValueError):
            forest_from_dict(doc)


class TestParams:
    def test_max_features_rules(self):
        assert ForestParams(max_features="sqrt").resolve_max_features(388) == 19
        assert ForestParams(max_features=5).resolve_max_features(3) == 3
        assert ForestParams(max_features=0).resolve_max_features(3) == 1
        with pytest.raises(ValueError):
            ForestParams(max_features="log2").resolve_max_features(10)

    def test_validation(self):
        with pytest.raises(ValueError):
            ForestParams(n_trees=0)
        with pytest.raises(ValueError):
            ForestParams(min_samples_leaf=0)

    def test_default_tree_count(self):
        assert ForestParams().n_trees == 2400
