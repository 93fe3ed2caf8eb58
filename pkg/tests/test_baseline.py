import numpy as np
import pytest

from survrisk.baseline import (
    BaselineParams,
    ClassificationForest,
    ClassificationTree,
    fit_classifier,
)
from survrisk.model_io import load_model, save_model
from survrisk.trees import FlatTree


def leaf_tree(n0, n1):
    return ClassificationTree(
        tree=FlatTree(feature=np.array([-1]), left_cats=[None], left=np.array([-1]),
                      right=np.array([-1]), leaf_slot=np.array([0])),
        n0=np.array([n0]),
        n1=np.array([n1]),
    )


def test_pure_class_data_gives_single_leaf_trees(rng):
    X = rng.integers(0, 2, size=(30, 3))
    labels = np.ones(30, dtype=np.int64)
    forest = fit_classifier(X, labels, (2, 2, 2), BaselineParams(n_trees=5))
    assert all(t.tree.n_nodes() == 1 for t in forest.trees)
    assert forest.predict_proba(np.array([0, 1, 0])) == 1.0


def test_same_seed_identical_model(tmp_path, rng):
    X = rng.integers(0, 2, size=(50, 4))
    labels = (X[:, 0] ^ X[:, 1]).astype(np.int64)
    for name in ("a", "b"):
        forest = fit_classifier(X, labels, (2,) * 4, BaselineParams(n_trees=6, seed=5))
        save_model(tmp_path / f"{name}.json", forest)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_separable_data_training_accuracy_one(rng):
    n = 80
    X = rng.integers(0, 2, size=(n, 5))
    labels = X[:, 2].astype(np.int64)
    forest = fit_classifier(X, labels, (2,) * 5, BaselineParams(n_trees=20, seed=1))
    assert np.array_equal(forest.predict_label_batch(X), labels)


def test_predict_proba_mean_of_leaf_fractions():
    forest = ClassificationForest(
        params=BaselineParams(n_trees=2), arities=(2,),
        trees=[leaf_tree(0, 5), leaf_tree(5, 5)],
    )
    assert forest.predict_proba(np.array([0])) == pytest.approx(0.75)


def test_all_normal_leaves_probability_zero():
    forest = ClassificationForest(
        params=BaselineParams(n_trees=2), arities=(2,),
        trees=[leaf_tree(4, 0), leaf_tree(7, 0)],
    )
    assert forest.predict_proba(np.array([1])) == 0.0


def test_probability_in_unit_interval(rng):
    X = rng.integers(0, 3, size=(60, 3))
    labels = rng.integers(0, 2, size=60)
    forest = fit_classifier(X, labels, (3, 3, 3), BaselineParams(n_trees=10, seed=2))
    probs = forest.predict_proba_batch(rng.integers(0, 3, size=(25, 3)))
    assert np.all((probs >= 0.0) & (probs <= 1.0))


def test_leaf_counts_sum_to_bootstrap_size(rng):
    X = rng.integers(0, 2, size=(40, 3))
    labels = rng.integers(0, 2, size=40)
    forest = fit_classifier(X, labels, (2, 2, 2), BaselineParams(n_trees=8, seed=3))
    for tree in forest.trees:
        assert int(np.sum(tree.n0 + tree.n1)) == 40


def test_model_file_round_trip(tmp_path, rng):
    X = rng.integers(0, 2, size=(40, 3))
    labels = (X[:, 0] & X[:, 1]).astype(np.int64)
    forest = fit_classifier(X, labels, (2, 2, 2), BaselineParams(n_trees=4, seed=9))
    save_model(tmp_path / "clf.json", forest)
    loaded, classifier = load_model(tmp_path / "clf.json")
    assert classifier is None
    assert isinstance(loaded, ClassificationForest)
    probe = rng.integers(0, 2, size=(15, 3))
    assert np.array_equal(forest.predict_proba_batch(probe), loaded.predict_proba_batch(probe))
