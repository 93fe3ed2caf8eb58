"""Plain random-forest classifier used as the comparison baseline.

Shares the categorical split generation with the survival trees (categories
ordered by in-node event rate, prefix cuts) so that differences against the
leaf-label technique isolate the splitting criterion: Gini impurity here,
log-rank there.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, sqrt
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError
from .trees import FlatTree, gini_candidate_scores, grow_tree


@dataclass
class BaselineParams:
    n_trees: int = 100
    mtry: Optional[int] = None
    min_split: int = 2
    min_leaf: int = 1
    seed: int = 0

    def resolved_mtry(self, n_features: int) -> int:
        return self.mtry if self.mtry is not None else ceil(sqrt(n_features))


@dataclass
class ClassificationTree:
    tree: FlatTree
    n0: np.ndarray
    n1: np.ndarray


@dataclass
class ClassificationForest:
    params: BaselineParams
    arities: tuple
    trees: list

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.int64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.arities):
            raise ConfigError(f"expected {len(self.arities)} features, got {X.shape[1]}")
        return X

    def predict_proba_batch(self, X) -> np.ndarray:
        """Mean leaf positive fraction over trees."""
        X = self._check(X)
        total = np.zeros(X.shape[0])
        for t in self.trees:
            frac = t.n1 / (t.n0 + t.n1)
            total += frac[t.tree.apply(X, self.arities)]
        return total / len(self.trees)

    def predict_proba(self, x) -> float:
        return float(self.predict_proba_batch(np.asarray(x)[None, :])[0])

    def predict_label_batch(self, X) -> np.ndarray:
        return (self.predict_proba_batch(X) > 0.5).astype(np.int64)


def _grow_classification_tree(X, labels, arities, params, tree_index) -> ClassificationTree:
    rng = np.random.default_rng(params.seed + tree_index)
    n = labels.size
    boot = np.sort(rng.integers(0, n, size=n))

    n0_list, n1_list = [], []

    def build_leaf(idx):
        n1 = int(labels[idx].sum())
        n0_list.append(idx.size - n1)
        n1_list.append(n1)
        return len(n1_list) - 1

    def scorer(idx, G):
        return gini_candidate_scores(labels[idx], G)

    flat = grow_tree(
        X, labels, boot, arities, params.resolved_mtry(X.shape[1]),
        params.min_split, params.min_leaf, rng, scorer, build_leaf,
    )
    return ClassificationTree(
        tree=flat,
        n0=np.asarray(n0_list, dtype=np.int64),
        n1=np.asarray(n1_list, dtype=np.int64),
    )


def fit_classifier(X, labels, arities, params: BaselineParams) -> ClassificationForest:
    X = np.asarray(X, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    arities = tuple(int(a) for a in arities)
    if X.ndim != 2 or X.shape[1] != len(arities):
        raise ConfigError("X must be 2-d with one column per arity entry")
    if X.shape[0] < 1:
        raise DataError("empty training set")
    trees = [_grow_classification_tree(X, labels, arities, params, i)
             for i in range(params.n_trees)]
    return ClassificationForest(params=params, arities=arities, trees=trees)
