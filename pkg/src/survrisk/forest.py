"""Random survival forest with log-rank splits and per-leaf label counts.

Each tree grows on a bootstrap resample; leaves hold Nelson-Aalen and
Kaplan-Meier curves over their in-leaf samples, expressed on the forest-wide
event-time grid, plus the count of censored/event training samples (the
label bookkeeping that leaf-node classification reads).  Tree ``i`` draws
its randomness from ``seed + i``, so models are identical across runs and
across worker counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil, sqrt
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError
from .stepfun import StepFunction
from .trees import FlatTree, grow_tree, logrank_candidate_scores, _first_occurrences


@dataclass
class ForestParams:
    n_trees: int = 100
    mtry: Optional[int] = None  # ceil(sqrt(n_features)) when None
    min_split: int = 6
    min_leaf: int = 3
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.min_split < 2 or self.min_leaf < 1:
            raise ConfigError("min_split must be >= 2 and min_leaf >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be >= 1 when given")

    def resolved_mtry(self, n_features: int) -> int:
        return self.mtry if self.mtry is not None else ceil(sqrt(n_features))


@dataclass
class SurvivalTree:
    """One grown tree plus its leaf payloads.

    Leaf curves are stored sparsely as (position in the forest grid, value)
    pairs; they materialize to dense grid arrays on demand.
    """

    tree: FlatTree
    leaf_event_pos: list  # np.int64 positions into the forest grid, per leaf
    leaf_chf: list
    leaf_surv: list
    n0: np.ndarray
    n1: np.ndarray
    chf_grid_sum: np.ndarray  # per leaf, sum of the dense CHF over the grid
    _flat: dict = field(default_factory=dict, repr=False)

    def n_leaves(self) -> int:
        return self.n0.size

    def _flattened(self):
        if not self._flat:
            sizes = [p.size for p in self.leaf_event_pos]
            offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
            self._flat = {
                "pos": np.concatenate(self.leaf_event_pos) if sizes else np.empty(0, dtype=np.int64),
                "chf": np.concatenate(self.leaf_chf) if sizes else np.empty(0),
                "surv": np.concatenate(self.leaf_surv) if sizes else np.empty(0),
                "offsets": offsets,
            }
        return self._flat

    def leaf_values_at(self, grid_pos: int, kind: str) -> np.ndarray:
        """Per-leaf curve value at grid position ``grid_pos`` (-1 = before grid)."""
        initial = 1.0 if kind == "surv" else 0.0
        if grid_pos < 0:
            return np.full(self.n_leaves(), initial)
        flat = self._flattened()
        inside = np.cumsum(flat["pos"] <= grid_pos)
        inside = np.concatenate([[0], inside])
        counts = inside[flat["offsets"][1:]] - inside[flat["offsets"][:-1]]
        last = flat["offsets"][:-1] + counts - 1
        vals = flat[kind]
        return np.where(counts > 0, vals[np.maximum(last, 0)], initial)

    def dense_leaf_matrix(self, grid_size: int, kind: str) -> np.ndarray:
        """(n_leaves, grid_size) dense step values, exact forward fill."""
        initial = 1.0 if kind == "surv" else 0.0
        flat = self._flattened()
        n_leaves = self.n_leaves()
        rows = np.repeat(np.arange(n_leaves), np.diff(flat["offsets"]))
        set_col = np.full((n_leaves, grid_size), -1, dtype=np.int64)
        set_col[rows, flat["pos"]] = flat["pos"]
        np.maximum.accumulate(set_col, axis=1, out=set_col)
        vals = np.zeros((n_leaves, grid_size))
        vals[rows, flat["pos"]] = flat[kind]
        out = np.take_along_axis(vals, np.maximum(set_col, 0), axis=1)
        out[set_col < 0] = initial
        return out


@dataclass
class SurvivalForest:
    params: ForestParams
    arities: tuple
    grid: np.ndarray  # sorted unique event times of the training data
    trees: list  # list[SurvivalTree]

    def __post_init__(self):
        if len(self.trees) < 1:
            raise ConfigError("a forest needs at least one tree")

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.int64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.arities):
            raise ConfigError(f"expected {len(self.arities)} features, got {X.shape[1]}")
        for j, arity in enumerate(self.arities):
            if X[:, j].size and (X[:, j].min() < 0 or X[:, j].max() >= arity):
                raise ConfigError(f"feature {j}: category out of range for arity {arity}")
        return X

    def _grid_pos(self, t: float) -> int:
        return int(np.searchsorted(self.grid, t, side="right")) - 1

    def predict_risk_batch(self, X) -> np.ndarray:
        """Ensemble cumulative-hazard mass: mean over trees of the CHF summed
        over the event-time grid."""
        X = self._check(X)
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.chf_grid_sum[t.tree.apply(X, self.arities)]
        return total / len(self.trees)

    def predict_risk(self, x) -> float:
        return float(self.predict_risk_batch(np.asarray(x)[None, :])[0])

    def survival_at_batch(self, X, horizon_days: float) -> np.ndarray:
        """Ensemble survival probability at a horizon (right-constant step)."""
        X = self._check(X)
        pos = self._grid_pos(horizon_days)
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.leaf_values_at(pos, "surv")[t.tree.apply(X, self.arities)]
        return total / len(self.trees)

    def predict_survival_batch(self, X) -> np.ndarray:
        """(n_samples, grid) matrix of ensemble survival curves."""
        X = self._check(X)
        total = np.zeros((X.shape[0], self.grid.size))
        for t in self.trees:
            dense = t.dense_leaf_matrix(self.grid.size, "surv")
            total += dense[t.tree.apply(X, self.arities)]
        return total / len(self.trees)

    def predict_survival(self, x) -> StepFunction:
        return StepFunction(self.grid, self.predict_survival_batch(np.asarray(x)[None, :])[0], initial=1.0)

    def predict_chf(self, x) -> StepFunction:
        X = self._check(np.asarray(x)[None, :])
        total = np.zeros(self.grid.size)
        for t in self.trees:
            total += t.dense_leaf_matrix(self.grid.size, "chf")[t.tree.apply(X, self.arities)][0]
        return StepFunction(self.grid, total / len(self.trees), initial=0.0)

    def leaf_distribution(self, x) -> list:
        """Per-tree (n0, n1) label counts at the leaf reached by x."""
        X = self._check(np.asarray(x)[None, :])
        out = []
        for t in self.trees:
            slot = t.tree.apply_one(X[0], self.arities)
            out.append((int(t.n0[slot]), int(t.n1[slot])))
        return out

    def leaf_fraction_batch(self, X) -> np.ndarray:
        """(n_samples, n_trees) event fraction n1/(n0+n1) at the reached leaves."""
        X = self._check(X)
        out = np.empty((X.shape[0], len(self.trees)))
        for j, t in enumerate(self.trees):
            frac = t.n1 / (t.n0 + t.n1)
            out[:, j] = frac[t.tree.apply(X, self.arities)]
        return out


def _build_survival_leaf_factory(times, events, grid):
    grid_size = grid.size

    def build(idx):
        t_node = times[idx]
        e_node = events[idx]
        first = _first_occurrences(t_node)
        d = np.add.reduceat(e_node, first)
        n = t_node.size - first
        has_event = d > 0
        inc = d[has_event] / n[has_event]
        pos = np.searchsorted(grid, t_node[first][has_event]).astype(np.int64)
        chf = np.cumsum(inc)
        surv = np.cumprod(1.0 - inc)
        seg = np.diff(np.concatenate([pos, [grid_size]]))
        chf_sum = float(np.sum(chf * seg))
        n1 = int(e_node.sum())
        return pos, chf, surv, int(e_node.size - n1), n1, chf_sum

    return build


def _grow_survival_tree(X, times, events, arities, params, grid, tree_index) -> SurvivalTree:
    rng = np.random.default_rng(params.seed + tree_index)
    n = times.size
    boot = rng.integers(0, n, size=n)
    boot = boot[np.argsort(times[boot], kind="stable")]

    payload = {"pos": [], "chf": [], "surv": [], "n0": [], "n1": [], "chf_sum": []}
    make_leaf = _build_survival_leaf_factory(times, events, grid)

    def build_leaf(idx):
        pos, chf, surv, n0, n1, chf_sum = make_leaf(idx)
        payload["pos"].append(pos)
        payload["chf"].append(chf)
        payload["surv"].append(surv)
        payload["n0"].append(n0)
        payload["n1"].append(n1)
        payload["chf_sum"].append(chf_sum)
        return len(payload["pos"]) - 1

    def scorer(idx, G):
        return logrank_candidate_scores(times[idx], events[idx], G)

    flat = grow_tree(
        X, events, boot, arities, params.resolved_mtry(X.shape[1]),
        params.min_split, params.min_leaf, rng, scorer, build_leaf,
    )
    return SurvivalTree(
        tree=flat,
        leaf_event_pos=payload["pos"],
        leaf_chf=payload["chf"],
        leaf_surv=payload["surv"],
        n0=np.asarray(payload["n0"], dtype=np.int64),
        n1=np.asarray(payload["n1"], dtype=np.int64),
        chf_grid_sum=np.asarray(payload["chf_sum"]),
    )


def fit(X, times, events, arities, params: ForestParams) -> SurvivalForest:
    """Fit a survival forest on integer-categorical features.

    Requires at least ``min_split`` samples and at least one event.
    """
    X = np.asarray(X, dtype=np.int64)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=np.int64)
    arities = tuple(int(a) for a in arities)
    if X.ndim != 2 or X.shape[1] != len(arities):
        raise ConfigError("X must be 2-d with one column per arity entry")
    for j, arity in enumerate(arities):
        if arity < 2:
            raise ConfigError(f"feature {j}: arity must be >= 2")
        if X[:, j].min() < 0 or X[:, j].max() >= arity:
            raise ConfigError(f"feature {j}: category out of range for arity {arity}")
    if X.shape[0] < params.min_split:
        raise DataError(f"need at least min_split={params.min_split} samples")
    if not np.any(events == 1):
        raise DataError("no events in training data")
    if np.any(times <= 0):
        raise DataError("observation times must be positive")

    grid = np.unique(times[events == 1])
    indices = range(params.n_trees)
    if params.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=params.n_jobs) as pool:
            trees = list(pool.map(
                lambda i: _grow_survival_tree(X, times, events, arities, params, grid, i), indices))
    else:
        trees = [_grow_survival_tree(X, times, events, arities, params, grid, i) for i in indices]
    return SurvivalForest(params=params, arities=arities, grid=grid, trees=trees)
