"""Categorical decision-tree growth shared by both forest flavors.

Trees split on category subsets.  Candidate binary partitions of a feature
are generated by ordering its in-node categories by event rate and scanning
the induced prefix cuts (exact for binary features, O(k log k) instead of
2^(k-1) subsets otherwise).  All candidates of a node are scored in one
vectorized pass; ties break toward the lowest feature index, then the
lexicographically smallest left category set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _first_occurrences(sorted_values: np.ndarray) -> np.ndarray:
    """Indices of the first occurrence of each run in a sorted array."""
    if sorted_values.size == 0:
        return np.empty(0, dtype=np.int64)
    return np.concatenate([[0], np.flatnonzero(np.diff(sorted_values)) + 1]).astype(np.int64)


def logrank_candidate_scores(times_node, events_node, G) -> np.ndarray:
    """Log-rank chi-square scores for every candidate column of G.

    ``times_node`` must be ascending; G is a boolean membership matrix with
    one column per candidate left group, rows aligned with the node samples.
    """
    first = _first_occurrences(times_node)
    d = np.add.reduceat(events_node, first)
    n = times_node.size - first
    ev_col = events_node[:, None]
    d_left = np.add.reduceat(G & (ev_col > 0), first, axis=0)
    cum_g = np.cumsum(G, axis=0)
    prefix = np.vstack([np.zeros((1, G.shape[1]), dtype=np.int64), cum_g])[first]
    n_left = cum_g[-1][None, :] - prefix

    has_event = d > 0
    d = d[has_event][:, None]
    n_col = n[has_event][:, None]
    d_left = d_left[has_event]
    n_left = n_left[has_event]
    if d.size == 0:
        return np.zeros(G.shape[1])
    frac = n_left / n_col
    o_minus_e = np.sum(d_left - d * frac, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        v_terms = np.where(n_col > 1, d * frac * (1.0 - frac) * (n_col - d) / (n_col - 1), 0.0)
    variance = np.sum(v_terms, axis=0)
    scores = np.zeros(G.shape[1])
    ok = variance > 0
    scores[ok] = o_minus_e[ok] ** 2 / variance[ok]
    return scores


def gini_candidate_scores(labels_node, G) -> np.ndarray:
    """Gini impurity decrease for every candidate column of G."""
    m = labels_node.size
    total_pos = int(labels_node.sum())
    n_left = G.sum(axis=0)
    pos_left = (G & (labels_node[:, None] > 0)).sum(axis=0)
    n_right = m - n_left
    pos_right = total_pos - pos_left

    def gini(n, pos):
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(n > 0, pos / np.maximum(n, 1), 0.0)
        return 2.0 * p * (1.0 - p)

    parent = gini(np.array([m]), np.array([total_pos]))[0]
    children = (n_left / m) * gini(n_left, pos_left) + (n_right / m) * gini(n_right, pos_right)
    return parent - children


@dataclass
class FlatTree:
    """Nodes as parallel arrays; leaf payloads live with the owning forest."""

    feature: np.ndarray  # -1 marks leaves
    left_cats: list  # tuple of category ids routed left, None for leaves
    left: np.ndarray
    right: np.ndarray
    leaf_slot: np.ndarray  # index into the leaf payload arrays, -1 internal
    _masks: list = field(default_factory=list, repr=False)
    _sets: list = field(default_factory=list, repr=False)

    def n_nodes(self) -> int:
        return self.feature.size

    def _ensure_routing(self, arities) -> None:
        if self._masks:
            return
        masks, sets = [], []
        for i in range(self.feature.size):
            f = self.feature[i]
            if f < 0:
                masks.append(None)
                sets.append(None)
            else:
                mask = np.zeros(arities[f], dtype=bool)
                mask[list(self.left_cats[i])] = True
                masks.append(mask)
                sets.append(frozenset(self.left_cats[i]))
        self._masks = masks
        self._sets = sets

    def apply(self, X: np.ndarray, arities) -> np.ndarray:
        """Leaf slot for every row of X."""
        self._ensure_routing(arities)
        out = np.empty(X.shape[0], dtype=np.int64)
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            f = self.feature[node]
            if f < 0:
                out[rows] = self.leaf_slot[node]
                continue
            go_left = self._masks[node][X[rows, f]]
            left_rows = rows[go_left]
            right_rows = rows[~go_left]
            if left_rows.size:
                stack.append((self.left[node], left_rows))
            if right_rows.size:
                stack.append((self.right[node], right_rows))
        return out

    def apply_one(self, x, arities) -> int:
        self._ensure_routing(arities)
        node = 0
        while self.feature[node] >= 0:
            if int(x[self.feature[node]]) in self._sets[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return int(self.leaf_slot[node])


def _node_candidates(X, events, idx, feats, arities, min_leaf):
    """Membership matrix and (feature, left set) metadata for one node."""
    ev = events[idx].astype(np.float64)
    m = idx.size
    blocks, meta = [], []
    for f in feats:
        col = X[idx, f]
        counts = np.bincount(col, minlength=arities[f])
        present = np.flatnonzero(counts)
        if present.size < 2:
            continue
        esum = np.bincount(col, weights=ev, minlength=arities[f])
        rates = esum[present] / counts[present]
        order = present[np.lexsort((present, rates))]
        pos = np.zeros(arities[f], dtype=np.int64)
        pos[order] = np.arange(order.size)
        ranks = pos[col]
        sizes = np.cumsum(counts[order])[:-1]
        valid = (sizes >= min_leaf) & (m - sizes >= min_leaf)
        keep = np.flatnonzero(valid)
        if keep.size == 0:
            continue
        cuts = ranks[:, None] <= keep[None, :]
        blocks.append(cuts)
        for j in keep:
            meta.append((int(f), tuple(sorted(int(c) for c in order[: j + 1]))))
    if not blocks:
        return None, []
    return np.hstack(blocks), meta


def grow_tree(X, events, idx_sorted, arities, mtry, min_split, min_leaf, rng,
              score_candidates, build_leaf) -> FlatTree:
    """Grow one tree depth-first.

    ``idx_sorted`` are the (bootstrap) sample indices in the order required
    by the scorer (time-ascending for log-rank, any for Gini); partitions
    preserve that order.  ``score_candidates(idx, G)`` returns one score per
    column of G; a split needs a strictly positive score. ``build_leaf(idx)``
    registers a leaf payload and returns its slot.
    """
    n_features = X.shape[1]
    feature, left_cats, left, right, leaf_slot = [], [], [], [], []

    def new_node() -> int:
        feature.append(-1)
        left_cats.append(None)
        left.append(-1)
        right.append(-1)
        leaf_slot.append(-1)
        return len(feature) - 1

    stack = [(new_node(), idx_sorted)]
    while stack:
        node, idx = stack.pop()
        best = None
        if idx.size >= min_split:
            feats = np.sort(rng.choice(n_features, size=min(mtry, n_features), replace=False))
            G, meta = _node_candidates(X, events, idx, feats, arities, min_leaf)
            if G is not None:
                scores = score_candidates(idx, G)
                for k, score in enumerate(scores):
                    if score <= 0.0:
                        continue
                    key = (meta[k][0], meta[k][1])
                    if best is None or score > best[0] or (score == best[0] and key < (best[1], best[2])):
                        best = (score, key[0], key[1], k)
        if best is None:
            leaf_slot[node] = build_leaf(idx)
            continue
        _, f, cats, k = best
        feature[node] = f
        left_cats[node] = cats
        go_left = G[:, k]
        li = new_node()
        ri = new_node()
        left[node] = li
        right[node] = ri
        stack.append((ri, idx[~go_left]))
        stack.append((li, idx[go_left]))

    return FlatTree(
        feature=np.asarray(feature, dtype=np.int64),
        left_cats=left_cats,
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        leaf_slot=np.asarray(leaf_slot, dtype=np.int64),
    )
