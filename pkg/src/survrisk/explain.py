"""Shapley attribution computed directly on the survival model's output.

The prediction surface is the model's own classification (binary mode) or a
smooth score (probability mode); no surrogate model is trained.  Masked
features are marginalized over a background sample set, coalitions are
weighted by the Shapley kernel, and the attribution solves a weighted least
squares with the efficiency constraint folded in, so the empty and full
coalitions are honored exactly.  Exact mode enumerates every proper
coalition; sampled mode stratifies the coalition budget by size.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import comb

from .classify import RiskModel, Technique, predict_labels, predict_scores
from .errors import ConfigError, DataError
from .stepfun import StepFunction

EXACT_MAX_FEATURES = 12


def prediction_function(model: RiskModel, mode: str = "binary"):
    """Callable over feature matrices exposing the model to the explainer.

    ``binary`` returns the configured technique's 0/1 label as a float;
    ``probability`` returns the disease probability analogue: 1 - S(horizon)
    for sp, risk/(1+risk) for rs, the leaf event fraction for ln.
    """
    if mode == "binary":
        def f(X):
            labels, _ = predict_labels(model, np.asarray(X, dtype=np.int64))
            return labels.astype(float)
        return f
    if mode == "probability":
        technique = model.config.technique

        def f(X):
            scores = predict_scores(model, np.asarray(X, dtype=np.int64))
            if technique is Technique.SP:
                return 1.0 - scores
            if technique is Technique.RS:
                return scores / (1.0 + scores)
            return scores
        return f
    raise ConfigError(f"unknown prediction mode {mode!r} (use 'binary' or 'probability')")


@dataclass
class Attribution:
    base_value: float
    phi: np.ndarray
    f_x: float
    exact: bool
    degenerate: bool = False

    @property
    def residual(self) -> float:
        return self.f_x - self.base_value - float(np.sum(self.phi))


def shapley_kernel_weight(n_features: int, size: int) -> float:
    """Weight (M-1) / (C(M,s) * s * (M-s)) of a size-s coalition."""
    return (n_features - 1) / (comb(n_features, size) * size * (n_features - size))


def _exact_coalitions(n_features: int) -> np.ndarray:
    codes = np.arange(1, 2 ** n_features - 1, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n_features)) & 1).astype(bool)


def _largest_remainder(shares: np.ndarray, total: int) -> np.ndarray:
    raw = shares / shares.sum() * total
    counts = np.floor(raw).astype(np.int64)
    remainder = total - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:remainder]] += 1
    return counts


def _allocate_with_caps(mass: np.ndarray, caps: np.ndarray, total: int) -> np.ndarray:
    """Proportional allocation, spilling over from capped strata."""
    counts = np.zeros(mass.size, dtype=np.int64)
    active = np.ones(mass.size, dtype=bool)
    while total > counts.sum() and active.any():
        idxs = np.flatnonzero(active)
        add = _largest_remainder(mass[idxs], int(total - counts.sum()))
        placed = np.minimum(counts[idxs] + add, caps[idxs]) - counts[idxs]
        counts[idxs] += placed
        active[idxs[counts[idxs] >= caps[idxs]]] = False
        if placed.sum() == 0:
            break
    return counts


def _sampled_coalitions(n_features: int, budget: int, rng: np.random.Generator) -> np.ndarray:
    sizes = np.arange(1, n_features)
    mass = (n_features - 1) / (sizes * (n_features - sizes))
    capacity = np.array([comb(n_features, int(s), exact=True) for s in sizes], dtype=float)
    caps = np.minimum(capacity, float(budget)).astype(np.int64)
    counts = _allocate_with_caps(mass, caps, budget)
    rows = []
    for s, want in zip(sizes, counts):
        if want == 0:
            continue
        if want >= capacity[s - 1]:
            block = np.zeros((int(capacity[s - 1]), n_features), dtype=bool)
            for i, members in enumerate(itertools.combinations(range(n_features), int(s))):
                block[i, list(members)] = True
            rows.append(block)
            continue
        chosen = set()
        attempts = 0
        while len(chosen) < want and attempts < 20 * want:
            chosen.add(tuple(sorted(map(int, rng.permutation(n_features)[:s]))))
            attempts += 1
        block = np.zeros((len(chosen), n_features), dtype=bool)
        for i, members in enumerate(sorted(chosen)):
            block[i, list(members)] = True
        rows.append(block)
    return np.vstack(rows)


def _masked_values(f, x, background, Z, chunk: int = 128) -> np.ndarray:
    """Mean model output with masked features replaced by background values."""
    n_bg = background.shape[0]
    out = np.empty(Z.shape[0])
    for start in range(0, Z.shape[0], chunk):
        zc = Z[start:start + chunk]
        rows = np.where(zc[:, None, :], x[None, None, :], background[None, :, :])
        preds = np.asarray(f(rows.reshape(-1, x.size)))
        out[start:start + chunk] = preds.reshape(zc.shape[0], n_bg).mean(axis=1)
    return out


def kernel_shap(f, x, background, budget: int = 2048, seed: int = 0,
                mode: str = "auto") -> Attribution:
    """Shapley attribution of ``f`` at ``x`` against a background sample set.

    ``auto`` runs exact when the coalition space fits the budget (or has at
    most EXACT_MAX_FEATURES features) and falls back to stratified sampling
    under ``seed``; ``exact``/``sampled`` force one path.  The efficiency
    constraint sum(phi) = f(x) - base holds by construction, so exact-mode
    residuals vanish.
    """
    if mode not in ("auto", "exact", "sampled"):
        raise ConfigError(f"unknown kernel mode {mode!r}")
    x = np.asarray(x, dtype=np.int64).ravel()
    background = np.asarray(background, dtype=np.int64)
    if background.ndim != 2 or background.shape[0] == 0:
        raise DataError("background must be a nonempty 2-d sample set")
    n_features = x.size
    if n_features < 1:
        raise ConfigError("need at least one feature to explain")

    base = float(np.mean(np.asarray(f(background))))
    f_x = float(np.asarray(f(x[None, :]))[0])
    v_full = f_x - base

    if n_features == 1:
        return Attribution(base_value=base, phi=np.array([v_full]), f_x=f_x, exact=True)

    total = 2 ** n_features - 2
    if mode == "auto":
        exact = n_features <= EXACT_MAX_FEATURES or budget >= total
    else:
        exact = mode == "exact"
    if exact:
        Z = _exact_coalitions(n_features)
    else:
        Z = _sampled_coalitions(n_features, min(budget, total), np.random.default_rng(seed))
    weights = np.array([shapley_kernel_weight(n_features, int(s)) for s in Z.sum(axis=1)])
    v = _masked_values(f, x, background, Z) - base

    # eliminate the last coefficient through the efficiency constraint
    A = Z[:, :-1].astype(float) - Z[:, -1:].astype(float)
    b = v - Z[:, -1] * v_full
    sw = np.sqrt(weights)
    Aw = A * sw[:, None]
    if np.linalg.matrix_rank(Aw) < n_features - 1:
        return Attribution(base_value=base, phi=np.zeros(n_features), f_x=f_x,
                           exact=exact, degenerate=True)
    phi_rest, *_ = np.linalg.lstsq(Aw, b * sw, rcond=None)
    phi = np.concatenate([phi_rest, [v_full - phi_rest.sum()]])
    return Attribution(base_value=base, phi=phi, f_x=f_x, exact=exact)


def explain_samples(model: RiskModel, X_explain, background, budget: int = 2048,
                    seed: int = 0, mode: str = "binary") -> list:
    """Attribution per row of ``X_explain`` (sampled coalitions reseeded per row)."""
    f = prediction_function(model, mode)
    X_explain = np.asarray(X_explain, dtype=np.int64)
    return [kernel_shap(f, X_explain[i], background, budget=budget, seed=seed + i)
            for i in range(X_explain.shape[0])]


def global_importance(attributions, feature_names=None) -> list:
    """Mean |phi| per feature across samples, sorted descending.

    Returns (name, importance) pairs; ties break by feature index.
    """
    if not attributions:
        raise DataError("no attributions to rank")
    phis = np.vstack([a.phi for a in attributions])
    means = np.abs(phis).mean(axis=0)
    if feature_names is None:
        feature_names = [f"f_{i}" for i in range(means.size)]
    order = np.lexsort((np.arange(means.size), -means))
    return [(feature_names[i], float(means[i])) for i in order]


def _rank_map(ranking, k: int) -> dict:
    return {name: pos + 1 for pos, (name, _) in enumerate(ranking[:k])}


def ranking_agreement(ranking_a, ranking_b, k: int):
    """(top-k overlap, Spearman correlation over the union of both top-k lists).

    Features absent from one side's top-k take rank k+1 there.
    """
    map_a = _rank_map(ranking_a, k)
    map_b = _rank_map(ranking_b, k)
    overlap = len(set(map_a) & set(map_b))
    union = sorted(set(map_a) | set(map_b))
    u = np.array([map_a.get(n, k + 1) for n in union], dtype=float)
    v = np.array([map_b.get(n, k + 1) for n in union], dtype=float)
    du, dv = u - u.mean(), v - v.mean()
    denominator = np.sqrt(np.sum(du ** 2) * np.sum(dv ** 2))
    correlation = float("nan") if denominator == 0 else float(np.sum(du * dv) / denominator)
    return overlap, correlation


def load_importance_csv(path) -> list:
    """External (feature, importance) ranking, sorted by importance descending."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"importance file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise DataError(f"{path}: malformed importance header")
        for row in reader:
            if not row:
                continue
            rows.append((row[0], float(row[1])))
    rows.sort(key=lambda r: -r[1])
    return rows


def clustered_survival_curves(model: RiskModel, X, y_true) -> dict:
    """Mean predicted survival curve per (true label, predicted label) cluster.

    Empty clusters are absent from the result.
    """
    X = np.asarray(X, dtype=np.int64)
    y_true = np.asarray(y_true, dtype=np.int64)
    labels, _ = predict_labels(model, X)
    surv = model.forest.predict_survival_batch(X)
    out = {}
    for t in (0, 1):
        for p in (0, 1):
            mask = (y_true == t) & (labels == p)
            if mask.any():
                out[(t, p)] = StepFunction(model.forest.grid, surv[mask].mean(axis=0), initial=1.0)
    return out
