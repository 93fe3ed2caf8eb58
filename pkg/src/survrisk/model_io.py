"""Versioned JSON model files.

Header carries the format version, hyperparameters, seed, feature arities
and (for survival forests) the event-time grid; trees follow as flattened
node arrays.  Numbers round-trip exactly (shortest-repr floats).  The
classification baseline shares the format under a distinct type tag.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .baseline import BaselineParams, ClassificationForest, ClassificationTree
from .classify import ClassifierConfig, LnAggregation, RiskModel, Technique
from .errors import ModelFileError
from .forest import ForestParams, SurvivalForest, SurvivalTree
from .trees import FlatTree

FORMAT = "survrisk-model"
VERSION = 1


def _flat_tree_dict(tree: FlatTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "left_cats": [list(c) if c is not None else None for c in tree.left_cats],
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "leaf_slot": tree.leaf_slot.tolist(),
    }


def _flat_tree_from(data: dict) -> FlatTree:
    return FlatTree(
        feature=np.asarray(data["feature"], dtype=np.int64),
        left_cats=[tuple(c) if c is not None else None for c in data["left_cats"]],
        left=np.asarray(data["left"], dtype=np.int64),
        right=np.asarray(data["right"], dtype=np.int64),
        leaf_slot=np.asarray(data["leaf_slot"], dtype=np.int64),
    )


def _survival_tree_dict(t: SurvivalTree) -> dict:
    out = _flat_tree_dict(t.tree)
    out["leaves"] = {
        "event_pos": [p.tolist() for p in t.leaf_event_pos],
        "chf": [v.tolist() for v in t.leaf_chf],
        "surv": [v.tolist() for v in t.leaf_surv],
        "n0": t.n0.tolist(),
        "n1": t.n1.tolist(),
    }
    return out


def _survival_tree_from(data: dict, grid_size: int) -> SurvivalTree:
    leaves = data["leaves"]
    pos = [np.asarray(p, dtype=np.int64) for p in leaves["event_pos"]]
    chf = [np.asarray(v, dtype=float) for v in leaves["chf"]]
    surv = [np.asarray(v, dtype=float) for v in leaves["surv"]]
    chf_sum = np.array([
        float(np.sum(c * np.diff(np.concatenate([p, [grid_size]])))) if p.size else 0.0
        for p, c in zip(pos, chf)
    ])
    return SurvivalTree(
        tree=_flat_tree_from(data),
        leaf_event_pos=pos,
        leaf_chf=chf,
        leaf_surv=surv,
        n0=np.asarray(leaves["n0"], dtype=np.int64),
        n1=np.asarray(leaves["n1"], dtype=np.int64),
        chf_grid_sum=chf_sum,
    )


def _classifier_dict(config: ClassifierConfig) -> dict:
    return {
        "technique": config.technique.value,
        "horizon_days": config.horizon_days,
        "sp_threshold": config.sp_threshold,
        "rs_threshold": config.rs_threshold,
        "rs_objective": config.rs_objective,
        "ln_aggregation": config.ln_aggregation.value,
    }


def _classifier_from(data: dict) -> ClassifierConfig:
    return ClassifierConfig(
        technique=Technique(data["technique"]),
        horizon_days=data["horizon_days"],
        sp_threshold=data["sp_threshold"],
        rs_threshold=data["rs_threshold"],
        rs_objective=data["rs_objective"],
        ln_aggregation=LnAggregation(data["ln_aggregation"]),
    )


def save_model(path, forest, classifier: Optional[ClassifierConfig] = None) -> None:
    """Write a survival or classification forest (+ optional classifier config)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(forest, SurvivalForest):
        payload = {
            "format": FORMAT,
            "version": VERSION,
            "model_type": "survival_forest",
            "params": {
                "n_trees": forest.params.n_trees,
                "mtry": forest.params.mtry,
                "min_split": forest.params.min_split,
                "min_leaf": forest.params.min_leaf,
                "seed": forest.params.seed,
                "n_jobs": forest.params.n_jobs,
            },
            "arities": list(forest.arities),
            "event_time_grid": forest.grid.tolist(),
            "classifier": _classifier_dict(classifier) if classifier else None,
            "trees": [_survival_tree_dict(t) for t in forest.trees],
        }
    elif isinstance(forest, ClassificationForest):
        payload = {
            "format": FORMAT,
            "version": VERSION,
            "model_type": "classification_forest",
            "params": {
                "n_trees": forest.params.n_trees,
                "mtry": forest.params.mtry,
                "min_split": forest.params.min_split,
                "min_leaf": forest.params.min_leaf,
                "seed": forest.params.seed,
            },
            "arities": list(forest.arities),
            "classifier": None,
            "trees": [
                {**_flat_tree_dict(t.tree), "leaves": {"n0": t.n0.tolist(), "n1": t.n1.tolist()}}
                for t in forest.trees
            ],
        }
    else:
        raise ModelFileError(f"cannot serialize {type(forest).__name__}")
    with open(path, "w") as fh:
        json.dump(payload, fh, separators=(",", ":"))


def load_model(path):
    """Load a model file; returns (forest, classifier config or None)."""
    path = Path(path)
    if not path.is_file():
        raise ModelFileError(f"model file not found: {path} (run `train` first)")
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"corrupt model file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != FORMAT:
        raise ModelFileError(f"{path} is not a {FORMAT} file")
    if payload.get("version") != VERSION:
        raise ModelFileError(
            f"{path}: unsupported model version {payload.get('version')!r} (expected {VERSION})"
        )
    try:
        classifier = _classifier_from(payload["classifier"]) if payload["classifier"] else None
        if payload["model_type"] == "survival_forest":
            params = ForestParams(**payload["params"])
            grid = np.asarray(payload["event_time_grid"], dtype=float)
            trees = [_survival_tree_from(t, grid.size) for t in payload["trees"]]
            forest = SurvivalForest(params=params, arities=tuple(payload["arities"]),
                                    grid=grid, trees=trees)
        elif payload["model_type"] == "classification_forest":
            params = BaselineParams(**payload["params"])
            trees = [
                ClassificationTree(
                    tree=_flat_tree_from(t),
                    n0=np.asarray(t["leaves"]["n0"], dtype=np.int64),
                    n1=np.asarray(t["leaves"]["n1"], dtype=np.int64),
                )
                for t in payload["trees"]
            ]
            forest = ClassificationForest(params=params, arities=tuple(payload["arities"]), trees=trees)
        else:
            raise ModelFileError(f"{path}: unknown model_type {payload['model_type']!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"corrupt model file {path}: {exc}") from exc
    return forest, classifier


def load_risk_model(path) -> RiskModel:
    forest, classifier = load_model(path)
    if not isinstance(forest, SurvivalForest):
        raise ModelFileError(f"{path}: expected a survival forest model")
    if classifier is None:
        raise ModelFileError(f"{path}: model file carries no classifier configuration")
    return RiskModel(forest=forest, config=classifier)
