"""Binary classification on top of a fitted survival forest.

Three techniques:

* ``rs``  threshold the ensemble risk score; the threshold is learned by
  sweeping the distinct training risk scores and keeping the one that
  maximizes the chosen objective (disease iff risk > threshold).
* ``sp``  read the survival probability at a horizon (default one year) and
  call disease when it is at most 0.5 (inclusive).
* ``ln``  read the event-label counts at each tree's reached leaf and
  aggregate as an average probability or a majority vote (disease iff the
  aggregate crosses 0.5).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError
from .forest import SurvivalForest
from .metrics import confusion_metrics

logger = logging.getLogger(__name__)


class Technique(str, Enum):
    RS = "rs"
    SP = "sp"
    LN = "ln"


class LnAggregation(str, Enum):
    AVERAGE_PROBABILITY = "average_probability"
    MAJORITY_VOTE = "majority_vote"


@dataclass
class ClassifierConfig:
    technique: Technique = Technique.SP
    horizon_days: int = 365
    sp_threshold: float = 0.5
    rs_threshold: Optional[float] = None
    rs_objective: str = "f1"  # or "accuracy"
    ln_aggregation: LnAggregation = LnAggregation.AVERAGE_PROBABILITY

    def __post_init__(self):
        self.technique = Technique(self.technique)
        self.ln_aggregation = LnAggregation(self.ln_aggregation)
        if self.horizon_days < 1:
            raise ConfigError("horizon_days must be >= 1")
        if self.rs_objective not in ("f1", "accuracy"):
            raise ConfigError(f"unknown rs_objective {self.rs_objective!r}")
        if not 0.0 < self.sp_threshold < 1.0:
            raise ConfigError("sp_threshold must lie in (0, 1)")


@dataclass
class RiskModel:
    forest: SurvivalForest
    config: ClassifierConfig


def _objective(events, predicted, name: str) -> float:
    report = confusion_metrics(events, predicted)
    value = report.f1 if name == "f1" else report.accuracy
    return -1.0 if value is None else value


def fit_rs_threshold(forest: SurvivalForest, X, events, objective: str = "f1") -> float:
    """Sweep the distinct training risk scores for the best threshold.

    Prediction rule is ``risk > threshold``; ties in the objective break
    toward the smallest threshold.
    """
    events = np.asarray(events, dtype=np.int64)
    if events.size == 0 or len(np.unique(events)) < 2:
        raise DataError("threshold fitting needs both classes in the training set")
    if objective not in ("f1", "accuracy"):
        raise ConfigError(f"unknown rs_objective {objective!r}")
    risks = forest.predict_risk_batch(X)
    best_theta, best_value = None, -np.inf
    for theta in np.unique(risks):
        value = _objective(events, (risks > theta).astype(np.int64), objective)
        if value > best_value:
            best_theta, best_value = float(theta), value
    return best_theta


def _ln_probabilities(model: RiskModel, X) -> np.ndarray:
    frac = model.forest.leaf_fraction_batch(X)
    if model.config.ln_aggregation is LnAggregation.AVERAGE_PROBABILITY:
        return frac.mean(axis=1)
    votes = (frac > 0.5).mean(axis=1)
    n_ties = int(np.sum(votes == 0.5))
    if n_ties:
        logger.info("leaf-vote ties broken toward disease for %d sample(s)", n_ties)
    return votes


def predict_scores(model: RiskModel, X) -> np.ndarray:
    """The configured technique's raw score per sample."""
    technique = model.config.technique
    if technique is Technique.RS:
        return model.forest.predict_risk_batch(X)
    if technique is Technique.SP:
        return model.forest.survival_at_batch(X, model.config.horizon_days)
    return _ln_probabilities(model, X)


def _labels_from_scores(model: RiskModel, scores: np.ndarray) -> np.ndarray:
    cfg = model.config
    if cfg.technique is Technique.RS:
        if cfg.rs_threshold is None:
            raise ConfigError("rs technique requires a fitted rs_threshold")
        return (scores > cfg.rs_threshold).astype(np.int64)
    if cfg.technique is Technique.SP:
        return (scores <= cfg.sp_threshold).astype(np.int64)
    if cfg.ln_aggregation is LnAggregation.MAJORITY_VOTE:
        return (scores >= 0.5).astype(np.int64)  # exact tie goes to disease
    return (scores > 0.5).astype(np.int64)


def predict_labels(model: RiskModel, X):
    """(labels, scores) under the configured technique."""
    scores = predict_scores(model, X)
    return _labels_from_scores(model, scores), scores


def classify_rs(model: RiskModel, x):
    if model.config.technique is not Technique.RS:
        raise ConfigError("model is not configured for the rs technique")
    labels, scores = predict_labels(model, np.asarray(x)[None, :])
    return int(labels[0]), float(scores[0])


def classify_sp(model: RiskModel, x):
    if model.config.technique is not Technique.SP:
        raise ConfigError("model is not configured for the sp technique")
    labels, scores = predict_labels(model, np.asarray(x)[None, :])
    return int(labels[0]), float(scores[0])


def classify_ln(model: RiskModel, x):
    if model.config.technique is not Technique.LN:
        raise ConfigError("model is not configured for the ln technique")
    labels, scores = predict_labels(model, np.asarray(x)[None, :])
    return int(labels[0]), float(scores[0])


def disease_score(model: RiskModel, X) -> np.ndarray:
    """Score oriented so that higher means more diseased (for AUROC/AUPRC)."""
    scores = predict_scores(model, X)
    if model.config.technique is Technique.SP:
        return 1.0 - scores
    return scores


@dataclass
class BatchPredictions:
    labels: np.ndarray
    scores: np.ndarray
    survival_at_horizon: np.ndarray
    technique: Technique = field(default=Technique.SP)


def predict_batch(model: RiskModel, X, technique=None) -> BatchPredictions:
    """Vectorized prediction for a dataset, in input order.

    ``technique`` optionally overrides the configured one; passing more than
    one technique per batch is a configuration error.
    """
    if technique is not None:
        if not isinstance(technique, (str, Technique)):
            raise ConfigError("one technique per batch; got a collection")
        model = RiskModel(forest=model.forest, config=with_technique(model.config, technique))
    X = np.asarray(X, dtype=np.int64)
    if X.ndim != 2:
        raise ConfigError("predict_batch expects a 2-d feature matrix")
    if X.shape[0] == 0:
        empty = np.empty(0)
        return BatchPredictions(empty.astype(np.int64), empty, empty, model.config.technique)
    labels, scores = predict_labels(model, X)
    surv = model.forest.survival_at_batch(X, model.config.horizon_days)
    return BatchPredictions(labels, scores, surv, model.config.technique)


def with_technique(config: ClassifierConfig, technique) -> ClassifierConfig:
    return ClassifierConfig(
        technique=Technique(technique),
        horizon_days=config.horizon_days,
        sp_threshold=config.sp_threshold,
        rs_threshold=config.rs_threshold,
        rs_objective=config.rs_objective,
        ln_aggregation=config.ln_aggregation,
    )
