"""Survival forests re-engineered as early chronic-disease risk classifiers.

Pipeline stages: synthetic or real EMR-style records -> retrospective cohort
windowing -> random survival forest -> classification via risk-score
threshold, horizon survival probability, or leaf-label analysis -> metrics
and Shapley explanations.
"""

from .classify import ClassifierConfig, LnAggregation, RiskModel, Technique
from .cohort import Approach, CohortSpec, LabeledSample
from .errors import ConfigError, DataError, SurvriskError
from .estimators import kaplan_meier, logrank_statistic, nelson_aalen
from .features import FeatureKind, FeatureSpec
from .forest import ForestParams, SurvivalForest
from .metrics import MetricsReport, auprc, auroc, c_index, confusion_metrics
from .records import CodePattern, Encounter, PatientRecord
from .stepfun import StepFunction
from .synthgen import SynthSpec, separable_spec

__version__ = "0.1.0"

__all__ = [
    "Approach",
    "ClassifierConfig",
    "CodePattern",
    "CohortSpec",
    "ConfigError",
    "DataError",
    "Encounter",
    "FeatureKind",
    "FeatureSpec",
    "ForestParams",
    "LabeledSample",
    "LnAggregation",
    "MetricsReport",
    "PatientRecord",
    "RiskModel",
    "StepFunction",
    "SurvivalForest",
    "SurvriskError",
    "SynthSpec",
    "Technique",
    "auprc",
    "auroc",
    "c_index",
    "confusion_metrics",
    "kaplan_meier",
    "logrank_statistic",
    "nelson_aalen",
    "separable_spec",
    "__version__",
]
