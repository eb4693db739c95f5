"""Anomaly screening for public-procurement contract records.

Stages: :mod:`~procuraudit.ingest` (parse and deduplicate),
:mod:`~procuraudit.features` and :mod:`~procuraudit.text` (numeric flags,
log amounts, bag of words), :mod:`~procuraudit.iforest` and
:mod:`~procuraudit.regress` (two detectors), :mod:`~procuraudit.explain`
(surrogate tree), plus :mod:`~procuraudit.synth` for test data.
"""

from .errors import ProcurauditError
from .explain import DecisionTree, feature_importance, fit_tree
from .features import FeatureMatrix, assemble_matrix
from .iforest import ForestParams, IsolationForest, build_forest, rank_anomalies, score
from .ingest import RawContract, SchemaConfig, deduplicate, parse_csv
from .regress import LinearModel, fit_ols, residual_scores, robust_fit
from .text import Vocabulary, build_vocabulary, tokenize, vectorize

__version__ = "0.1.0"

__all__ = [
    "DecisionTree",
    "FeatureMatrix",
    "ForestParams",
    "IsolationForest",
    "LinearModel",
    "ProcurauditError",
    "RawContract",
    "SchemaConfig",
    "Vocabulary",
    "assemble_matrix",
    "build_forest",
    "build_vocabulary",
    "deduplicate",
    "feature_importance",
    "fit_ols",
    "fit_tree",
    "parse_csv",
    "rank_anomalies",
    "residual_scores",
    "robust_fit",
    "score",
    "tokenize",
    "vectorize",
]
