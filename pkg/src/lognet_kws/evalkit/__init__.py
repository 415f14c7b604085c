"""Dataset indexing, metrics, evaluation harness and analysis sweeps."""

from .analysis import (PfiResult, architecture_sweep, feature_reduction_sweep,
                       permutation_importance)
from .dataset import DatasetError, DatasetIndex, build_index, speaker_of
from .evaluate import (EmptySplitError, EvaluationResult, FeatureSet, evaluate_pipeline,
                       extract_features)
from .metrics import EvalReport, compute_metrics, confusion_matrix, multiclass_mcc

__all__ = [
    "PfiResult", "architecture_sweep", "feature_reduction_sweep", "permutation_importance",
    "DatasetError", "DatasetIndex", "build_index", "speaker_of", "EmptySplitError",
    "EvaluationResult", "FeatureSet", "evaluate_pipeline", "extract_features", "EvalReport",
    "compute_metrics", "confusion_matrix", "multiclass_mcc",
]
