"""kNN mutual information estimation with a local nonuniformity correction."""

__version__ = "0.1.0"

from .dataset import Dataset, ingest_csv, select_complete, deduplicate_jitter
from .estimators import (
    EstimatorConfig,
    MIEstimate,
    entropy_knn_naive,
    entropy_ksg,
    estimate_mi,
    mi_knn_naive,
    mi_ksg,
    mi_lnc,
)
from .calibration import AlphaTable, estimate_alpha

__all__ = [
    "AlphaTable",
    "Dataset",
    "EstimatorConfig",
    "MIEstimate",
    "deduplicate_jitter",
    "entropy_knn_naive",
    "entropy_ksg",
    "estimate_alpha",
    "estimate_mi",
    "ingest_csv",
    "mi_knn_naive",
    "mi_ksg",
    "mi_lnc",
    "select_complete",
]
