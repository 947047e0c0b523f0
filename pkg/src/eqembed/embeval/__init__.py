"""Evaluation of expression embeddings."""

from .index import (
    DimensionMismatch,
    EmbeddingIndex,
    Entry,
    IndexFormatError,
    ZeroVector,
    knn,
    read_index,
    write_index,
)
from .metrics import (
    AnalogyQuery,
    AnalogyResult,
    DistanceAnalysis,
    DistanceTally,
    EmptyEvaluation,
    ScoreSummary,
    UnlabeledQuery,
    class_members,
    distance_report,
    embedding_algebra,
    mean_score_k,
    score_k,
)
from .pca import UNLABELED, DegenerateCovariance, emit_scatter, pca_2d, pca_project, principal_axes

__all__ = [
    "DimensionMismatch", "EmbeddingIndex", "Entry", "IndexFormatError", "ZeroVector",
    "knn", "read_index", "write_index",
    "AnalogyQuery", "AnalogyResult", "DistanceAnalysis", "DistanceTally", "EmptyEvaluation",
    "ScoreSummary", "UnlabeledQuery", "class_members", "distance_report", "embedding_algebra",
    "mean_score_k", "score_k",
    "UNLABELED", "DegenerateCovariance", "emit_scatter", "pca_2d", "pca_project", "principal_axes",
]
