"""Topological clustering of weighted graphs via graph-filtration Wasserstein distances."""

from .cluster import (
    ClusterModel,
    clustering_accuracy,
    elbow_select,
    kmeans_baseline,
    wasserstein_cluster,
    within_between_ratio,
)
from .decomposition import (
    BirthDeathDecomposition,
    GraphMean,
    decompose,
    graph_mean,
    graph_sum,
    graph_variance,
    scalar_add,
    scalar_multiply,
)
from .distance import GraphDistance, combined_distance, distance_0d, distance_1d, pairwise_distances
from .errors import ComputationError, TopoclustError, ValidationError
from .graph import WeightedGraph, betti_curve, load_graph_csv, save_graph_csv, threshold
from .pipeline import (
    SyntheticSpec,
    StateSequence,
    TimeSeriesPanel,
    TransitionMatrix,
    correlation_graphs,
    estimate_states,
    generate_synthetic,
    ingest,
    run_pipeline,
    transition_matrix,
)
from .smoothing import bandwidth_from_window, dynamic_correlation, fit_series, heat_kernel, smooth

__version__ = "0.1.0"

__all__ = [
    "BirthDeathDecomposition",
    "ClusterModel",
    "ComputationError",
    "GraphDistance",
    "GraphMean",
    "StateSequence",
    "SyntheticSpec",
    "TimeSeriesPanel",
    "TopoclustError",
    "TransitionMatrix",
    "ValidationError",
    "WeightedGraph",
    "bandwidth_from_window",
    "betti_curve",
    "clustering_accuracy",
    "combined_distance",
    "correlation_graphs",
    "decompose",
    "distance_0d",
    "distance_1d",
    "dynamic_correlation",
    "elbow_select",
    "estimate_states",
    "fit_series",
    "generate_synthetic",
    "graph_mean",
    "graph_sum",
    "graph_variance",
    "heat_kernel",
    "ingest",
    "kmeans_baseline",
    "load_graph_csv",
    "pairwise_distances",
    "run_pipeline",
    "save_graph_csv",
    "scalar_add",
    "scalar_multiply",
    "smooth",
    "threshold",
    "transition_matrix",
    "wasserstein_cluster",
    "within_between_ratio",
]
