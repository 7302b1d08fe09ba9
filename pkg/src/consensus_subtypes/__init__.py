"""Consensus clustering toolkit for multi-view expression matrices."""

from .algorithms import (
    ClusterAssignment,
    Dendrogram,
    KMeansResult,
    cut_dendrogram,
    gaussian_affinity,
    hierarchical,
    kmeans,
    spectral,
)
from .consensus import (
    CdfCurve,
    ConsensusMatrix,
    EnsembleInstance,
    KSelectionReport,
    consensus_cdf,
    consensus_matrix,
    consensus_partition,
    generate_ensemble,
    select_k,
)
from .errors import ClusteringError, ConfigError, ConvergenceError, DataError, NumericalError, ParseError
from .ingestion import ExpressionMatrix, SelectionReport, ViewSet, load_expression_matrix, merge_views, select_by_variance
from .matrix import EigenPairs, normalized_laplacian, pairwise_distances, symmetric_eigen
from .metrics import SilhouetteReport, adjusted_rand_index, asw, reorder_for_heatmap, silhouette_widths
from .snf import FusedNetwork, snf_affinity, snf_cluster, snf_fuse
from .synthetic import SyntheticSpec, generate

__version__ = "0.1.0"
