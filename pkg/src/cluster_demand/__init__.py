"""Two-step clustering of residential electric demand profiles.

The framework reduces the dimensionality of normalized median daily
profiles (PCA or feature agglomeration), clusters the reduced space
(k-means or spectral), and scores any reducer+clusterer combination with a
partition-resampling validation strategy.
"""

from .cluster import (
    ClusterModel,
    GapResult,
    gap_statistic,
    kmeans,
    knn_affinity,
    spectral,
    within_dispersion,
)
from .dimred import (
    FAReducer,
    PCAReducer,
    ReducedMatrix,
    cevr_curve,
    elbow_point,
    fa_fit,
    fa_threshold_curve,
    pca_fit,
    reduce_profiles,
    transform,
)
from .errors import ClusterDemandError, ConfigError, InputError, NumericalError
from .ingest import (
    HouseholdSeries,
    MeterReading,
    build_day_matrices,
    parse_readings,
)
from .numeric import EigenDecomposition, covariance, euclidean, sym_eigen
from .preprocess import ProfileMatrix, median_daily_profile, normalize_rows
from .synth import Archetype, SyntheticDataset, default_archetypes, generate
from .validate import (
    CviScores,
    ValidationReport,
    calinski_harabasz,
    cvi_scores,
    davies_bouldin,
    matches_percentage,
    objective_validate,
    partition_days,
    silhouette,
)

__version__ = "0.1.0"

__all__ = [
    "Archetype",
    "ClusterDemandError",
    "ClusterModel",
    "ConfigError",
    "CviScores",
    "EigenDecomposition",
    "FAReducer",
    "GapResult",
    "HouseholdSeries",
    "InputError",
    "MeterReading",
    "NumericalError",
    "PCAReducer",
    "ProfileMatrix",
    "ReducedMatrix",
    "SyntheticDataset",
    "ValidationReport",
    "build_day_matrices",
    "calinski_harabasz",
    "cevr_curve",
    "covariance",
    "cvi_scores",
    "davies_bouldin",
    "default_archetypes",
    "elbow_point",
    "euclidean",
    "fa_fit",
    "fa_threshold_curve",
    "gap_statistic",
    "generate",
    "kmeans",
    "knn_affinity",
    "matches_percentage",
    "median_daily_profile",
    "normalize_rows",
    "objective_validate",
    "parse_readings",
    "partition_days",
    "pca_fit",
    "reduce_profiles",
    "silhouette",
    "spectral",
    "sym_eigen",
    "transform",
    "within_dispersion",
]
