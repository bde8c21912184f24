"""Geo-entity linking: resolve noisy location strings to a gazetteer.

Pipeline: parse a GeoNames-style dump into a (city, admin1, country)
database, embed location names and labeled user mentions into centroids,
link new inputs by maximum cosine similarity with a selective-prediction
threshold, and evaluate with hierarchical precision/coverage metrics.
"""

from .embedding import (
    CapturingProvider,
    EmbeddingProvider,
    HashingEmbedder,
    ProviderError,
    ServiceClient,
    VectorFileStore,
    cosine_similarity,
    embed_batch,
    normalize,
    provider_from_spec,
)
from .evaluation import (
    DEFAULT_THRESHOLDS,
    MatchResult,
    Metrics,
    compute_metrics,
    evaluation_report,
    match_level,
    mention_bucket_accuracy,
    per_country_f1,
    precision_coverage_curve,
    split_train_test,
)
from .gazetteer import (
    NULL_TRIPLE,
    GazetteerConfig,
    Granularity,
    LocationEntity,
    LocationTriple,
    ParseResult,
    canonical_string,
    filter_entities,
    name_variants,
    parse_gazetteer,
    read_database,
    write_database,
)
from .index import (
    BuildStats,
    IndexEntry,
    NO_PRUNING,
    LabeledMention,
    LocationIndex,
    PruneConfig,
    build_name_index,
    build_user_index,
    prune_outliers,
    read_mentions,
    write_mentions,
)
from .linker import Prediction, link, link_batch, read_predictions, write_predictions
from .reverse_geocode import EARTH_RADIUS_KM, CityLocator, haversine_km

__version__ = "0.1.0"

__all__ = [
    "CapturingProvider",
    "EmbeddingProvider",
    "HashingEmbedder",
    "ProviderError",
    "ServiceClient",
    "VectorFileStore",
    "cosine_similarity",
    "embed_batch",
    "normalize",
    "provider_from_spec",
    "DEFAULT_THRESHOLDS",
    "MatchResult",
    "Metrics",
    "compute_metrics",
    "evaluation_report",
    "match_level",
    "mention_bucket_accuracy",
    "per_country_f1",
    "precision_coverage_curve",
    "split_train_test",
    "NULL_TRIPLE",
    "GazetteerConfig",
    "Granularity",
    "LocationEntity",
    "LocationTriple",
    "ParseResult",
    "canonical_string",
    "filter_entities",
    "name_variants",
    "parse_gazetteer",
    "read_database",
    "write_database",
    "BuildStats",
    "IndexEntry",
    "NO_PRUNING",
    "LabeledMention",
    "LocationIndex",
    "PruneConfig",
    "build_name_index",
    "build_user_index",
    "prune_outliers",
    "read_mentions",
    "write_mentions",
    "Prediction",
    "link",
    "link_batch",
    "read_predictions",
    "write_predictions",
    "EARTH_RADIUS_KM",
    "CityLocator",
    "haversine_km",
]
