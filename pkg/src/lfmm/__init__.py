"""Link-fraction mixed membership on weighted graphs.

The toolkit keeps one bookkeeping rule everywhere: when nodes are merged,
the merged super-node carries diagonal mass 4 * W_internal + sum of member
diagonals, which makes raw membership rows add up exactly across any
aggregation. Everything else (detection, diversity, nulls, benchmarks)
is built on top of that identity.
"""

from .aggregate import (
    AggregationMap,
    aggregate,
    compose,
    half_edge_counts,
    lift_communities,
    load_aggregation_map,
    read_node_labeling,
)
from .detect import (
    DetectConfig,
    leiden,
    load_partition,
    rb_quality,
    save_partition,
)
from .diversity import (
    DiversityReport,
    GravityConfig,
    GravityFit,
    SpatialAttributes,
    fit_gravity,
    gsi,
    load_spatial,
    null_diversity,
)
from .errors import ConfigError, FormatError, LfmmError, ValidationError
from .graph import (
    CommunityAssignment,
    WeightedGraph,
    load_graph,
    save_graph,
)
from .membership import (
    MAX_DIFFUSION_STEPS,
    MEMBERSHIP_KINDS,
    ConservationReport,
    MembershipMatrix,
    community_indicator,
    conservation_check,
    diffusion_membership,
    membership_by_matrix,
    normalize_aggregate,
    normalize_node,
    raw_membership,
)
from .synth import (
    ConsistencyResult,
    HeatmapResult,
    SbmConfig,
    generate_sbm,
    nmi,
    pearson,
    run_consistency_experiment,
    run_heatmap_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationMap",
    "CommunityAssignment",
    "ConfigError",
    "ConservationReport",
    "ConsistencyResult",
    "DetectConfig",
    "DiversityReport",
    "FormatError",
    "GravityConfig",
    "GravityFit",
    "HeatmapResult",
    "LfmmError",
    "MAX_DIFFUSION_STEPS",
    "MEMBERSHIP_KINDS",
    "MembershipMatrix",
    "SbmConfig",
    "SpatialAttributes",
    "ValidationError",
    "WeightedGraph",
    "aggregate",
    "community_indicator",
    "compose",
    "conservation_check",
    "diffusion_membership",
    "fit_gravity",
    "generate_sbm",
    "gsi",
    "half_edge_counts",
    "leiden",
    "lift_communities",
    "load_aggregation_map",
    "load_graph",
    "load_partition",
    "load_spatial",
    "membership_by_matrix",
    "nmi",
    "normalize_aggregate",
    "normalize_node",
    "null_diversity",
    "pearson",
    "raw_membership",
    "rb_quality",
    "read_node_labeling",
    "run_consistency_experiment",
    "run_heatmap_experiment",
    "save_graph",
    "save_partition",
    "__version__",
]
