"""Exact finite-level computations for groups acting on regular rooted trees."""

from .analysis import (
    DEFAULT_TOLERANCE,
    DEFAULT_WINDOW,
    AbelianizationIndex,
    DimensionLevel,
    DimensionSequence,
    GKCheck,
    GKReport,
    OrbitStats,
    PerfectnessRow,
    PerfectnessScan,
    QuotientStore,
    RigidReport,
    abelianization_index,
    clear_quotient_cache,
    derived_quotient,
    dimension_sequence,
    envelope_order,
    level_transitivity,
    local_rigid,
    orbit_counts,
    orbit_stats,
    perfectness_scan,
    quotient,
    restrict_generators,
    rigid_level,
    stabilizer_index,
    verify_GK,
)
from .constructions import (
    Construction,
    GroupSpec,
    build_GK,
    combine_elements,
    diagonal,
    diagonal_spec,
    fixtures,
    rooted_generators,
    wreath_full_generators,
)
from .errors import (
    DegreeMismatch,
    LevelMismatch,
    NotSubgroup,
    NotTransitive,
    ParseError,
    ResourceLimit,
    StateExplosion,
    TreedimError,
    ValidationError,
)
from .permgroup import (
    Permutation,
    StabilizerChain,
    build_chain,
    center,
    commutator,
    compose,
    conjugate,
    derived_subgroup,
    inverse,
    is_normal,
    log_order,
    orbits,
    pointwise_stabilizer,
)
from .tree import Vertex, leaf_block, level_vertices, parse_vertex, vertex_at, vertex_index
from .treeauto import (
    Element,
    Machine,
    SelfSimilarityReport,
    State,
    evaluate,
    merge_machines,
    multiply,
    normalize,
    section,
    self_similarity_check,
    word_text,
)

__all__ = [
    "DEFAULT_TOLERANCE",
    "DEFAULT_WINDOW",
    "AbelianizationIndex",
    "DimensionLevel",
    "DimensionSequence",
    "GKCheck",
    "GKReport",
    "OrbitStats",
    "PerfectnessRow",
    "PerfectnessScan",
    "QuotientStore",
    "RigidReport",
    "abelianization_index",
    "clear_quotient_cache",
    "derived_quotient",
    "dimension_sequence",
    "envelope_order",
    "level_transitivity",
    "local_rigid",
    "orbit_counts",
    "orbit_stats",
    "perfectness_scan",
    "quotient",
    "restrict_generators",
    "rigid_level",
    "stabilizer_index",
    "verify_GK",
    "DegreeMismatch",
    "LevelMismatch",
    "NotSubgroup",
    "NotTransitive",
    "ParseError",
    "ResourceLimit",
    "StateExplosion",
    "TreedimError",
    "ValidationError",
    "Permutation",
    "StabilizerChain",
    "build_chain",
    "center",
    "commutator",
    "compose",
    "conjugate",
    "derived_subgroup",
    "inverse",
    "is_normal",
    "log_order",
    "orbits",
    "pointwise_stabilizer",
    "Vertex",
    "leaf_block",
    "level_vertices",
    "parse_vertex",
    "vertex_at",
    "vertex_index",
    "Element",
    "Machine",
    "SelfSimilarityReport",
    "State",
    "evaluate",
    "merge_machines",
    "multiply",
    "normalize",
    "section",
    "self_similarity_check",
    "word_text",
    "Construction",
    "GroupSpec",
    "build_GK",
    "combine_elements",
    "diagonal",
    "diagonal_spec",
    "fixtures",
    "rooted_generators",
    "wreath_full_generators",
]

__version__ = "0.1.0"
