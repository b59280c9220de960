"""Causal event graphs and their aggregation, built from relational tables and a causal process template."""
from .aceg import (
    AggregatedCEG,
    aggregate_level1,
    aggregate_level2,
    aggregate_level3,
    edge_quantity,
    in_degree,
    min_max_in,
    min_max_out,
    out_degree,
    structurally_equal,
    type_quantity,
)
from .analysis import (
    ConformanceTable,
    CycleTimeStats,
    DirectlyFollowsGraph,
    TemporalViolation,
    ceg_cycle_stats,
    conformance_score,
    conformance_table,
    end_event_distribution,
    batching_type_distribution,
    event_type_cycle_stats,
    expected_type_edges,
    flatten_to_event_log,
    fragment_cycle_stats,
    mine_dfg,
    temporal_violations,
    violation_counts,
)
from .catalog import (
    Catalog,
    CausallyConnectedTuple,
    ForeignKey,
    RelationInstance,
    RelationSchema,
    left_outer_join,
    load_catalog,
    validate_catalog,
)
from .ceg import (
    CausalEventDatabase,
    CEGView,
    Event,
    ViewSet,
    batching_events,
    build_ceg_db,
    build_fragment,
    case_projection,
    components,
    cycle_time,
    fragments,
    postset,
    preset,
)
from .cpt import CausalProcessTemplate, default_cpt, parse_cpt, validate_cpt
from .errors import CausalPMError, ConfigError, DataError, ValidationError

__version__ = "0.1.0"
