"""Graph analysis of ConvAC tensor networks: cuts, bounds and closed forms."""

from .cuts import (
    CLOSED_FORM,
    EXHAUSTIVE,
    FLOW,
    INTERLEAVED,
    LEFT_RIGHT,
    SHALLOW_FORM,
    CutReport,
    bounding_layers,
    ceil_log2,
    closed_form,
    closed_form_report,
    exhaustive_min_cut,
    min_cut,
    modified_min_cut,
    power_floor,
    rounded_graph,
    power_rounding_bounds,
    rank_lower_bound,
)
from .graph import (
    AnalysisGraph,
    GEdge,
    InputPartition,
    check_separating,
    checkerboard_partition,
    class_edge_of,
    cut_weight,
    interleaved_partition,
    left_right_partition,
    modified_cut_weight,
    morton_coordinates,
    reachable,
    segment_partition,
    to_analysis_graph,
)
