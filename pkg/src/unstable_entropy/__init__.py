"""Unstable metric entropy of linear toral maps and shifts by Katok-type counting."""

__version__ = "0.1.0"

from .systems import (LinearToralModel, ShiftModel, Word, apply, build_linear_model,
                      build_shift_model, leaf_chart, push_forward)
from .partitions import (CylinderPartition, GridPartition, ItineraryCell, build_grid,
                         build_unstable_scheme, name_ball_bound, name_distance, name_of,
                         refine_on_leaf, unstable_cell)
from .geometry import (LeafPoint, ambient_distance, bowen_distance, estimate_metric_comparison,
                       unstable_ball_trace, unstable_bowen_distance, unstable_distance)
from .measures import (ConditionalMeasure, InvariantMeasureModel, PointMassMeasure,
                       conditional_mass, disintegrate, lebesgue, measure_for, sample_conditional,
                       verify_disintegration)
from .covers import (CoverResult, ball_cover_brute_force, ball_cover_greedy,
                     ball_cover_oracle_interval)
from .estimators import (EntropyEstimate, PartitionCountResult, conditional_entropy_rate,
                         entropy_from_counts, katok_estimate, partition_count, smb_rate)
from .katok import KatokEntropyEstimator

__all__ = [
    "ConditionalMeasure", "CoverResult", "CylinderPartition", "EntropyEstimate", "GridPartition",
    "InvariantMeasureModel", "ItineraryCell", "KatokEntropyEstimator", "LeafPoint",
    "LinearToralModel", "PartitionCountResult", "PointMassMeasure", "ShiftModel", "Word",
    "ambient_distance", "apply", "ball_cover_brute_force", "ball_cover_greedy",
    "ball_cover_oracle_interval", "bowen_distance", "build_grid", "build_linear_model",
    "build_shift_model", "build_unstable_scheme", "conditional_entropy_rate", "conditional_mass",
    "disintegrate", "entropy_from_counts", "estimate_metric_comparison", "katok_estimate",
    "leaf_chart", "lebesgue", "measure_for", "name_ball_bound", "name_distance", "name_of",
    "partition_count", "push_forward", "refine_on_leaf", "sample_conditional", "smb_rate",
    "unstable_ball_trace", "unstable_bowen_distance", "unstable_cell", "unstable_distance",
    "verify_disintegration",
]
