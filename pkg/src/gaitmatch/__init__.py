"""Skeleton-sequence matching for open-world person re-identification.

Banded dynamic time warping over normalized keypoint sequences, with a
four-feature lower-bound prefilter and early abandon, an instrumented cost
model, a gallery retrieval and evaluation harness, and a deterministic
synthetic benchmark generator.
"""

from .cost_model import (
    ALL_STRATEGIES,
    CostReport,
    measure_run,
    predicted_cost,
    s_out,
    strategy_label,
)
from .dtw import DtwConfig, DtwOutcome, dtw_distance, dtw_distance_unconstrained, window_contains
from .errors import (
    DataFormatError,
    DegenerateFrame,
    EmptyGallery,
    EmptySequence,
    GaitMatchError,
    MissingGroundTruth,
    UnimputableJoint,
)
from .keypoints import (
    KeypointFrame,
    PoseSequence,
    RawKeypointFrame,
    frame_distance,
    impute_sequence,
    norm_series,
    normalize_frame,
)
from .lower_bound import LbFeatures, lb_features, lb_kim, prefilter, sequence_features
from .retrieval import (
    EvalReport,
    GalleryEntry,
    RankedList,
    build_gallery,
    evaluate,
    match_query,
    scan_gallery,
    split_by_condition,
    sweep_hyperparameters,
)
from .synthetic import (
    ConditionSpec,
    DEFAULT_SIGMA_LADDER,
    IdentityModel,
    build_benchmark,
    default_conditions,
    generate_identity,
    render_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_STRATEGIES",
    "ConditionSpec",
    "CostReport",
    "DEFAULT_SIGMA_LADDER",
    "DataFormatError",
    "DegenerateFrame",
    "DtwConfig",
    "DtwOutcome",
    "EmptyGallery",
    "EmptySequence",
    "EvalReport",
    "GaitMatchError",
    "GalleryEntry",
    "IdentityModel",
    "KeypointFrame",
    "LbFeatures",
    "MissingGroundTruth",
    "PoseSequence",
    "RankedList",
    "RawKeypointFrame",
    "UnimputableJoint",
    "build_benchmark",
    "build_gallery",
    "default_conditions",
    "dtw_distance",
    "dtw_distance_unconstrained",
    "evaluate",
    "frame_distance",
    "generate_identity",
    "impute_sequence",
    "lb_features",
    "lb_kim",
    "match_query",
    "measure_run",
    "norm_series",
    "normalize_frame",
    "predicted_cost",
    "prefilter",
    "render_sequence",
    "s_out",
    "scan_gallery",
    "sequence_features",
    "split_by_condition",
    "strategy_label",
    "sweep_hyperparameters",
    "window_contains",
    "__version__",
]
