"""Perch location on segmented tree masks.

Skeletonise a binary tree mask, turn it into a weighted branch graph,
prune spurs, profile sliding windows along the surviving branches and pick
the most graspable spot for a perching drone.
"""

from __future__ import annotations

from .branches import (
    Branch,
    DegenerateTreeError,
    UnsectionedBranchError,
    attach_widths,
    extract_branches,
    order_branch_pixels,
    section_branches,
)
from .graph import (
    DroneSpec,
    Edge,
    Node,
    TreeGraph,
    TreeStats,
    branch_weight,
    build_graph,
    merge_degree2_nodes,
    prune_graph,
    weigh_graph,
)
from .mask_io import (
    BinaryMask,
    MaskError,
    PixelCalibration,
    compute_calibration,
    keep_largest_component,
    load_mask,
    mask_from_array,
    save_mask,
)
from .mechanics import LoadCase, bending_stress, stress_check
from .morphology import (
    PixelClass,
    PixelKind,
    Skeleton,
    classify_pixels,
    intersection_pixels,
    medial_axis_transform,
)
from .oracle import SyntheticTree, TruthBranch, evaluate_corpus, generate_tree
from .pipeline import (
    PipelineConfig,
    PipelineError,
    PipelineRun,
    StageTimings,
    build_report,
    profile,
    render_overlay,
    run_pipeline,
)
from .ranking import PerchCandidate, PerchResult, Status, penalty, rank_candidates, select_perch
from .windows import (
    ViabilityThresholds,
    WindowProfile,
    curvature_series,
    profile_branches,
    slide_windows,
    viability_filter,
    window_angle,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask", "Branch", "DegenerateTreeError", "DroneSpec", "Edge", "LoadCase",
    "MaskError", "Node", "PerchCandidate", "PerchResult", "PipelineConfig", "PipelineError",
    "PipelineRun", "PixelCalibration", "PixelClass", "PixelKind", "Skeleton", "StageTimings",
    "Status", "SyntheticTree", "TreeGraph", "TreeStats", "TruthBranch",
    "UnsectionedBranchError", "ViabilityThresholds", "WindowProfile", "attach_widths",
    "bending_stress", "branch_weight", "build_graph", "build_report", "classify_pixels",
    "compute_calibration", "curvature_series", "evaluate_corpus", "extract_branches",
    "generate_tree", "intersection_pixels", "keep_largest_component", "load_mask",
    "mask_from_array", "medial_axis_transform", "merge_degree2_nodes", "order_branch_pixels",
    "penalty", "profile", "profile_branches", "prune_graph", "rank_candidates",
    "render_overlay", "run_pipeline", "save_mask", "section_branches", "select_perch",
    "slide_windows", "stress_check", "viability_filter", "weigh_graph", "window_angle",
]
