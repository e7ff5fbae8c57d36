"""Uncertainty-aware 3D multi-object tracking."""
from .assignment import Matching, build_cost, gate_matching, solve_assignment
from .detection import DetectionU, LabeledBox
from .geometry import Box7, center_distance, iou_3d, iou_bev
from .grouping import BoxGroup, GroupingConfig, assign_groups, fuse_samples, group_score, summarize_group
from .kalman import KalmanState, NoiseConfig, init_track_state, predict, transform_uncertainty, update
from .metrics import EvalConfig, MetricsReport, aggregate, evaluate, sweep_report
from .sim import Scenario, ScenarioConfig, emit_samples, generate
from .tracker import Tracker, TrackerConfig, run_sequence
from .uncertainty import AnchorBox, OffsetPrediction, decode_box, propagate_variance, v_exp, variance_to_covariance

__version__ = "0.1.0"

__all__ = [
    "Matching",
    "build_cost",
    "gate_matching",
    "solve_assignment",
    "DetectionU",
    "LabeledBox",
    "Box7",
    "center_distance",
    "iou_3d",
    "iou_bev",
    "BoxGroup",
    "GroupingConfig",
    "assign_groups",
    "fuse_samples",
    "group_score",
    "summarize_group",
    "KalmanState",
    "NoiseConfig",
    "init_track_state",
    "predict",
    "transform_uncertainty",
    "update",
    "EvalConfig",
    "MetricsReport",
    "aggregate",
    "evaluate",
    "sweep_report",
    "Scenario",
    "ScenarioConfig",
    "emit_samples",
    "generate",
    "Tracker",
    "TrackerConfig",
    "run_sequence",
    "AnchorBox",
    "OffsetPrediction",
    "decode_box",
    "propagate_variance",
    "v_exp",
    "variance_to_covariance",
]
