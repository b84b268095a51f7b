"""VRU trajectory clustering, minimal enclosing cluster shapes, and
road-side-unit message-load simulation."""

from .clustering import Cluster, ClusterParams, ClusterStats, FrameClustering, \
    cluster_size_pdf, coexistence_ratio, dbscan_frame, symmetric_groups, \
    time_sequence_clusters
from .cpm import CpmMessage, CpmSizeModel, PerceivedObject, build_cpms, cpm_size_bytes, \
    validate_size_model
from .errors import ConfigError, DataError, DegenerateInputError, InvalidInputError, \
    NumericalError, SchemaError, VrucpError
from .geometry import Circle, ClusterShape, Ellipse, Footprint, FootprintDims, \
    OrientedRect, Point2D, Polygon, area, contains, convex_hull, fit_shapes, \
    footprint_corners, min_area_rect, min_enclosing_circle, min_enclosing_ellipse
from .metrics import ShapeEvaluation, ShapeSizeModel, cadi, cluster_accuracy, \
    evaluate_shapes, select_adaptive, shape_size_bytes
from .simulator import SimConfig, SimReport, run_simulation, summarize
from .trajectory_io import GroupSpec, ScenarioSpec, TrajectoryTable, VruState, WalkerSpec, \
    load_trajectories, preset_scenario, resample, synth_scenario

__version__ = "0.1.0"

__all__ = [
    "Circle", "Cluster", "ClusterParams", "ClusterShape", "ClusterStats", "ConfigError",
    "CpmMessage", "CpmSizeModel", "DataError", "DegenerateInputError", "Ellipse",
    "Footprint", "FootprintDims", "FrameClustering", "GroupSpec", "InvalidInputError",
    "NumericalError", "OrientedRect", "PerceivedObject", "Point2D", "Polygon",
    "ScenarioSpec", "SchemaError", "ShapeEvaluation", "ShapeSizeModel", "SimConfig",
    "SimReport", "TrajectoryTable", "VrucpError", "VruState", "WalkerSpec", "area",
    "build_cpms", "cadi", "cluster_accuracy", "cluster_size_pdf", "coexistence_ratio",
    "contains", "convex_hull", "cpm_size_bytes", "dbscan_frame", "evaluate_shapes",
    "fit_shapes", "footprint_corners", "load_trajectories", "min_area_rect",
    "min_enclosing_circle", "min_enclosing_ellipse", "preset_scenario", "resample",
    "run_simulation", "select_adaptive", "shape_size_bytes", "summarize",
    "symmetric_groups", "synth_scenario", "time_sequence_clusters", "validate_size_model",
]
