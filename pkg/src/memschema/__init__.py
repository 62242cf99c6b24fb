"""Toolkit for visual memory schema experiments: session logs, schema
maps, memorability statistics, SVR prediction and map reconstruction."""

from .errors import (
    DegenerateMapError,
    EmptyVmsError,
    FeatureError,
    ManifestError,
    MemschemaError,
    ScheduleError,
    SessionLogError,
    SolverError,
    StatsError,
    TensorFormatError,
    TrainingError,
)
from .features import PooledFeature, SpatialDescriptor, hog_descriptor, load_descriptor, pixel_histogram, pool_weighted
from .kernels import HistIntersectKernel, ProductKernel, RbfKernel, kernel_cross, kernel_matrix
from .manifest import CategoryTree, DatasetManifest, ImageRecord, load_manifest, save_manifest
from .maps import MapGrid, SelectionIndex, VmsKind, build_vms, rasterize_selections, resize_map
from .protocol import ProtocolReport, resolve_weight_maps, run_memorability_protocol
from .recon import (
    HeadParams,
    TrainConfig,
    VmsHeadReconstructor,
    augment_plan,
    eval_recon,
    head_forward,
    loss_and_grad,
    train_head,
)
from .schedule import Schedule, ScheduleConfig, generate_schedule
from .session import RectSelection, SessionLog, TestTrial, parse_session_log, serialize_session_log
from .stats import (
    bootstrap_diff_test,
    category_stats,
    compare_map_sets,
    detection_summary,
    mutual_information,
    pearson2d,
    rates,
    select_threshold,
    spearman,
    split_half_consistency,
)
from .svr import SupportVectorRegressor, SvrModel, svr_predict, svr_train
from .tensorfile import TensorFile, read_tensor, write_tensor

__version__ = "0.1.0"
