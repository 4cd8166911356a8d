"""Patchmatch-based optical flow estimation.

A numpy library implementing a patchmatch flow engine (propagation, inverse
propagation, local and random search, winner-take-all updates) over
classical census/gradient descriptors, with multi-scale refinement,
baseline local/global correlation volumes, analytic cost accounting, flow
evaluation metrics, and bit-exact flow file I/O. A thin CLI
(:mod:`patchflow.cli`) ties the pieces together.
"""

__version__ = "0.1.0"

from .tensor_core import (
    DimensionError,
    FlowField,
    ParameterError,
    SeedSet,
    average_pool,
    correlate,
    downsample_flow,
    l2_normalize,
    pad_to_multiple,
    shift,
    upsample_flow,
    warp_bilinear,
)
from .correlation import (
    CostReport,
    GlobalCorrPyramid,
    LocalCorrVolume,
    cost_report,
    dump_volume,
    global_correlation,
    load_volume,
    local_correlation,
)
from .engine import (
    CandidateStack,
    EngineConfig,
    OpCounters,
    PmState,
    TraceEntry,
    StackedTargets,
    argmax_update,
    inverse_prop_init,
    inverse_propagate,
    local_search,
    pm_iterate,
    propagate,
    random_init,
    random_search,
)
from .pyramid import (
    FeatureConfig,
    adaptive_levels,
    extract_features,
    run_pyramid,
    warm_start,
)
from .metrics import EvalReport, epe, evaluate, f1_all, sequence_loss, sequence_weights
from .synth import (
    band_limited_texture,
    rotation_pair,
    translation_pair,
    two_layer_pair,
)
from .flowio import (
    FlowFormatError,
    flow_to_color,
    load_image,
    read_flo,
    read_flo_file,
    read_kitti_png,
    write_flo,
    write_flo_file,
    write_kitti_png,
)

__all__ = [name for name in dir() if not name.startswith("_")]
