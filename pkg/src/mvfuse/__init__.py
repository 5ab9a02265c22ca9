"""Multi-view texture fusion at desk scale.

A numpy/scipy library covering the full loop: software rasterization
with perspective-correct barycentrics, back-projection of per-view
feature planes onto mesh vertices, cross-view aggregation with weighted
power means, variance-aligned re-rasterization, grid-partitioned 3D
self-attention, a toy denoising driver with a pluggable noise predictor,
and conflict-driven inpainting refinement in the pixel domain.
"""

from .attention import (
    GridPartition,
    LiftedFeatureSet,
    grid_size_for_step,
    group_attention,
    jnp_mix,
    joint_noise_prediction,
    lift_foreground,
    partition_grid,
    plane_attention,
    random_orthonormal_projection,
    softmax_rows,
)
from .camera import Camera, make_camera_ring, make_cameras
from .config import RunConfig, load_config
from .diffusion import (
    NoisePredictor,
    NoiseSchedule,
    ToyPredictor,
    build_schedule,
    forward_noise,
    low_frequency_field,
    rng_for,
    subseed,
)
from .errors import ConfigError, InvalidInputError, PipelineError, StatisticsError
from .fusion import (
    AggregatedMesh,
    VarianceStats,
    VertexBank,
    aggregate_views,
    check_convex_variance_inequality,
    estimate_variance_stats,
    estimate_variance_stats_pooled,
    rasterization_variance_bound,
    rasterize_back,
    variance_align,
)
from .mesh import Mesh, compute_vertex_normals, icosphere, normalize_mesh, subdivide
from .meshio import load_obj, load_ply, loads_obj, save_ply
from .pipeline import (
    DenoisingConfig,
    DenoisingResult,
    TrajectoryLog,
    run_collaborative_denoising,
    run_policy_comparison,
)
from .projection import (
    FeatureImage,
    ScoreMaps,
    VertexProjection,
    back_project,
    compute_scores,
    power_weight,
    render_attributes,
    surface_points,
)
from .raster import FragmentBuffer, rasterize
from .refine import (
    ColorRepository,
    ConflictMask,
    HarmonicInpainter,
    RefinementResult,
    SubprocessInpainter,
    build_conflict_mask,
    inpaint_refine,
    pixel_aggregate,
    render_mask_dilated,
    vertex_variance,
)
from .synthetic import decode_to_rgb, render_targets, value_field

__version__ = "0.1.0"
