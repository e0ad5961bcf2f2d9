"""Metrics and target codecs for keypoint-guided leaf polylines and oriented boxes."""

from .geometry import (
    ConvexPolygon,
    DegenerateGeometryError,
    GeometryError,
    OrientedBox,
    Point2,
    Segment,
    distance,
    obb_corners,
    obb_from_corners,
    obb_middle,
    polygon_intersection_area,
    principal_axis,
    project_point_to_segment,
    rotated_iou,
)
from .polylines import (
    DEFAULT_SUBSETS,
    SUBSET_ALL,
    SUBSET_PSEUDO,
    SUBSET_STEM,
    SUBSET_TRUE,
    SUBSET_VEIN,
    SUBSETS,
    GuidedPolyline,
    Keypoint,
    Layout,
    Role,
    SubsetSpec,
    min_projection_distance,
)
from .metrics import OksParams, ScaleMode, default_sigmas, object_scale, oks, poks
from .evaluation import (
    Detection,
    EvalConfig,
    EvalReport,
    GroundTruthObject,
    Interpolation,
    MatchOutcome,
    average_precision,
    evaluate_dataset,
    map_over_thresholds,
    match_detections,
    obb_map50,
)
from .codec import (
    CenterMode,
    CenterSpec,
    EncodedSample,
    LossWeights,
    ObbParamMode,
    ObbTarget,
    PolarTarget,
    decode_keypoints,
    decode_obb,
    decode_offset,
    derive_obb,
    encode_keypoints,
    encode_obb,
    encode_offset,
    encode_sample,
    l1_loss,
    select_center,
    total_loss,
)
from .heatmaps import (
    GaussianSpec,
    Heatmap,
    Peak,
    extract_peaks,
    focal_loss,
    refine_keypoints,
    render_center_heatmap,
    render_p_heatmap,
    render_s_heatmap,
)

__version__ = "0.1.0"
