"""Object-level keypoint similarity over subsets, plain (OKS) and projection-based (POKS).

Per keypoint the similarity is exp(-d^2 / (2 s^2 sigma^2)) where d is the pixel
error, s the object scale and sigma the per-keypoint annotation-noise constant;
the object score is the mean over the visible keypoints of the requested subset.
POKS replaces d for pseudo keypoints by the distance to the closest clamped
projection onto the two neighbor segments of the target chain, so sliding a
prediction along the annotated line costs nothing.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .geometry import OrientedBox, Point2, PointLike, as_point, distance
from .polylines import (
    FULL8_ROLES,
    SUBSET_ALL,
    GuidedPolyline,
    Layout,
    Role,
    SubsetSpec,
    VEIN5_OFFSET,
    min_projection_distance,
)

DEFAULT_SIGMA_TRUE = 0.05
DEFAULT_SIGMA_PSEUDO = 0.10


class ScaleMode(enum.Enum):
    OBB_AREA = "obb_area"
    POLYLINE_BBOX_AREA = "polyline_bbox_area"


def default_sigmas(sigma_true: float = DEFAULT_SIGMA_TRUE, sigma_pseudo: float = DEFAULT_SIGMA_PSEUDO) -> tuple[float, ...]:
    """Per-slot sigmas for the 8-slot layout: tight on true keypoints, looser on guides."""
    return tuple(sigma_true if r is Role.TRUE else sigma_pseudo for r in FULL8_ROLES)


@dataclass(frozen=True)
class OksParams:
    """Similarity constants: per-slot sigmas plus how the object scale s is derived.

    scale_floor is an area floor in squared pixels; s = sqrt(max(area, scale_floor)),
    so the default of 16 keeps s >= 4 px on tiny objects.
    """

    sigmas: tuple[float, ...] = default_sigmas()
    scale_mode: ScaleMode = ScaleMode.OBB_AREA
    scale_floor: float = 16.0

    def __post_init__(self):
        if not self.sigmas or any(s <= 0 or not math.isfinite(s) for s in self.sigmas):
            raise ValueError("sigmas must be positive finite reals")
        if self.scale_floor <= 0:
            raise ValueError("scale_floor must be > 0")

    def sigma_for(self, slot: int, role: Role) -> float:
        if slot < len(self.sigmas):
            return self.sigmas[slot]
        return DEFAULT_SIGMA_TRUE if role is Role.TRUE else DEFAULT_SIGMA_PSEUDO


def object_scale(polyline: GuidedPolyline, obb: Optional[OrientedBox], params: OksParams) -> float:
    """Object scale s in pixels, from the box area or the keypoint bounding box."""
    area = None
    if params.scale_mode is ScaleMode.OBB_AREA and obb is not None:
        area = obb.area
    if area is None:
        pts = polyline.visible_points()
        xs = [p.x for p in pts]
        ys = [p.y for p in pts]
        area = (max(xs) - min(xs)) * (max(ys) - min(ys))
    return math.sqrt(max(area, params.scale_floor))


def _pred_by_slot(pred: Sequence[Optional[PointLike]], gt: GuidedPolyline) -> list[Optional[Point2]]:
    """Align a prediction list to the target's slot indexing.

    Accepts one entry per slot (8 for canonical layouts) or, for a vein-only target,
    one entry per chain keypoint (5, mapped onto slots 3..7). Entries may be None
    for keypoints the predictor did not produce.
    """
    entries = [None if p is None else as_point(p) for p in pred]
    n_slots = gt.slot_count
    if len(entries) == n_slots:
        return entries
    if gt.layout is Layout.VEIN5 and len(entries) == len(gt.keypoints):
        return [None] * VEIN5_OFFSET + entries
    raise ValueError(f"expected {n_slots} predicted keypoints, got {len(entries)}")


def _pointwise_distance(pred_pt: Point2, gt: GuidedPolyline, chain_idx: int, projected: bool) -> float:
    kp = gt.keypoints[chain_idx]
    if projected and kp.role is Role.PSEUDO:
        n = len(gt.keypoints)
        if any(0 <= j < n and gt.keypoints[j].visible for j in (chain_idx - 1, chain_idx + 1)):
            return min_projection_distance(pred_pt, gt, chain_idx)
        # Isolated pseudo keypoint: no neighbor segment exists, score it like a true one.
    return distance(pred_pt, kp.point)


def _similarity(
    pred: Sequence[Optional[PointLike]],
    gt: GuidedPolyline,
    subset: SubsetSpec,
    params: OksParams,
    scale: float,
    projected: bool,
) -> Optional[float]:
    if not (math.isfinite(scale) and scale > 0):
        raise ValueError(f"scale must be a positive real, got {scale}")
    for required in subset.required_slots:
        if required >= gt.slot_count or gt.chain_index(required) is None:
            return None
    slots = _pred_by_slot(pred, gt)
    scores: list[float] = []
    for slot in sorted(subset.indices):
        if slot >= gt.slot_count:
            continue
        idx = gt.chain_index(slot)
        if idx is None:
            continue
        kp = gt.keypoints[idx]
        if not kp.visible:
            continue
        pred_pt = slots[slot]
        if pred_pt is None:
            scores.append(0.0)  # annotated keypoint with no prediction: zero credit
            continue
        d = _pointwise_distance(pred_pt, gt, idx, projected)
        sig = params.sigma_for(slot, kp.role)
        scores.append(math.exp(-(d * d) / (2.0 * scale * scale * sig * sig)))
    if not scores:
        return None
    return sum(scores) / len(scores)


def oks(
    pred: Sequence[Optional[PointLike]],
    gt: GuidedPolyline,
    subset: SubsetSpec = SUBSET_ALL,
    params: OksParams = OksParams(),
    scale: float = 1.0,
) -> Optional[float]:
    """Mean keypoint similarity over the subset's visible keypoints (None if none visible)."""
    return _similarity(pred, gt, subset, params, scale, projected=False)


def poks(
    pred: Sequence[Optional[PointLike]],
    gt: GuidedPolyline,
    subset: SubsetSpec = SUBSET_ALL,
    params: OksParams = OksParams(),
    scale: float = 1.0,
) -> Optional[float]:
    """Projected variant of oks: pseudo keypoints are scored against their projection
    onto the target's neighbor segments, true keypoints identically to oks."""
    return _similarity(pred, gt, subset, params, scale, projected=True)
