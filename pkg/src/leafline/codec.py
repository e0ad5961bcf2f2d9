"""Training-target codecs: polar keypoints, sub-pixel offsets, oriented-box targets.

All dense targets live on an output grid downscaled by an integer ratio r.
Keypoints are stored per anchor point as (distance, cos, sin); boxes as the four
anchor-relative extents (or their symmetric 3-parameter collapse) plus the
orientation as a (cos, sin) pair, which keeps the angle target continuous.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .geometry import (
    DegenerateGeometryError,
    GeometryError,
    OrientedBox,
    Point2,
    PointLike,
    as_point,
    obb_middle,
    principal_axis,
)
from .polylines import (
    APEX_SLOT,
    BASAL_SLOT,
    STEM_SLOT,
    GuidedPolyline,
    Layout,
)


class CenterMode(enum.Enum):
    OBB_CENTER = "obb"
    K_STEM = "stem"
    K_BASAL = "basal"
    K_APEX = "apex"


@dataclass(frozen=True)
class CenterSpec:
    mode: CenterMode = CenterMode.K_BASAL


def _unit_pair(cos_a: float, sin_a: float) -> tuple[float, float]:
    norm = math.hypot(cos_a, sin_a)
    if not 0.5 <= norm <= 2.0:
        raise ValueError(f"angle vector norm {norm} outside [0.5, 2]")
    return cos_a / norm, sin_a / norm


@dataclass(frozen=True)
class PolarTarget:
    """Keypoint target relative to the anchor: distance in grid pixels, unit angle pair.

    The angle pair is renormalized on construction (regression outputs are never
    exactly unit length); norms outside [0.5, 2] are rejected as corrupt.
    """

    d: float
    cos_a: float
    sin_a: float

    def __post_init__(self):
        if not (math.isfinite(self.d) and self.d >= 0.0):
            raise ValueError(f"distance must be >= 0, got {self.d}")
        c, s = _unit_pair(self.cos_a, self.sin_a)
        object.__setattr__(self, "cos_a", c)
        object.__setattr__(self, "sin_a", s)


class ObbParamMode(enum.Enum):
    THREE = 3
    FIVE = 5


@dataclass(frozen=True)
class ObbTarget:
    """Box regression target in grid pixels; THREE mode keeps only symmetric splits."""

    w_tl: float
    w_br: float
    h_tl: float
    h_br: float
    cos_b: float
    sin_b: float
    param_mode: ObbParamMode = ObbParamMode.FIVE

    def __post_init__(self):
        if min(self.w_tl, self.w_br, self.h_tl, self.h_br) < 0.0:
            raise ValueError("box extents must be >= 0")
        if self.param_mode is ObbParamMode.THREE and (self.w_tl != self.w_br or self.h_tl != self.h_br):
            raise ValueError("3-parameter targets store symmetric splits only")
        c, s = _unit_pair(self.cos_b, self.sin_b)
        object.__setattr__(self, "cos_b", c)
        object.__setattr__(self, "sin_b", s)

    @property
    def width(self) -> float:
        return self.w_tl + self.w_br

    @property
    def height(self) -> float:
        return self.h_tl + self.h_br


@dataclass(frozen=True)
class EncodedSample:
    """One object's dense-regression targets at downscale ratio r."""

    downscale_r: int
    center_cell: tuple[int, int]
    offset: tuple[float, float]
    polar_targets: tuple[Optional[PolarTarget], ...]
    obb_target: ObbTarget


@dataclass(frozen=True)
class LossWeights:
    w_cp: float = 1.0
    w_off: float = 1.0
    w_kp: float = 20.0
    w_kphm: float = 1.0
    w_obb: float = 20.0

    def __post_init__(self):
        if min(self.w_cp, self.w_off, self.w_kp, self.w_kphm, self.w_obb) < 0.0:
            raise ValueError("loss weights must be >= 0")


def select_center(polyline: GuidedPolyline, obb: Optional[OrientedBox], spec: CenterSpec) -> Point2:
    """Anchor point used for all polar and box targets of one object."""
    mode = spec.mode
    if mode is CenterMode.OBB_CENTER:
        if obb is None:
            raise ValueError("no box available for the obb center mode")
        return obb_middle(obb)
    slot = {CenterMode.K_STEM: STEM_SLOT, CenterMode.K_BASAL: BASAL_SLOT, CenterMode.K_APEX: APEX_SLOT}[mode]
    kp = polyline.keypoint_at_slot(slot)
    if kp is None or not kp.visible:
        raise ValueError(f"center keypoint '{mode.value}' is not annotated on this object")
    return kp.point


def encode_keypoints(
    polyline: GuidedPolyline, center: PointLike, r: int
) -> tuple[Optional[PolarTarget], ...]:
    """Polar targets per slot; invisible or absent slots encode to None."""
    if r < 1:
        raise ValueError("downscale ratio must be >= 1")
    center = as_point(center)
    out: list[Optional[PolarTarget]] = []
    for slot in range(polyline.slot_count):
        kp = polyline.keypoint_at_slot(slot)
        if kp is None or not kp.visible:
            out.append(None)
            continue
        dx, dy = kp.point.x - center.x, kp.point.y - center.y
        dist = math.hypot(dx, dy)
        if dist == 0.0:
            out.append(PolarTarget(0.0, 1.0, 0.0))
        else:
            out.append(PolarTarget(dist / r, dx / dist, dy / dist))
    return tuple(out)


def decode_keypoints(
    targets: Sequence[Optional[PolarTarget]], center: PointLike, r: int
) -> tuple[Optional[Point2], ...]:
    """Inverse of encode_keypoints (exact to float rounding)."""
    if r < 1:
        raise ValueError("downscale ratio must be >= 1")
    center = as_point(center)
    out: list[Optional[Point2]] = []
    for t in targets:
        if t is None:
            out.append(None)
        elif t.d == 0.0:
            out.append(center)
        else:
            out.append(Point2(center.x + r * t.d * t.cos_a, center.y + r * t.d * t.sin_a))
    return tuple(out)


def _chord_endpoints(polyline: GuidedPolyline) -> tuple[Point2, Point2]:
    """Basal -> apex chord used to fix the orientation sign; falls back to the
    first/last visible vein keypoint when an end is missing or the chord collapses."""
    basal = polyline.keypoint_at_slot(BASAL_SLOT)
    apex = polyline.keypoint_at_slot(APEX_SLOT)
    if (
        basal is not None and basal.visible
        and apex is not None and apex.visible
        and (basal.point.x != apex.point.x or basal.point.y != apex.point.y)
    ):
        return basal.point, apex.point
    vein = polyline.visible_vein_points()
    if len(vein) >= 2 and (vein[0].x != vein[-1].x or vein[0].y != vein[-1].y):
        return vein[0], vein[-1]
    raise DegenerateGeometryError("cannot orient leaf: basal->apex chord is degenerate")


def derive_obb(
    polyline: GuidedPolyline,
    blade_polygon: Sequence[PointLike] = (),
    center: Optional[PointLike] = None,
) -> OrientedBox:
    """Fit the leaf's oriented box from its vein keypoints and blade outline.

    Orientation comes from the principal axis of the visible vein keypoints
    (sign: basal toward apex); extents are the axis-aligned bounds, in the
    de-rotated frame, of the blade polygon together with every visible chain
    keypoint, split about the anchor point (default: the basal keypoint).
    """
    if polyline.layout is Layout.CUSTOM:
        raise GeometryError("box derivation needs a canonical 8- or 5-slot layout")
    vein = polyline.visible_vein_points()
    if len({(p.x, p.y) for p in vein}) < 2:
        raise DegenerateGeometryError("need >= 2 distinct vein keypoints to orient a box")
    chord_from, chord_to = _chord_endpoints(polyline)
    beta = principal_axis(vein, chord_from, chord_to)

    if center is None:
        basal = polyline.keypoint_at_slot(BASAL_SLOT)
        anchor = basal.point if basal is not None and basal.visible else vein[0]
    else:
        anchor = as_point(center)

    points = [as_point(p) for p in blade_polygon]
    points.extend(polyline.visible_points())
    rad = math.radians(beta)
    c, s = math.cos(rad), math.sin(rad)
    xs, ys = [], []
    for p in points:
        dx, dy = p.x - anchor.x, p.y - anchor.y
        xs.append(c * dx + s * dy)  # rotate by -beta
        ys.append(-s * dx + c * dy)
    w_tl = max(0.0, -min(xs))
    w_br = max(0.0, max(xs))
    h_tl = max(0.0, -min(ys))
    h_br = max(0.0, max(ys))
    return OrientedBox(anchor, w_tl, w_br, h_tl, h_br, beta)


def encode_obb(box: OrientedBox, mode: ObbParamMode = ObbParamMode.FIVE, r: int = 1) -> ObbTarget:
    """Box regression target: extents divided by r, orientation as a (cos, sin) pair."""
    if r < 1:
        raise ValueError("downscale ratio must be >= 1")
    rad = math.radians(box.beta)
    cos_b, sin_b = math.cos(rad), math.sin(rad)
    if mode is ObbParamMode.THREE:
        half_w = box.width / (2.0 * r)
        half_h = box.height / (2.0 * r)
        return ObbTarget(half_w, half_w, half_h, half_h, cos_b, sin_b, mode)
    return ObbTarget(box.w_tl / r, box.w_br / r, box.h_tl / r, box.h_br / r, cos_b, sin_b, mode)


def decode_obb(target: ObbTarget, center: PointLike, r: int = 1) -> OrientedBox:
    """Inverse of encode_obb; 3-parameter targets decode with center-symmetric splits."""
    if r < 1:
        raise ValueError("downscale ratio must be >= 1")
    beta = math.degrees(math.atan2(target.sin_b, target.cos_b)) % 360.0
    return OrientedBox(
        as_point(center),
        target.w_tl * r,
        target.w_br * r,
        target.h_tl * r,
        target.h_br * r,
        beta,
    )


def encode_sample(
    polyline: GuidedPolyline,
    blade_polygon: Sequence[PointLike] = (),
    spec: CenterSpec = CenterSpec(),
    r: int = 4,
    obb_mode: ObbParamMode = ObbParamMode.FIVE,
) -> EncodedSample:
    """All dense targets for one object: anchor cell + offset, polar keypoints, box.

    The box is re-derived about the chosen anchor so its splits match the targets.
    """
    default_box = derive_obb(polyline, blade_polygon)
    center = select_center(polyline, default_box, spec)
    cell, offset = encode_offset(center, r)
    polar = encode_keypoints(polyline, center, r)
    box = derive_obb(polyline, blade_polygon, center)
    return EncodedSample(r, cell, offset, polar, encode_obb(box, obb_mode, r))


def encode_offset(p: PointLike, r: int) -> tuple[tuple[int, int], tuple[float, float]]:
    """Integer output cell plus the sub-pixel remainder of p on the downscaled grid."""
    if r < 1:
        raise ValueError("downscale ratio must be >= 1")
    p = as_point(p)
    if p.x < 0.0 or p.y < 0.0:
        raise ValueError(f"negative coordinates not encodable: ({p.x}, {p.y})")
    gx, gy = p.x / r, p.y / r
    cell = (math.floor(gx), math.floor(gy))
    return cell, (gx - cell[0], gy - cell[1])


def decode_offset(cell: tuple[int, int], offset: tuple[float, float], r: int) -> Point2:
    if r < 1:
        raise ValueError("downscale ratio must be >= 1")
    return Point2(r * (cell[0] + offset[0]), r * (cell[1] + offset[1]))


def turn_fraction(cos_a: float, sin_a: float) -> float:
    """Alternative scalar angle target in [0, 1) turns. Kept for comparison only:
    the wrap-around at 0/1 makes it discontinuous, unlike the (cos, sin) pair."""
    c, s = _unit_pair(cos_a, sin_a)
    return (math.degrees(math.atan2(s, c)) % 360.0) / 360.0


def from_turn_fraction(fraction: float) -> tuple[float, float]:
    rad = math.radians((fraction % 1.0) * 360.0)
    return math.cos(rad), math.sin(rad)


def l1_loss(
    pred: Sequence[float], target: Sequence[float], mask: Optional[Sequence[bool]] = None
) -> float:
    """Mean absolute error over masked entries (0 when the mask selects nothing)."""
    if len(pred) != len(target):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(target)}")
    if mask is None:
        mask = [True] * len(pred)
    if len(mask) != len(pred):
        raise ValueError("mask length mismatch")
    total, n = 0.0, 0
    for p, t, m in zip(pred, target, mask):
        if m:
            total += abs(p - t)
            n += 1
    return total / n if n else 0.0


TOTAL_LOSS_TERMS = ("center", "offset", "keypoint", "keypoint_heatmap", "obb")


def total_loss(components: Mapping[str, float], weights: LossWeights = LossWeights()) -> float:
    """Weighted training objective over the five head losses."""
    missing = [k for k in TOTAL_LOSS_TERMS if k not in components]
    if missing:
        raise ValueError(f"missing loss components: {missing}")
    w = (weights.w_cp, weights.w_off, weights.w_kp, weights.w_kphm, weights.w_obb)
    return sum(wi * components[k] for wi, k in zip(w, TOTAL_LOSS_TERMS))
