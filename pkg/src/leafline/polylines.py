"""Keypoint-guided polylines: ordered keypoint chains with true/pseudo roles.

The canonical 8-slot chain runs stem -> 2 stem guides -> basal -> 3 vein guides
-> apex; a stem-less leaf carries only the last five slots. "True" keypoints have
a unique anatomical position, "pseudo" keypoints are guidance points whose
position may slide along the line between their true neighbors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

from .geometry import (
    DegenerateGeometryError,
    GeometryError,
    Point2,
    PointLike,
    Segment,
    as_point,
    distance,
    project_point_to_segment,
)


class Role(enum.Enum):
    TRUE = "true"
    PSEUDO = "pseudo"


class Layout(enum.Enum):
    FULL8 = "full8"
    VEIN5 = "vein5"
    CUSTOM = "custom"


SLOT_COUNT = 8
SLOT_NAMES = ("stem", "stem_g2", "stem_g3", "basal", "vein_g5", "vein_g6", "vein_g7", "apex")
STEM_SLOT, BASAL_SLOT, APEX_SLOT = 0, 3, 7
VEIN_SLOTS = (3, 4, 5, 6, 7)
VEIN5_OFFSET = 3

FULL8_ROLES = (
    Role.TRUE, Role.PSEUDO, Role.PSEUDO, Role.TRUE,
    Role.PSEUDO, Role.PSEUDO, Role.PSEUDO, Role.TRUE,
)
VEIN5_ROLES = (Role.TRUE, Role.PSEUDO, Role.PSEUDO, Role.PSEUDO, Role.TRUE)


@dataclass(frozen=True)
class Keypoint:
    point: Point2
    role: Role
    visible: bool = True


@dataclass(frozen=True)
class GuidedPolyline:
    keypoints: tuple[Keypoint, ...]
    layout: Layout

    def __post_init__(self):
        kps = self.keypoints
        if not kps:
            raise GeometryError("polyline needs at least one keypoint")
        if not any(k.visible for k in kps):
            raise GeometryError("polyline needs at least one visible keypoint")
        if self.layout is Layout.FULL8:
            if len(kps) != 8 or tuple(k.role for k in kps) != FULL8_ROLES:
                raise GeometryError("full8 layout requires 8 keypoints with roles T,P,P,T,P,P,P,T")
        elif self.layout is Layout.VEIN5:
            if len(kps) != 5 or tuple(k.role for k in kps) != VEIN5_ROLES:
                raise GeometryError("vein5 layout requires 5 keypoints with roles T,P,P,P,T")

    @classmethod
    def full8(cls, points: Sequence[PointLike], visible: Sequence[bool] | None = None) -> "GuidedPolyline":
        return cls(_make_keypoints(points, FULL8_ROLES, visible), Layout.FULL8)

    @classmethod
    def vein5(cls, points: Sequence[PointLike], visible: Sequence[bool] | None = None) -> "GuidedPolyline":
        return cls(_make_keypoints(points, VEIN5_ROLES, visible), Layout.VEIN5)

    @classmethod
    def chain(
        cls,
        points: Sequence[PointLike],
        roles: Sequence[Role],
        visible: Sequence[bool] | None = None,
    ) -> "GuidedPolyline":
        """Free-form keypoint chain, for geometry-level use outside the two canonical layouts."""
        return cls(_make_keypoints(points, tuple(roles), visible), Layout.CUSTOM)

    @property
    def slot_count(self) -> int:
        """Number of addressable slots: 8 for canonical layouts, chain length otherwise."""
        return SLOT_COUNT if self.layout in (Layout.FULL8, Layout.VEIN5) else len(self.keypoints)

    def chain_index(self, slot: int) -> Optional[int]:
        """Chain position for a slot index, or None when the layout lacks that slot."""
        if not 0 <= slot < self.slot_count:
            raise IndexError(f"slot {slot} out of range for {self.layout.value}")
        if self.layout is Layout.VEIN5:
            idx = slot - VEIN5_OFFSET
            return idx if idx >= 0 else None
        return slot

    def keypoint_at_slot(self, slot: int) -> Optional[Keypoint]:
        idx = self.chain_index(slot)
        return None if idx is None else self.keypoints[idx]

    def visible_points(self) -> list[Point2]:
        return [k.point for k in self.keypoints if k.visible]

    def visible_vein_points(self) -> list[Point2]:
        """Visible keypoints on the vein part of the chain (basal through apex)."""
        if self.layout is Layout.CUSTOM:
            return self.visible_points()
        pts = []
        for slot in VEIN_SLOTS:
            kp = self.keypoint_at_slot(slot)
            if kp is not None and kp.visible:
                pts.append(kp.point)
        return pts


def _make_keypoints(
    points: Sequence[PointLike],
    roles: tuple[Role, ...],
    visible: Sequence[bool] | None,
) -> tuple[Keypoint, ...]:
    pts = [as_point(p) for p in points]
    if len(pts) != len(roles):
        raise GeometryError(f"expected {len(roles)} points, got {len(pts)}")
    if visible is None:
        visible = [True] * len(pts)
    if len(visible) != len(pts):
        raise GeometryError("visibility mask length mismatch")
    return tuple(Keypoint(p, r, bool(v)) for p, r, v in zip(pts, roles, visible))


def min_projection_distance(pred: PointLike, polyline: GuidedPolyline, index: int) -> float:
    """Distance from a prediction to its projection on the target's neighbor segments.

    For a pseudo keypoint at chain position `index`, the candidate segments run to
    the previous and next chain keypoints (when those exist and are visible) and the
    smaller clamped projection distance wins. For a true keypoint the plain Euclidean
    distance to the keypoint is returned instead.
    """
    kps = polyline.keypoints
    if not 0 <= index < len(kps):
        raise GeometryError(f"keypoint index {index} out of range")
    kp = kps[index]
    if not kp.visible:
        raise GeometryError(f"keypoint {index} is not visible")
    pred = as_point(pred)
    if kp.role is Role.TRUE:
        return distance(pred, kp.point)
    best: float | None = None
    for j in (index - 1, index + 1):
        if 0 <= j < len(kps) and kps[j].visible:
            proj, _ = project_point_to_segment(pred, Segment(kp.point, kps[j].point))
            d = distance(pred, proj)
            if best is None or d < best:
                best = d
    if best is None:
        raise DegenerateGeometryError(f"pseudo keypoint {index} has no visible neighbor")
    # Both segments contain the keypoint itself, so the projection distance can
    # never exceed the plain distance; enforce that against float rounding.
    return min(best, distance(pred, kp.point))


@dataclass(frozen=True)
class SubsetSpec:
    """Named set of slot indices scored together (indices address the 8-slot layout).

    required_slots must be annotated by the target's layout for the subset to apply
    at all: the stem subset is undefined on a stem-less leaf even though the basal
    keypoint (shared with the vein) is present there.
    """

    name: str
    indices: frozenset[int]
    required_slots: frozenset[int] = frozenset()


SUBSET_ALL = SubsetSpec("all", frozenset(range(8)))
SUBSET_STEM = SubsetSpec("stem", frozenset({0, 1, 2, 3}), required_slots=frozenset({STEM_SLOT}))
SUBSET_VEIN = SubsetSpec("vein", frozenset({3, 4, 5, 6, 7}))
SUBSET_TRUE = SubsetSpec("true", frozenset({0, 3, 7}))
SUBSET_PSEUDO = SubsetSpec("pseudo", frozenset({1, 2, 4, 5, 6}))

DEFAULT_SUBSETS = (SUBSET_ALL, SUBSET_STEM, SUBSET_VEIN, SUBSET_TRUE, SUBSET_PSEUDO)
SUBSETS = {s.name: s for s in DEFAULT_SUBSETS}
