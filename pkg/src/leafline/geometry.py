"""Exact 2D primitives: segment projection, convex clipping, rotated-box IoU, PCA axis.

All coordinates are image pixels (x right, y down is fine: nothing here assumes a
handedness beyond consistent counter-clockwise polygon winding under the shoelace
sign convention used throughout).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union


class GeometryError(ValueError):
    """Invalid geometric input: non-finite coordinates, malformed polygon, bad box."""


class DegenerateGeometryError(GeometryError):
    """Input collapsed to a point/line where the operation has no meaningful answer."""


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)

    def __iter__(self):
        return iter((self.x, self.y))


PointLike = Union[Point2, Sequence[float]]


def as_point(p: PointLike) -> Point2:
    """Coerce a Point2 or (x, y) sequence to Point2, validating finiteness."""
    if isinstance(p, Point2):
        return p
    x, y = p
    return Point2(float(x), float(y))


def distance(p: PointLike, q: PointLike) -> float:
    p, q = as_point(p), as_point(q)
    return math.hypot(p.x - q.x, p.y - q.y)


@dataclass(frozen=True)
class Segment:
    a: Point2
    b: Point2

    @property
    def degenerate(self) -> bool:
        """Zero-length segments are allowed but flagged; projection returns endpoint a."""
        return self.a.x == self.b.x and self.a.y == self.b.y

    @classmethod
    def of(cls, a: PointLike, b: PointLike) -> "Segment":
        return cls(as_point(a), as_point(b))


def project_point_to_segment(p: PointLike, seg: Segment) -> tuple[Point2, float]:
    """Clamped orthogonal projection of p onto seg.

    Returns (projected point, t) with t in [0, 1] such that the projection equals
    seg.a + t*(seg.b - seg.a) and minimizes the distance to p subject to the clamp.
    A degenerate segment projects everything to its endpoint a with t = 0.
    """
    p = as_point(p)
    a, b = seg.a, seg.b
    dx, dy = b.x - a.x, b.y - a.y
    den = dx * dx + dy * dy
    if den == 0.0:
        return a, 0.0
    t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / den
    t = min(1.0, max(0.0, t))
    return Point2(a.x + t * dx, a.y + t * dy), t


def segment_distance(p: PointLike, seg: Segment) -> float:
    """Distance from p to the closest point of the segment."""
    proj, _ = project_point_to_segment(p, seg)
    return distance(p, proj)


def _shoelace(vertices: Sequence[Point2]) -> float:
    s = 0.0
    n = len(vertices)
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        s += a.x * b.y - b.x * a.y
    return 0.5 * s


@dataclass(frozen=True)
class ConvexPolygon:
    """Counter-clockwise convex polygon (signed area > 0, no repeated consecutive vertices)."""

    vertices: tuple[Point2, ...]

    def __post_init__(self):
        verts = self.vertices
        if len(verts) < 3:
            raise GeometryError(f"polygon needs >= 3 vertices, got {len(verts)}")
        scale = max(1.0, max(max(abs(v.x), abs(v.y)) for v in verts))
        tol = 1e-9 * scale * scale
        n = len(verts)
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            if a.x == b.x and a.y == b.y:
                raise GeometryError(f"repeated consecutive vertex at index {i}")
        for i in range(n):
            a, b, c = verts[i], verts[(i + 1) % n], verts[(i + 2) % n]
            cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x)
            if cross < -tol:
                raise GeometryError("polygon is not convex counter-clockwise")
        if _shoelace(verts) <= 0.0:
            raise GeometryError("polygon winding must be counter-clockwise (signed area > 0)")

    @classmethod
    def of(cls, points: Sequence[PointLike]) -> "ConvexPolygon":
        return cls(tuple(as_point(p) for p in points))

    @property
    def area(self) -> float:
        return _shoelace(self.vertices)


def _clip_halfplane(points: list[Point2], a: Point2, b: Point2) -> list[Point2]:
    """Sutherland-Hodgman step: keep the part of `points` left of directed edge a->b."""
    ex, ey = b.x - a.x, b.y - a.y
    out: list[Point2] = []
    n = len(points)
    for i in range(n):
        cur = points[i]
        nxt = points[(i + 1) % n]
        side_cur = ex * (cur.y - a.y) - ey * (cur.x - a.x)
        side_nxt = ex * (nxt.y - a.y) - ey * (nxt.x - a.x)
        if side_cur >= 0.0:
            out.append(cur)
        if (side_cur > 0.0 > side_nxt) or (side_cur < 0.0 < side_nxt):
            t = side_cur / (side_cur - side_nxt)
            out.append(Point2(cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)))
    return out


def polygon_intersection_area(a: ConvexPolygon, b: ConvexPolygon) -> float:
    """Area of the intersection of two convex polygons (exact clipping, no rasterization)."""
    clipped = list(a.vertices)
    bverts = b.vertices
    n = len(bverts)
    for i in range(n):
        if not clipped:
            return 0.0
        clipped = _clip_halfplane(clipped, bverts[i], bverts[(i + 1) % n])
    if len(clipped) < 3:
        return 0.0
    return max(0.0, _shoelace(clipped))


@dataclass(frozen=True)
class OrientedBox:
    """Rotated rectangle anchored at `center`, which need not be the box middle.

    In the box's own frame the rectangle spans x in [-w_tl, +w_br] and
    y in [-h_tl, +h_br]; beta rotates that frame into image coordinates.
    Angles are degrees, normalized to [0, 360) on construction.
    """

    center: Point2
    w_tl: float
    w_br: float
    h_tl: float
    h_br: float
    beta: float

    def __post_init__(self):
        vals = (self.w_tl, self.w_br, self.h_tl, self.h_br, self.beta)
        if not all(math.isfinite(v) for v in vals):
            raise GeometryError("non-finite box parameter")
        if min(self.w_tl, self.w_br, self.h_tl, self.h_br) < 0.0:
            raise GeometryError("box extents must be >= 0")
        if self.width <= 0.0 or self.height <= 0.0:
            raise GeometryError("box must have positive total width and height")
        object.__setattr__(self, "beta", self.beta % 360.0)

    @property
    def width(self) -> float:
        return self.w_tl + self.w_br

    @property
    def height(self) -> float:
        return self.h_tl + self.h_br

    @property
    def area(self) -> float:
        return self.width * self.height


def obb_corners(box: OrientedBox) -> tuple[Point2, Point2, Point2, Point2]:
    """Corners in counter-clockwise order, starting at the (-w_tl, -h_tl) corner."""
    rad = math.radians(box.beta)
    c, s = math.cos(rad), math.sin(rad)
    cx, cy = box.center.x, box.center.y
    local = (
        (-box.w_tl, -box.h_tl),
        (box.w_br, -box.h_tl),
        (box.w_br, box.h_br),
        (-box.w_tl, box.h_br),
    )
    return tuple(Point2(cx + c * x - s * y, cy + s * x + c * y) for x, y in local)


def obb_from_corners(corners: Sequence[PointLike], center: PointLike) -> OrientedBox:
    """Inverse of obb_corners for a known anchor point: recovers splits and beta."""
    if len(corners) != 4:
        raise GeometryError(f"expected 4 corners, got {len(corners)}")
    c0, c1, _, c3 = (as_point(p) for p in corners)
    center = as_point(center)
    ux, uy = c1.x - c0.x, c1.y - c0.y
    vx, vy = c3.x - c0.x, c3.y - c0.y
    w = math.hypot(ux, uy)
    h = math.hypot(vx, vy)
    if w == 0.0 or h == 0.0:
        raise DegenerateGeometryError("zero-extent corner set")
    ux, uy = ux / w, uy / w
    vx, vy = vx / h, vy / h
    dx, dy = center.x - c0.x, center.y - c0.y
    w_tl = dx * ux + dy * uy
    h_tl = dx * vx + dy * vy
    beta = math.degrees(math.atan2(uy, ux)) % 360.0
    return OrientedBox(center, w_tl, w - w_tl, h_tl, h - h_tl, beta)


def obb_middle(box: OrientedBox) -> Point2:
    """Geometric middle of the rectangle (independent of where the anchor sits)."""
    corners = obb_corners(box)
    return Point2(
        sum(c.x for c in corners) / 4.0,
        sum(c.y for c in corners) / 4.0,
    )


def obb_polygon(box: OrientedBox) -> ConvexPolygon:
    return ConvexPolygon(obb_corners(box))


def rotated_iou(a: OrientedBox, b: OrientedBox) -> float:
    """Intersection-over-union of two rotated boxes via exact convex clipping."""
    area_a = a.area
    area_b = b.area
    if area_a <= 0.0 or area_b <= 0.0:
        raise GeometryError("zero-area box")
    inter = polygon_intersection_area(obb_polygon(a), obb_polygon(b))
    union = area_a + area_b - inter
    return min(1.0, max(0.0, inter / union))


def principal_axis(points: Sequence[PointLike], from_point: PointLike, to_point: PointLike) -> float:
    """Orientation (degrees in [0, 360)) of the first principal component of `points`.

    The eigenvector sign is ambiguous; it is resolved so that the axis has a
    non-negative dot product with the chord from_point -> to_point.
    """
    pts = [as_point(p) for p in points]
    if len(pts) < 2:
        raise DegenerateGeometryError("principal axis needs >= 2 points")
    mx = sum(p.x for p in pts) / len(pts)
    my = sum(p.y for p in pts) / len(pts)
    sxx = sum((p.x - mx) ** 2 for p in pts)
    syy = sum((p.y - my) ** 2 for p in pts)
    sxy = sum((p.x - mx) * (p.y - my) for p in pts)
    if sxx == 0.0 and syy == 0.0:
        raise DegenerateGeometryError("all points coincident")
    # Closed-form leading eigenvector of the 2x2 scatter matrix.
    theta = 0.5 * math.atan2(2.0 * sxy, sxx - syy)
    ux, uy = math.cos(theta), math.sin(theta)
    f, t = as_point(from_point), as_point(to_point)
    cx, cy = t.x - f.x, t.y - f.y
    if cx == 0.0 and cy == 0.0:
        raise DegenerateGeometryError("zero-length orientation chord")
    if ux * cx + uy * cy < 0.0:
        ux, uy = -ux, -uy
    return math.degrees(math.atan2(uy, ux)) % 360.0
