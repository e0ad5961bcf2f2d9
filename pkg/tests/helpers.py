"""Independent oracles and generators shared by the test suite.

Everything here is deliberately written as a second, simpler path to the same
math as the library (dense sampling, Monte-Carlo, exhaustive enumeration,
alternative AP formulations) so the two can check each other.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from leafline import (
    Detection,
    GroundTruthObject,
    GuidedPolyline,
    OrientedBox,
    Point2,
    Role,
    obb_corners,
)
from leafline.codec import derive_obb


# ---------------------------------------------------------------------------
# geometry oracles


def sampled_segment_min_distance(pred, segments, n=20001) -> float:
    """Dense sampling along each segment; lower-bounds the true minimum distance."""
    px, py = pred
    best = math.inf
    for (ax, ay), (bx, by) in segments:
        for i in range(n):
            t = i / (n - 1)
            qx, qy = ax + t * (bx - ax), ay + t * (by - ay)
            best = min(best, math.hypot(px - qx, py - qy))
    return best


def point_in_convex(points: np.ndarray, vertices: Sequence[Point2]) -> np.ndarray:
    """Vectorized membership test for a counter-clockwise convex polygon."""
    inside = np.ones(len(points), dtype=bool)
    n = len(vertices)
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        cross = (b.x - a.x) * (points[:, 1] - a.y) - (b.y - a.y) * (points[:, 0] - a.x)
        inside &= cross >= -1e-12
    return inside


def sample_in_convex(rng: np.random.Generator, vertices: Sequence[Point2], n: int) -> np.ndarray:
    """Uniform samples inside a convex polygon via fan triangulation."""
    v = np.array([[p.x, p.y] for p in vertices])
    tris = [(v[0], v[i], v[i + 1]) for i in range(1, len(v) - 1)]
    areas = np.array([
        0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        for a, b, c in tris
    ])
    choice = rng.choice(len(tris), size=n, p=areas / areas.sum())
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    out = np.empty((n, 2))
    for k, (a, b, c) in enumerate(tris):
        m = choice == k
        out[m] = (
            (1 - r1[m])[:, None] * a
            + (r1[m] * (1 - r2[m]))[:, None] * b
            + (r1[m] * r2[m])[:, None] * c
        )
    return out


def mc_intersection_area(rng: np.random.Generator, poly_a, poly_b, n: int) -> float:
    """Monte-Carlo |A intersect B| from points sampled uniformly inside A."""
    pts = sample_in_convex(rng, poly_a.vertices, n)
    frac = point_in_convex(pts, poly_b.vertices).mean()
    return float(frac * poly_a.area)


def mc_rotated_iou(rng: np.random.Generator, box_a: OrientedBox, box_b: OrientedBox, n: int) -> float:
    """Monte-Carlo IoU: ratio of hits in both boxes to hits in either, over their joint bbox.

    float32 throughout: the boundary fuzz it introduces (~1e-7 of the box size) is
    far below the Monte-Carlo noise this oracle is used at.
    """
    corners = obb_corners(box_a) + obb_corners(box_b)
    xs = [c.x for c in corners]
    ys = [c.y for c in corners]
    px = rng.random(n, dtype=np.float32) * np.float32(max(xs) - min(xs)) + np.float32(min(xs))
    py = rng.random(n, dtype=np.float32) * np.float32(max(ys) - min(ys)) + np.float32(min(ys))

    def in_box(box: OrientedBox) -> np.ndarray:
        rad = math.radians(box.beta)
        c, s = np.float32(math.cos(rad)), np.float32(math.sin(rad))
        dx = px - np.float32(box.center.x)
        dy = py - np.float32(box.center.y)
        u = c * dx
        u += s * dy
        v = c * dy
        v -= s * dx
        out = u >= np.float32(-box.w_tl)
        out &= u <= np.float32(box.w_br)
        out &= v >= np.float32(-box.h_tl)
        out &= v <= np.float32(box.h_br)
        return out

    a = in_box(box_a)
    b = in_box(box_b)
    union = int((a | b).sum())
    if union == 0:
        return 0.0
    return int((a & b).sum()) / union


# ---------------------------------------------------------------------------
# matching / AP oracles


def oracle_match_labels(
    det_scores: Sequence[float],
    sim_rows: Sequence[Sequence[Optional[float]]],
    threshold: float,
) -> list[str]:
    """Exhaustive assignment search for the matching protocol's unique outcome.

    Enumerates every injective detection->target assignment and keeps the one that
    is consistent, detection by detection in score order (ties by input index),
    with "take the best free target with defined similarity >= threshold (ties by
    target index)". Returns 'tp' / 'fp' / 'ignore' per detection in input order.
    """
    n_det = len(det_scores)
    n_gt = len(sim_rows[0]) if n_det else 0
    order = sorted(range(n_det), key=lambda i: (-det_scores[i], i))

    def consistent(assignment: dict[int, Optional[int]]) -> bool:
        taken: set[int] = set()
        for i in order:
            best_j, best_s = None, None
            for j in range(n_gt):
                s = sim_rows[i][j]
                if s is None or j in taken:
                    continue
                if best_s is None or s > best_s:
                    best_j, best_s = j, s
            expected = best_j if (best_s is not None and best_s >= threshold) else None
            if assignment[i] != expected:
                return False
            if expected is not None:
                taken.add(expected)
        return True

    candidates: list[dict[int, Optional[int]]] = [{}]
    for i in range(n_det):
        new = []
        for partial in candidates:
            used = {v for v in partial.values() if v is not None}
            for j in [None] + [j for j in range(n_gt) if j not in used]:
                new.append({**partial, i: j})
        candidates = new
    matches = [a for a in candidates if consistent(a)]
    assert len(matches) == 1, "protocol must have exactly one consistent outcome"
    assignment = matches[0]

    labels = []
    for i in range(n_det):
        if assignment[i] is not None:
            labels.append("tp")
        elif any(s is None for s in sim_rows[i]):
            labels.append("ignore")
        else:
            labels.append("fp")
    return labels


def oracle_ap_all_point(flags: Sequence[bool], n_gt: int) -> Fraction:
    """AP as sum over true positives of the best precision at-or-after their rank."""
    if n_gt == 0:
        return Fraction(0)
    precisions = []
    tp = 0
    for k, f in enumerate(flags):
        tp += bool(f)
        precisions.append(Fraction(tp, k + 1))
    total = Fraction(0)
    for k, f in enumerate(flags):
        if f:
            total += max(precisions[k:])
    return total / n_gt


def oracle_ap_eleven_point(flags: Sequence[bool], n_gt: int) -> Fraction:
    if n_gt == 0:
        return Fraction(0)
    recalls, precisions = [], []
    tp = 0
    for k, f in enumerate(flags):
        tp += bool(f)
        recalls.append(Fraction(tp, n_gt))
        precisions.append(Fraction(tp, k + 1))
    total = Fraction(0)
    for step in range(11):
        level = Fraction(step, 10)
        candidates = [p for r, p in zip(recalls, precisions) if r >= level]
        total += max(candidates) if candidates else Fraction(0)
    return total / 11


# ---------------------------------------------------------------------------
# random scene generators


def random_convex_polygon(rng: np.random.Generator, center, mean_radius, n_min=3, n_max=8):
    """Convex polygon: points on a circle in angular order, then an affine stretch."""
    from leafline import ConvexPolygon

    n = int(rng.integers(n_min, n_max + 1))
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, n))
    while np.min(np.diff(angles, append=angles[0] + 2 * math.pi)) < 0.05:
        angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, n))
    sx = rng.uniform(0.5, 1.5)
    sy = rng.uniform(0.5, 1.5)
    rot = rng.uniform(0.0, 2.0 * math.pi)
    cr, sr = math.cos(rot), math.sin(rot)
    pts = []
    for a in angles:
        x, y = mean_radius * sx * math.cos(a), mean_radius * sy * math.sin(a)
        pts.append((center[0] + cr * x - sr * y, center[1] + sr * x + cr * y))
    return ConvexPolygon.of(pts)


def random_box(rng: np.random.Generator, center_range=100.0, size_range=(4.0, 60.0)) -> OrientedBox:
    cx, cy = rng.uniform(-center_range, center_range, 2)
    w, h = rng.uniform(*size_range, 2)
    fw, fh = rng.uniform(0.1, 0.9, 2)
    return OrientedBox(Point2(cx, cy), w * fw, w * (1 - fw), h * fh, h * (1 - fh), rng.uniform(0, 360))


def random_polyline(rng: np.random.Generator, full8: Optional[bool] = None) -> GuidedPolyline:
    """Plausible leaf chain: stem (optional) rising into a gently curving vein."""
    if full8 is None:
        full8 = bool(rng.random() < 0.6)
    base = rng.uniform(100.0, 400.0, 2)
    heading = rng.uniform(0.0, 2.0 * math.pi)
    pts = [tuple(base)]
    n = 8 if full8 else 5
    for _ in range(n - 1):
        heading += rng.uniform(-0.35, 0.35)
        step = rng.uniform(15.0, 45.0)
        base = base + np.array([step * math.cos(heading), step * math.sin(heading)])
        pts.append(tuple(base))
    roles = (Role.TRUE, Role.PSEUDO, Role.PSEUDO, Role.TRUE, Role.PSEUDO, Role.PSEUDO,
             Role.PSEUDO, Role.TRUE) if full8 else (Role.TRUE, Role.PSEUDO, Role.PSEUDO,
                                                    Role.PSEUDO, Role.TRUE)
    visible = [True] * n
    for i in range(n):
        if roles[i] is Role.PSEUDO and rng.random() < 0.12:
            visible[i] = False
    return GuidedPolyline.full8(pts, visible) if full8 else GuidedPolyline.vein5(pts, visible)


def blade_around(polyline: GuidedPolyline, width: float = 18.0) -> list[tuple[float, float]]:
    """Simple blade outline: the vein chord padded perpendicular on both sides."""
    vein = polyline.visible_vein_points()
    a, b = vein[0], vein[-1]
    ux, uy = b.x - a.x, b.y - a.y
    norm = math.hypot(ux, uy)
    ux, uy = ux / norm, uy / norm
    px, py = -uy, ux
    return [
        (a.x + px * width, a.y + py * width),
        (b.x + px * width, b.y + py * width),
        (b.x - px * width, b.y - py * width),
        (a.x - px * width, a.y - py * width),
    ]


def random_gt_object(rng: np.random.Generator, image_id: str, full8: Optional[bool] = None) -> GroundTruthObject:
    pl = random_polyline(rng, full8)
    blade = blade_around(pl, float(rng.uniform(8.0, 30.0)))
    return GroundTruthObject(image_id, pl, derive_obb(pl, blade), tuple(Point2(*p) for p in blade))


def slots_of(polyline: GuidedPolyline) -> list[Optional[Point2]]:
    """Ground-truth keypoints arranged on the 8-slot grid (None where absent/invisible)."""
    out: list[Optional[Point2]] = []
    for slot in range(8):
        kp = polyline.keypoint_at_slot(slot) if slot < polyline.slot_count else None
        out.append(kp.point if kp is not None and kp.visible else None)
    return out


def perfect_detection(gt: GroundTruthObject, score: float = 1.0) -> Detection:
    return Detection(gt.image_id, score, tuple(slots_of(gt.polyline)), gt.obb)
