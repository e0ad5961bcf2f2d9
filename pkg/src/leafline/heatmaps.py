"""Gaussian target heatmaps on the downscaled grid, peak extraction, focal loss.

Rendering follows the usual center-point recipe: each object splats an
unnormalized Gaussian whose mode sits exactly on the object's integer output
cell (the sub-pixel part belongs to the offset target), and overlapping
objects combine with a pixel-wise max so values stay in [0, 1].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import OrientedBox, Point2, PointLike, as_point
from .polylines import GuidedPolyline

logger = logging.getLogger(__name__)

P_CHANNELS = 8
S_CHANNELS = 7


@dataclass(eq=False)
class Heatmap:
    """Dense (channels, height, width) float32 grid with values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise ValueError(f"expected a (C, H, W) array, got shape {self.values.shape}")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ValueError("heatmap values must lie in [0, 1]")

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class GaussianSpec:
    """Gaussian width: a fixed sigma in grid pixels, or size-adaptive from the object.

    Adaptive mode uses the min-overlap-0.7 radius rule common to center-point
    detectors, floored at min_radius, with sigma = radius / 3.
    """

    sigma: Optional[float] = 2.0
    size_adaptive: bool = False
    min_radius: float = 1.0

    def __post_init__(self):
        if self.size_adaptive:
            if self.min_radius <= 0.0:
                raise ValueError("min_radius must be > 0")
        elif self.sigma is None or not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError("sigma must be a positive real")


def gaussian_radius(height: float, width: float, min_overlap: float = 0.7) -> float:
    """Largest splat radius keeping IoU >= min_overlap under corner/center shifts."""
    a1 = 1.0
    b1 = height + width
    c1 = width * height * (1.0 - min_overlap) / (1.0 + min_overlap)
    r1 = (b1 - math.sqrt(max(0.0, b1 * b1 - 4.0 * a1 * c1))) / (2.0 * a1)

    a2 = 4.0
    b2 = 2.0 * (height + width)
    c2 = (1.0 - min_overlap) * width * height
    r2 = (b2 - math.sqrt(max(0.0, b2 * b2 - 4.0 * a2 * c2))) / (2.0 * a2)

    a3 = 4.0 * min_overlap
    b3 = -2.0 * min_overlap * (height + width)
    c3 = (min_overlap - 1.0) * width * height
    r3 = (b3 + math.sqrt(max(0.0, b3 * b3 - 4.0 * a3 * c3))) / (2.0 * a3)
    return min(r1, r2, r3)


def _adaptive_sigma(spec: GaussianSpec, box: Optional[OrientedBox], r: int) -> float:
    if not spec.size_adaptive:
        return float(spec.sigma)
    if box is None:
        return spec.min_radius / 3.0
    radius = gaussian_radius(box.height / r, box.width / r)
    return max(spec.min_radius, radius) / 3.0


def _bbox_sigma(spec: GaussianSpec, polyline: GuidedPolyline, r: int) -> float:
    if not spec.size_adaptive:
        return float(spec.sigma)
    pts = polyline.visible_points()
    xs = [p.x for p in pts]
    ys = [p.y for p in pts]
    radius = gaussian_radius((max(ys) - min(ys)) / r, (max(xs) - min(xs)) / r)
    return max(spec.min_radius, radius) / 3.0


def _splat_point(channel: np.ndarray, cx: int, cy: int, sigma: float) -> None:
    """Max-combine a Gaussian with mode 1.0 at integer cell (cx, cy) into `channel`."""
    h, w = channel.shape
    reach = max(1, int(math.ceil(3.0 * sigma)))
    x0, x1 = max(0, cx - reach), min(w - 1, cx + reach)
    y0, y1 = max(0, cy - reach), min(h - 1, cy + reach)
    ys = np.arange(y0, y1 + 1, dtype=np.float64)
    xs = np.arange(x0, x1 + 1, dtype=np.float64)
    g = np.exp(-(((xs[None, :] - cx) ** 2) + ((ys[:, None] - cy) ** 2)) / (2.0 * sigma * sigma))
    np.maximum(channel[y0:y1 + 1, x0:x1 + 1], g.astype(np.float32), out=channel[y0:y1 + 1, x0:x1 + 1])


def _splat_segment(channel: np.ndarray, a: tuple[int, int], b: tuple[int, int], sigma: float) -> None:
    """Max-combine a Gaussian of the clamped distance to segment a-b (cell coords)."""
    h, w = channel.shape
    reach = max(1, int(math.ceil(3.0 * sigma)))
    x0 = max(0, min(a[0], b[0]) - reach)
    x1 = min(w - 1, max(a[0], b[0]) + reach)
    y0 = max(0, min(a[1], b[1]) - reach)
    y1 = min(h - 1, max(a[1], b[1]) + reach)
    if x0 > x1 or y0 > y1:
        return
    ys = np.arange(y0, y1 + 1, dtype=np.float64)
    xs = np.arange(x0, x1 + 1, dtype=np.float64)
    px = np.broadcast_to(xs[None, :], (len(ys), len(xs)))
    py = np.broadcast_to(ys[:, None], (len(ys), len(xs)))
    ex, ey = b[0] - a[0], b[1] - a[1]
    den = ex * ex + ey * ey
    if den == 0:
        t = np.zeros_like(px)
    else:
        t = np.clip(((px - a[0]) * ex + (py - a[1]) * ey) / den, 0.0, 1.0)
    dx = px - (a[0] + t * ex)
    dy = py - (a[1] + t * ey)
    g = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    np.maximum(channel[y0:y1 + 1, x0:x1 + 1], g.astype(np.float32), out=channel[y0:y1 + 1, x0:x1 + 1])


def _cell(p: Point2, r: int) -> tuple[int, int]:
    return int(math.floor(p.x / r)), int(math.floor(p.y / r))


def _in_bounds(cell: tuple[int, int], shape: tuple[int, int]) -> bool:
    return 0 <= cell[0] < shape[1] and 0 <= cell[1] < shape[0]


def render_center_heatmap(
    objects: Sequence[tuple[PointLike, Optional[OrientedBox]]],
    shape: tuple[int, int],
    spec: GaussianSpec = GaussianSpec(),
    r: int = 4,
) -> Heatmap:
    """Single-channel map with one Gaussian peak per object center.

    `objects` pairs each center (input-image pixels) with its box, which is only
    consulted for size-adaptive sigmas. Centers landing outside the grid are
    skipped with a warning.
    """
    grid = np.zeros((1, shape[0], shape[1]), dtype=np.float32)
    skipped = 0
    for center, box in objects:
        cell = _cell(as_point(center), r)
        if not _in_bounds(cell, shape):
            skipped += 1
            continue
        _splat_point(grid[0], cell[0], cell[1], _adaptive_sigma(spec, box, r))
    if skipped:
        logger.warning("render_center_heatmap: skipped %d out-of-bounds centers", skipped)
    return Heatmap(grid)


def render_p_heatmap(
    polylines: Sequence[GuidedPolyline],
    shape: tuple[int, int],
    spec: GaussianSpec = GaussianSpec(),
    r: int = 4,
) -> Heatmap:
    """8-channel map: one Gaussian per visible keypoint in its slot's channel."""
    grid = np.zeros((P_CHANNELS, shape[0], shape[1]), dtype=np.float32)
    skipped = 0
    for pl in polylines:
        sigma = _bbox_sigma(spec, pl, r)
        for slot in range(P_CHANNELS):
            kp = pl.keypoint_at_slot(slot) if slot < pl.slot_count else None
            if kp is None or not kp.visible:
                continue
            cell = _cell(kp.point, r)
            if not _in_bounds(cell, shape):
                skipped += 1
                continue
            _splat_point(grid[slot], cell[0], cell[1], sigma)
    if skipped:
        logger.warning("render_p_heatmap: skipped %d out-of-bounds keypoints", skipped)
    return Heatmap(grid)


def render_s_heatmap(
    polylines: Sequence[GuidedPolyline],
    shape: tuple[int, int],
    spec: GaussianSpec = GaussianSpec(),
    r: int = 4,
) -> Heatmap:
    """7-channel map of Gaussian distance to each chain segment (slot c to c+1).

    Segments with an invisible or absent endpoint render nothing in their channel.
    """
    grid = np.zeros((S_CHANNELS, shape[0], shape[1]), dtype=np.float32)
    for pl in polylines:
        sigma = _bbox_sigma(spec, pl, r)
        for seg in range(S_CHANNELS):
            if seg + 1 >= pl.slot_count:
                continue
            ka = pl.keypoint_at_slot(seg)
            kb = pl.keypoint_at_slot(seg + 1)
            if ka is None or kb is None or not (ka.visible and kb.visible):
                continue
            _splat_segment(grid[seg], _cell(ka.point, r), _cell(kb.point, r), sigma)
    return Heatmap(grid)


@dataclass(frozen=True)
class Peak:
    channel: int
    cell: tuple[int, int]  # (col, row) on the output grid
    score: float


def extract_peaks(hm: Heatmap, top_k: int = 100, score_threshold: float = 0.0) -> list[Peak]:
    """Strictly-positive local maxima of each 3x3 neighborhood, top_k per channel.

    Plateau ties go to the lowest row-major cell; returned peaks are sorted by
    descending score within each channel.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    values = hm.values
    peaks: list[Peak] = []
    for ch in range(values.shape[0]):
        v = values[ch]
        padded = np.full((v.shape[0] + 2, v.shape[1] + 2), -np.inf, dtype=np.float64)
        padded[1:-1, 1:-1] = v
        mask = v > 0.0
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                neighbor = padded[1 + dy:padded.shape[0] - 1 + dy, 1 + dx:padded.shape[1] - 1 + dx]
                if (dy, dx) < (0, 0):
                    mask &= v > neighbor  # earlier row-major neighbor wins ties
                else:
                    mask &= v >= neighbor
        rows_idx, cols_idx = np.nonzero(mask)
        scored = sorted(
            zip(v[rows_idx, cols_idx].tolist(), rows_idx.tolist(), cols_idx.tolist()),
            key=lambda t: (-t[0], t[1], t[2]),
        )
        for score, row, col in scored[:top_k]:
            if score >= score_threshold:
                peaks.append(Peak(ch, (col, row), float(score)))
    return peaks


def refine_keypoints(
    regressed: Sequence[Optional[PointLike]],
    peaks_per_channel: Sequence[Sequence[PointLike]],
    search_radius: float,
) -> list[Optional[Point2]]:
    """Snap each regressed keypoint to its channel's nearest peak within search_radius.

    Inputs and outputs are in output-grid coordinates; peak positions may carry a
    sub-pixel offset correction. Keypoints with no peak in range stay regressed.
    """
    if search_radius <= 0.0:
        raise ValueError("search_radius must be > 0")
    out: list[Optional[Point2]] = []
    for ch, reg in enumerate(regressed):
        if reg is None:
            out.append(None)
            continue
        reg = as_point(reg)
        cands = [as_point(p) for p in peaks_per_channel[ch]] if ch < len(peaks_per_channel) else []
        best: Optional[Point2] = None
        best_d = search_radius
        for cand in cands:
            d = math.hypot(cand.x - reg.x, cand.y - reg.y)
            if d <= best_d:
                best, best_d = cand, d
        out.append(best if best is not None else reg)
    return out


def default_search_radius(box: OrientedBox, r: int = 1) -> float:
    """Snap radius scaled to the object: a tenth of its box diagonal on the grid."""
    return 0.1 * math.hypot(box.width, box.height) / r


def focal_loss(pred: np.ndarray | Heatmap, gt: np.ndarray | Heatmap, alpha: float = 2.0, beta: float = 4.0) -> float:
    """Penalty-reduced pixel-wise focal loss for dense heatmaps.

    Pixels where gt == 1 contribute -(1-p)^alpha*log(p); the rest contribute
    -(1-gt)^beta * p^alpha * log(1-p). The sum is normalized by the number of
    gt == 1 pixels (or 1 when there are none).
    """
    p = pred.values if isinstance(pred, Heatmap) else np.asarray(pred)
    y = gt.values if isinstance(gt, Heatmap) else np.asarray(gt)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {y.shape}")
    p = np.clip(p.astype(np.float64), 1e-6, 1.0 - 1e-6)
    y = y.astype(np.float64)
    pos = y == 1.0
    pos_term = -((1.0 - p[pos]) ** alpha) * np.log(p[pos])
    neg = ~pos
    neg_term = -((1.0 - y[neg]) ** beta) * (p[neg] ** alpha) * np.log(1.0 - p[neg])
    n_pos = max(1, int(pos.sum()))
    return float((pos_term.sum() + neg_term.sum()) / n_pos)
