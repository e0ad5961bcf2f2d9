"""Greedy detection/target matching and VOC-style average precision.

Matching is greedy in detection-score order per image; AP integrates the
precision envelope over recall with exact rational arithmetic so results are
reproducible bit-for-bit and directly comparable against brute-force oracles.
Targets whose similarity is undefined for a metric (for example a stem subset
on a stem-less leaf) act as ignore regions: they are neither counted as misses
nor allowed to turn detections into false positives.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .geometry import OrientedBox, Point2, rotated_iou
from .metrics import OksParams, ScaleMode, default_sigmas, object_scale, oks, poks
from .polylines import DEFAULT_SUBSETS, SUBSET_ALL, SUBSETS, GuidedPolyline, SubsetSpec

DEFAULT_THRESHOLDS = tuple(t / 100.0 for t in range(50, 100, 5))


class Interpolation(enum.Enum):
    ALL_POINT = "all_point"
    ELEVEN_POINT = "eleven_point"


@dataclass(frozen=True)
class Detection:
    """A scored prediction: keypoint chain (8 slots, entries may be None) and/or a box."""

    image_id: str
    score: float
    polyline_pred: Optional[tuple[Optional[Point2], ...]] = None
    obb_pred: Optional[OrientedBox] = None

    def __post_init__(self):
        if self.polyline_pred is None and self.obb_pred is None:
            raise ValueError("detection needs a keypoint prediction or a box prediction")
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class GroundTruthObject:
    image_id: str
    polyline: GuidedPolyline
    obb: Optional[OrientedBox] = None
    blade_polygon: Optional[tuple[Point2, ...]] = None


@dataclass(frozen=True)
class EvalConfig:
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    subsets: tuple[SubsetSpec, ...] = DEFAULT_SUBSETS
    oks_params: OksParams = OksParams()
    obb_iou_threshold: float = 0.5
    voc_interpolation: Interpolation = Interpolation.ALL_POINT

    def __post_init__(self):
        for lo, hi in zip(self.thresholds, self.thresholds[1:]):
            if not lo < hi:
                raise ValueError("thresholds must be strictly increasing")
        if any(not 0.0 < t < 1.0 for t in self.thresholds):
            raise ValueError("thresholds must lie in (0, 1)")
        if not 0.0 < self.obb_iou_threshold < 1.0:
            raise ValueError("obb_iou_threshold must lie in (0, 1)")


@dataclass(frozen=True)
class MatchOutcome:
    """Per-detection matching verdict; `ignored` detections are dropped from scoring."""

    detection: Detection
    gt_index: Optional[int]
    ignored: bool = False

    @property
    def matched(self) -> bool:
        return self.gt_index is not None


SimilarityFn = Callable[[Detection, GroundTruthObject], Optional[float]]


def _greedy_match(
    sim_rows: Sequence[Sequence[Optional[float]]],
    det_scores: Sequence[float],
    threshold: float,
) -> list[tuple[Optional[int], bool]]:
    """Greedy matching over a precomputed (det x gt) similarity matrix.

    Detections are processed by descending score (ties: input order); each takes the
    best unmatched target with defined similarity >= threshold (ties: target input
    order). Unmatched detections are dropped when the only targets they could relate
    to are ignore regions (similarity undefined), otherwise they are false positives.
    """
    n_det = len(det_scores)
    order = sorted(range(n_det), key=lambda i: (-det_scores[i], i))
    taken: set[int] = set()
    out: list[tuple[Optional[int], bool]] = [(None, False)] * n_det
    for i in order:
        row = sim_rows[i]
        best_j: Optional[int] = None
        best_s = -1.0
        for j, s in enumerate(row):
            if s is None or j in taken:
                continue
            if s > best_s:
                best_j, best_s = j, s
        if best_j is not None and best_s >= threshold:
            taken.add(best_j)
            out[i] = (best_j, False)
        else:
            out[i] = (None, any(s is None for s in row))
    return out


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthObject],
    sim: SimilarityFn,
    threshold: float,
) -> list[MatchOutcome]:
    """Match one image's detections against its targets; results follow input order."""
    image_ids = {d.image_id for d in dets} | {g.image_id for g in gts}
    if len(image_ids) > 1:
        raise ValueError(f"mixed image ids in one matching call: {sorted(image_ids)}")
    rows = [[sim(d, g) for g in gts] for d in dets]
    pairs = _greedy_match(rows, [d.score for d in dets], threshold)
    return [MatchOutcome(d, j, ign) for d, (j, ign) in zip(dets, pairs)]


def _ap_fraction(tp_flags: Sequence[bool], n_gt: int, interpolation: Interpolation) -> Fraction:
    tp = fp = 0
    recalls: list[Fraction] = []
    precisions: list[Fraction] = []
    for flag in tp_flags:
        if flag:
            tp += 1
        else:
            fp += 1
        recalls.append(Fraction(tp, n_gt))
        precisions.append(Fraction(tp, tp + fp))
    if interpolation is Interpolation.ELEVEN_POINT:
        total = Fraction(0)
        for k in range(11):
            level = Fraction(k, 10)
            best = Fraction(0)
            for r, p in zip(recalls, precisions):
                if r >= level and p > best:
                    best = p
            total += best
        return total / 11
    mrec = [Fraction(0)] + recalls + [Fraction(1)]
    mpre = [Fraction(0)] + precisions + [Fraction(0)]
    for i in range(len(mpre) - 1, 0, -1):
        if mpre[i] > mpre[i - 1]:
            mpre[i - 1] = mpre[i]
    return sum(((mrec[i + 1] - mrec[i]) * mpre[i + 1] for i in range(len(mrec) - 1)), Fraction(0))


def average_precision(
    labeled: Iterable[tuple[float, bool]],
    n_gt: int,
    interpolation: Interpolation = Interpolation.ALL_POINT,
) -> Optional[float]:
    """AP from (score, is_true_positive) pairs against n_gt scoreable targets.

    Sorting is stable by descending score, so callers control tie order by the order
    they hand the pairs in. Returns 0.0 when there are detections but no targets,
    and None (excluded from averages) when there is nothing at all to score.
    """
    pairs = list(labeled)
    if n_gt < 0:
        raise ValueError("n_gt must be >= 0")
    if n_gt == 0:
        return 0.0 if pairs else None
    order = sorted(range(len(pairs)), key=lambda i: -pairs[i][0])
    flags = [bool(pairs[i][1]) for i in order]
    return float(_ap_fraction(flags, n_gt, interpolation))


def _subset_visible(gt: GroundTruthObject, subset: SubsetSpec) -> bool:
    """Mirrors similarity definedness: the target is scoreable for the subset."""
    pl = gt.polyline
    for required in subset.required_slots:
        if required >= pl.slot_count or pl.chain_index(required) is None:
            return False
    for slot in subset.indices:
        if slot >= pl.slot_count:
            continue
        kp = pl.keypoint_at_slot(slot)
        if kp is not None and kp.visible:
            return True
    return False


def _group_by_image(
    gts: Sequence[GroundTruthObject], dets: Sequence[Detection]
) -> list[tuple[str, list[GroundTruthObject], list[Detection]]]:
    gt_map: dict[str, list[GroundTruthObject]] = {}
    det_map: dict[str, list[Detection]] = {}
    for g in gts:
        gt_map.setdefault(g.image_id, []).append(g)
    for d in dets:
        det_map.setdefault(d.image_id, []).append(d)
    ids = sorted(set(gt_map) | set(det_map))
    return [(i, gt_map.get(i, []), det_map.get(i, [])) for i in ids]


def _compute_rows(
    groups: Sequence[tuple[str, list[GroundTruthObject], list[Detection]]],
    row_fn: Callable[[list[Detection], list[GroundTruthObject]], list[list[Optional[float]]]],
    workers: int,
) -> list[list[list[Optional[float]]]]:
    """Per-image similarity matrices; worker fan-out never changes the merge order."""
    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda g: row_fn(g[2], g[1]), groups))
    return [row_fn(g[2], g[1]) for g in groups]


def _threshold_aps(
    groups: Sequence[tuple[str, list[GroundTruthObject], list[Detection]]],
    rows_per_image: Sequence[list[list[Optional[float]]]],
    n_gt: int,
    thresholds: Sequence[float],
    interpolation: Interpolation,
) -> dict[float, Optional[float]]:
    aps: dict[float, Optional[float]] = {}
    for thr in thresholds:
        labeled: list[tuple[float, bool]] = []
        for (image_id, gts, dets), rows in zip(groups, rows_per_image):
            pairs = _greedy_match(rows, [d.score for d in dets], thr)
            for det, (j, ignored) in zip(dets, pairs):
                if not ignored:
                    labeled.append((det.score, j is not None))
        aps[thr] = average_precision(labeled, n_gt, interpolation)
    return aps


def _mean_defined(values: Iterable[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return sum(present) / len(present)


def _keypoint_rows_fn(
    subset: SubsetSpec, params: OksParams, projected: bool, scale_of: Callable[[GroundTruthObject], float]
) -> Callable[[list[Detection], list[GroundTruthObject]], list[list[Optional[float]]]]:
    score = poks if projected else oks

    def rows(dets: list[Detection], gts: list[GroundTruthObject]) -> list[list[Optional[float]]]:
        kp_dets = [d for d in dets if d.polyline_pred is not None]
        return [
            [score(d.polyline_pred, g.polyline, subset, params, scale_of(g)) for g in gts]
            for d in kp_dets
        ]

    return rows


def _keypoint_groups(
    groups: Sequence[tuple[str, list[GroundTruthObject], list[Detection]]]
) -> list[tuple[str, list[GroundTruthObject], list[Detection]]]:
    return [(i, g, [d for d in dets if d.polyline_pred is not None]) for i, g, dets in groups]


def map_and_table(
    gts: Sequence[GroundTruthObject],
    dets: Sequence[Detection],
    similarity: str,
    subset: SubsetSpec,
    config: EvalConfig,
    workers: int = 1,
) -> tuple[Optional[float], dict[float, Optional[float]]]:
    """Mean AP over the configured thresholds plus the per-threshold table."""
    if similarity not in ("oks", "poks"):
        raise ValueError(f"similarity must be 'oks' or 'poks', got {similarity!r}")
    if not config.thresholds:
        raise ValueError("threshold list is empty")
    params = config.oks_params
    scale_cache: dict[int, float] = {}

    def scale_of(g: GroundTruthObject) -> float:
        key = id(g)
        if key not in scale_cache:
            scale_cache[key] = object_scale(g.polyline, g.obb, params)
        return scale_cache[key]

    for g in gts:
        scale_of(g)  # precompute once, before any thread fan-out

    groups = _group_by_image(gts, dets)
    rows_fn = _keypoint_rows_fn(subset, params, similarity == "poks", scale_of)
    rows_per_image = _compute_rows(groups, rows_fn, workers)
    kp_groups = _keypoint_groups(groups)
    n_gt = sum(1 for g in gts if _subset_visible(g, subset))
    aps = _threshold_aps(kp_groups, rows_per_image, n_gt, config.thresholds, config.voc_interpolation)
    return _mean_defined(aps.values()), aps


def map_over_thresholds(
    gts: Sequence[GroundTruthObject],
    dets: Sequence[Detection],
    similarity: str,
    subset: SubsetSpec = SUBSET_ALL,
    config: EvalConfig = EvalConfig(),
    workers: int = 1,
) -> Optional[float]:
    """mAP over the threshold sweep for the chosen keypoint similarity and subset."""
    value, _ = map_and_table(gts, dets, similarity, subset, config, workers)
    return value


def _obb_ap_table(
    gts: Sequence[GroundTruthObject],
    dets: Sequence[Detection],
    config: EvalConfig,
    workers: int,
) -> dict[float, Optional[float]]:
    def rows(dets_i: list[Detection], gts_i: list[GroundTruthObject]) -> list[list[Optional[float]]]:
        box_dets = [d for d in dets_i if d.obb_pred is not None]
        return [
            [None if g.obb is None else rotated_iou(d.obb_pred, g.obb) for g in gts_i]
            for d in box_dets
        ]

    groups = _group_by_image(gts, dets)
    rows_per_image = _compute_rows(groups, rows, workers)
    box_groups = [(i, g, [d for d in dets_i if d.obb_pred is not None]) for i, g, dets_i in groups]
    n_gt = sum(1 for g in gts if g.obb is not None)
    return _threshold_aps(
        box_groups, rows_per_image, n_gt, [config.obb_iou_threshold], config.voc_interpolation
    )


def obb_map50(
    gts: Sequence[GroundTruthObject],
    dets: Sequence[Detection],
    config: EvalConfig = EvalConfig(),
    workers: int = 1,
) -> Optional[float]:
    """VOC AP for oriented boxes at the configured rotated-IoU threshold."""
    return _obb_ap_table(gts, dets, config, workers)[config.obb_iou_threshold]


@dataclass
class EvalReport:
    """Dataset-level results: keypoint mAPs per subset, plain-OKS mAP, box AP, counts."""

    map_poks: dict[str, Optional[float]] = field(default_factory=dict)
    map_oks: Optional[float] = None
    map50_obb: Optional[float] = None
    ap_poks: dict[str, dict[str, Optional[float]]] = field(default_factory=dict)
    ap_oks: dict[str, Optional[float]] = field(default_factory=dict)
    ap_obb: dict[str, Optional[float]] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "map_poks": dict(self.map_poks),
            "map_oks": self.map_oks,
            "map50_obb": self.map50_obb,
            "ap": {
                "poks": {k: dict(v) for k, v in self.ap_poks.items()},
                "oks": dict(self.ap_oks),
                "obb": dict(self.ap_obb),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        ap = d.get("ap", {})
        return cls(
            map_poks=dict(d.get("map_poks", {})),
            map_oks=d.get("map_oks"),
            map50_obb=d.get("map50_obb"),
            ap_poks={k: dict(v) for k, v in ap.get("poks", {}).items()},
            ap_oks=dict(ap.get("oks", {})),
            ap_obb=dict(ap.get("obb", {})),
            counts=dict(d.get("counts", {})),
        )


def _thr_key(t: float) -> str:
    return f"{t:.2f}"


def evaluate_dataset(
    gts: Sequence[GroundTruthObject],
    dets: Sequence[Detection],
    config: EvalConfig = EvalConfig(),
    workers: int = 1,
    image_count: Optional[int] = None,
) -> EvalReport:
    """Full evaluation: keypoint mAP per subset (projected and plain) plus box AP."""
    gt_ids = {g.image_id for g in gts}
    unknown = sorted({d.image_id for d in dets} - gt_ids)
    if unknown:
        raise ValueError(f"predictions reference unknown image ids: {unknown}")

    report = EvalReport(
        counts={
            "images": len(gt_ids) if image_count is None else image_count,
            "gt_objects": len(gts),
            "detections": len(dets),
        }
    )
    for subset in config.subsets:
        value, table = map_and_table(gts, dets, "poks", subset, config, workers)
        report.map_poks[subset.name] = value
        report.ap_poks[subset.name] = {_thr_key(t): v for t, v in table.items()}
    oks_value, oks_table = map_and_table(gts, dets, "oks", SUBSET_ALL, config, workers)
    report.map_oks = oks_value
    report.ap_oks = {_thr_key(t): v for t, v in oks_table.items()}
    obb_table = _obb_ap_table(gts, dets, config, workers)
    report.map50_obb = obb_table[config.obb_iou_threshold]
    report.ap_obb = {_thr_key(t): v for t, v in obb_table.items()}
    return report


def _fmt(v: Optional[float]) -> str:
    return "n/a" if v is None else f"{v:.3f}"


def format_report_lines(report: EvalReport) -> list[str]:
    subsets = " ".join(f"{name}={_fmt(v)}" for name, v in report.map_poks.items())
    return [
        f"POKS mAP@[.50:.95]: {subsets}",
        f"OKS  mAP@[.50:.95]: all={_fmt(report.map_oks)}",
        f"OBB  mAP@50: {_fmt(report.map50_obb)}",
    ]


def eval_config_from_mapping(mapping: Optional[dict]) -> EvalConfig:
    """Build an EvalConfig from a plain mapping (the CLI config-file schema)."""
    if not mapping:
        return EvalConfig()
    known = {
        "thresholds", "subsets", "sigmas", "sigma_true", "sigma_pseudo",
        "scale_mode", "scale_floor", "obb_iou_threshold", "voc_interpolation",
    }
    unknown = set(mapping) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "sigmas" in mapping and mapping["sigmas"] is not None:
        sigmas = tuple(float(s) for s in mapping["sigmas"])
    else:
        sigmas = default_sigmas(
            float(mapping.get("sigma_true", 0.05)),
            float(mapping.get("sigma_pseudo", 0.10)),
        )
    params = OksParams(
        sigmas=sigmas,
        scale_mode=ScaleMode(mapping.get("scale_mode", "obb_area")),
        scale_floor=float(mapping.get("scale_floor", 16.0)),
    )
    subsets = tuple(SUBSETS[name] for name in mapping.get("subsets", list(SUBSETS)))
    return EvalConfig(
        thresholds=tuple(float(t) for t in mapping.get("thresholds", DEFAULT_THRESHOLDS)),
        subsets=subsets,
        oks_params=params,
        obb_iou_threshold=float(mapping.get("obb_iou_threshold", 0.5)),
        voc_interpolation=Interpolation(mapping.get("voc_interpolation", "all_point")),
    )
