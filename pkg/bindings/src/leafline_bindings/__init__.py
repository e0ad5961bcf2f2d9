"""List-native facade over the leafline core for scripting-language training loops.

Every function here converts plain lists/tuples to the core's types, delegates,
and converts back; no metric or codec logic lives in this package. Outputs are
numerically identical to the core's (and, for `py_evaluate`, bit-identical to
the CLI's JSON report on the same inputs).
"""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

from leafline import (
    GuidedPolyline,
    OksParams,
    OrientedBox,
    Point2,
    Role,
    SUBSET_ALL,
    SubsetSpec,
    oks,
    poks,
)
from leafline.codec import (
    ObbParamMode,
    ObbTarget,
    PolarTarget,
    decode_keypoints,
    decode_obb,
    decode_offset,
    encode_keypoints,
    encode_obb,
    encode_offset,
)
from leafline.dataio import build_ground_truths, load_annotations, load_predictions
from leafline.evaluation import eval_config_from_mapping, evaluate_dataset
from leafline.polylines import FULL8_ROLES, VEIN5_ROLES

__all__ = [
    "py_oks",
    "py_poks",
    "py_evaluate",
    "py_encode_keypoints",
    "py_decode_keypoints",
    "py_encode_obb",
    "py_decode_obb",
    "py_encode_offset",
    "py_decode_offset",
]

_ROLES = {"true": Role.TRUE, "pseudo": Role.PSEUDO}


def _polyline(keypoints, roles, visibility) -> GuidedPolyline:
    if roles is None:
        if len(keypoints) == 8:
            return GuidedPolyline.full8(keypoints, visibility)
        if len(keypoints) == 5:
            return GuidedPolyline.vein5(keypoints, visibility)
        raise ValueError("roles are required unless the chain has 8 or 5 keypoints")
    if len(roles) != len(keypoints):
        raise ValueError(f"{len(keypoints)} keypoints but {len(roles)} roles")
    role_values = tuple(_ROLES[str(r).lower()] for r in roles)
    if role_values == FULL8_ROLES:
        return GuidedPolyline.full8(keypoints, visibility)
    if role_values == VEIN5_ROLES:
        return GuidedPolyline.vein5(keypoints, visibility)
    return GuidedPolyline.chain(keypoints, role_values, visibility)


def _params(sigmas) -> OksParams:
    if sigmas is None:
        return OksParams()
    return OksParams(sigmas=tuple(float(s) for s in sigmas))


def _subset(indices, polyline: GuidedPolyline) -> SubsetSpec:
    if indices is None:
        if polyline.slot_count == 8:
            return SUBSET_ALL
        return SubsetSpec("all", frozenset(range(polyline.slot_count)))
    return SubsetSpec("custom", frozenset(int(i) for i in indices))


def py_oks(
    pred_keypoints: Sequence[Optional[Sequence[float]]],
    gt_keypoints: Sequence[Sequence[float]],
    roles: Optional[Sequence[str]] = None,
    visibility: Optional[Sequence[bool]] = None,
    sigmas: Optional[Sequence[float]] = None,
    scale: float = 1.0,
    subset_indices: Optional[Sequence[int]] = None,
) -> Optional[float]:
    """Plain object keypoint similarity; None when nothing is scoreable."""
    gt = _polyline(gt_keypoints, roles, visibility)
    return oks(pred_keypoints, gt, _subset(subset_indices, gt), _params(sigmas), scale)


def py_poks(
    pred_keypoints: Sequence[Optional[Sequence[float]]],
    gt_keypoints: Sequence[Sequence[float]],
    roles: Optional[Sequence[str]] = None,
    visibility: Optional[Sequence[bool]] = None,
    sigmas: Optional[Sequence[float]] = None,
    scale: float = 1.0,
    subset_indices: Optional[Sequence[int]] = None,
) -> Optional[float]:
    """Projected keypoint similarity: pseudo keypoints scored against their
    projection on the target's neighbor segments."""
    gt = _polyline(gt_keypoints, roles, visibility)
    return poks(pred_keypoints, gt, _subset(subset_indices, gt), _params(sigmas), scale)


def py_evaluate(
    gt_path: str,
    pred_path: str,
    config_mapping: Optional[Mapping] = None,
    workers: int = 1,
) -> dict:
    """Full-dataset evaluation; returns the report as nested plain mappings,
    equal to the CLI's JSON output parsed, for identical inputs and config."""
    images, annotations = load_annotations(gt_path)
    gts = build_ground_truths(annotations)
    dets = load_predictions(pred_path)
    config = eval_config_from_mapping(dict(config_mapping) if config_mapping else None)
    report = evaluate_dataset(gts, dets, config, workers=workers, image_count=len(images))
    return report.to_dict()


def py_encode_keypoints(
    keypoints: Sequence[Optional[Sequence[float]]],
    visibility: Optional[Sequence[bool]],
    center: Sequence[float],
    r: int,
    roles: Optional[Sequence[str]] = None,
) -> list[Optional[list[float]]]:
    """Polar targets per slot as [distance, cos, sin] lists (None where absent)."""
    points = [(0.0, 0.0) if k is None else k for k in keypoints]
    vis = list(visibility) if visibility is not None else [k is not None for k in keypoints]
    pl = _polyline(points, roles, vis)
    targets = encode_keypoints(pl, tuple(center), r)
    return [None if t is None else [t.d, t.cos_a, t.sin_a] for t in targets]


def py_decode_keypoints(
    targets: Sequence[Optional[Sequence[float]]],
    center: Sequence[float],
    r: int,
) -> list[Optional[list[float]]]:
    parsed = [None if t is None else PolarTarget(float(t[0]), float(t[1]), float(t[2])) for t in targets]
    points = decode_keypoints(parsed, tuple(center), r)
    return [None if p is None else [p.x, p.y] for p in points]


def py_encode_obb(
    center: Sequence[float],
    w_tl: float,
    w_br: float,
    h_tl: float,
    h_br: float,
    beta: float,
    mode: int = 5,
    r: int = 1,
) -> dict:
    box = OrientedBox(Point2(*center), w_tl, w_br, h_tl, h_br, beta)
    t = encode_obb(box, ObbParamMode(mode), r)
    return {
        "w_tl": t.w_tl, "w_br": t.w_br, "h_tl": t.h_tl, "h_br": t.h_br,
        "cos_b": t.cos_b, "sin_b": t.sin_b, "mode": t.param_mode.value,
    }


def py_decode_obb(target: Mapping, center: Sequence[float], r: int = 1) -> dict:
    t = ObbTarget(
        float(target["w_tl"]), float(target["w_br"]),
        float(target["h_tl"]), float(target["h_br"]),
        float(target["cos_b"]), float(target["sin_b"]),
        ObbParamMode(int(target.get("mode", 5))),
    )
    box = decode_obb(t, tuple(center), r)
    return {
        "cx": box.center.x, "cy": box.center.y,
        "w_tl": box.w_tl, "w_br": box.w_br, "h_tl": box.h_tl, "h_br": box.h_br,
        "beta": box.beta,
    }


def py_encode_offset(point: Sequence[float], r: int) -> tuple[list[int], list[float]]:
    cell, offset = encode_offset(tuple(point), r)
    return [cell[0], cell[1]], [offset[0], offset[1]]


def py_decode_offset(cell: Sequence[int], offset: Sequence[float], r: int) -> list[float]:
    p = decode_offset((int(cell[0]), int(cell[1])), (float(offset[0]), float(offset[1])), r)
    return [p.x, p.y]
