"""Canonical file formats (annotations, predictions, reports, raw tensors) and splits.

Annotation schema (JSON, UTF-8):

    {"images": [{"id", "width", "height", "source", "file_name", ...}],
     "annotations": [{"image_id", "keypoints": [x, y, v, ...], "blade_polygon": [x, y, ...], ...}]}

Keypoints are flat (x, y, v) triplets with v in {0: absent, 1: visible}; a leaf has
8 triplets when the stem is annotated and 5 when only the vein is. Unknown fields
(robot depth/odometry payloads and the like) are preserved opaquely on roundtrip.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .evaluation import Detection, EvalReport, GroundTruthObject
from .geometry import GeometryError, OrientedBox, Point2
from .polylines import GuidedPolyline

IMAGE_KEYS = {"id", "width", "height", "source", "file_name"}
ANNOTATION_KEYS = {"image_id", "keypoints", "blade_polygon"}
PREDICTION_KEYS = {"image_id", "score", "keypoints", "obb"}


class SchemaError(ValueError):
    """Validation failure, carrying the JSON path of the offending value."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class Source(enum.Enum):
    INATURALIST = "inaturalist"
    ROBORUMEX = "roborumex"


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    width: int
    height: int
    source: Source
    file_name: str
    extras: tuple[tuple[str, object], ...] = ()


@dataclass(frozen=True)
class LeafAnnotation:
    image_id: str
    blade_polygon: tuple[Point2, ...]
    polyline: GuidedPolyline
    stem_visible: bool
    extras: tuple[tuple[str, object], ...] = ()


@dataclass
class DatasetStats:
    n_images: int
    n_leaves: int
    stem_visible_fraction: float
    per_source: dict[str, dict[str, int]] = field(default_factory=dict)


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaError(path, f"expected a finite number, got {value!r}")
    return float(value)


def _flat_points(values, path: str) -> list[Point2]:
    if not isinstance(values, list) or len(values) % 2 != 0:
        raise SchemaError(path, "expected a flat [x, y, ...] list of even length")
    return [
        Point2(_number(values[i], f"{path}[{i}]"), _number(values[i + 1], f"{path}[{i + 1}]"))
        for i in range(0, len(values), 2)
    ]


def _parse_image(obj: dict, path: str) -> ImageRecord:
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    image_id = str(_require(obj, "id", path))
    width = _require(obj, "width", path)
    height = _require(obj, "height", path)
    for name, v in (("width", width), ("height", height)):
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise SchemaError(f"{path}.{name}", f"expected a positive integer, got {v!r}")
    source_raw = _require(obj, "source", path)
    try:
        source = Source(source_raw)
    except ValueError:
        raise SchemaError(f"{path}.source", f"unknown source {source_raw!r}") from None
    file_name = str(_require(obj, "file_name", path))
    extras = tuple(sorted((k, v) for k, v in obj.items() if k not in IMAGE_KEYS))
    return ImageRecord(image_id, width, height, source, file_name, extras)


def _parse_annotation(obj: dict, path: str, images: dict[str, ImageRecord]) -> LeafAnnotation:
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    image_id = str(_require(obj, "image_id", path))
    if image_id not in images:
        raise SchemaError(f"{path}.image_id", f"unknown image id {image_id!r}")
    kp_raw = _require(obj, "keypoints", path)
    if not isinstance(kp_raw, list) or len(kp_raw) % 3 != 0:
        raise SchemaError(f"{path}.keypoints", "expected flat [x, y, v, ...] triplets")
    n_kp = len(kp_raw) // 3
    if n_kp not in (5, 8):
        raise SchemaError(
            f"{path}.keypoints",
            f"a leaf chain has 8 keypoints (stem annotated) or 5 (vein only), got {n_kp}",
        )
    points: list[Point2] = []
    visible: list[bool] = []
    for i in range(n_kp):
        x = _number(kp_raw[3 * i], f"{path}.keypoints[{3 * i}]")
        y = _number(kp_raw[3 * i + 1], f"{path}.keypoints[{3 * i + 1}]")
        v = kp_raw[3 * i + 2]
        if v not in (0, 1):
            raise SchemaError(f"{path}.keypoints[{3 * i + 2}]", f"visibility flag must be 0 or 1, got {v!r}")
        points.append(Point2(x, y))
        visible.append(v == 1)
    if not any(visible):
        raise SchemaError(f"{path}.keypoints", "at least one keypoint must be visible")
    try:
        if n_kp == 8:
            polyline = GuidedPolyline.full8(points, visible)
        else:
            polyline = GuidedPolyline.vein5(points, visible)
    except GeometryError as exc:
        raise SchemaError(f"{path}.keypoints", str(exc)) from None

    polygon_raw = obj.get("blade_polygon", [])
    polygon = tuple(_flat_points(polygon_raw, f"{path}.blade_polygon"))
    image = images[image_id]
    for i, p in enumerate(polygon):
        if not (0.0 <= p.x <= image.width and 0.0 <= p.y <= image.height):
            raise SchemaError(f"{path}.blade_polygon[{2 * i}]", f"vertex ({p.x}, {p.y}) outside image bounds")
    extras = tuple(sorted((k, v) for k, v in obj.items() if k not in ANNOTATION_KEYS))
    return LeafAnnotation(image_id, polygon, polyline, stem_visible=(n_kp == 8), extras=extras)


def load_annotations(path: str | Path) -> tuple[list[ImageRecord], list[LeafAnnotation]]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise SchemaError("$", "top level must be an object")
    images_raw = _require(data, "images", "$")
    anns_raw = _require(data, "annotations", "$")
    if not isinstance(images_raw, list) or not isinstance(anns_raw, list):
        raise SchemaError("$", "'images' and 'annotations' must be arrays")
    images: dict[str, ImageRecord] = {}
    records = []
    for i, obj in enumerate(images_raw):
        rec = _parse_image(obj, f"images[{i}]")
        if rec.image_id in images:
            raise SchemaError(f"images[{i}].id", f"duplicate image id {rec.image_id!r}")
        images[rec.image_id] = rec
        records.append(rec)
    annotations = [_parse_annotation(obj, f"annotations[{i}]", images) for i, obj in enumerate(anns_raw)]
    return records, annotations


def write_annotations(
    images: Sequence[ImageRecord], annotations: Sequence[LeafAnnotation], path: str | Path
) -> None:
    data = {
        "images": [
            {
                "id": r.image_id,
                "width": r.width,
                "height": r.height,
                "source": r.source.value,
                "file_name": r.file_name,
                **dict(r.extras),
            }
            for r in images
        ],
        "annotations": [
            {
                "image_id": a.image_id,
                "keypoints": [
                    v for kp in a.polyline.keypoints for v in (kp.point.x, kp.point.y, 1 if kp.visible else 0)
                ],
                "blade_polygon": [v for p in a.blade_polygon for v in (p.x, p.y)],
                **dict(a.extras),
            }
            for a in annotations
        ],
    }
    dump_json(data, path)


def _parse_obb(values, path: str) -> OrientedBox:
    if not isinstance(values, list) or len(values) != 7:
        raise SchemaError(path, "expected [cx, cy, w_tl, w_br, h_tl, h_br, beta]")
    nums = [_number(v, f"{path}[{i}]") for i, v in enumerate(values)]
    try:
        return OrientedBox(Point2(nums[0], nums[1]), nums[2], nums[3], nums[4], nums[5], nums[6])
    except GeometryError as exc:
        raise SchemaError(path, str(exc)) from None


def load_predictions(path: str | Path) -> list[Detection]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict) or not isinstance(data.get("predictions"), list):
        raise SchemaError("$", "top level must be {'predictions': [...]}")
    out: list[Detection] = []
    for i, obj in enumerate(data["predictions"]):
        path_i = f"predictions[{i}]"
        if not isinstance(obj, dict):
            raise SchemaError(path_i, "expected an object")
        image_id = str(_require(obj, "image_id", path_i))
        score = _number(_require(obj, "score", path_i), f"{path_i}.score")
        if not 0.0 <= score <= 1.0:
            raise SchemaError(f"{path_i}.score", f"score must be in [0, 1], got {score}")
        kp_raw = obj.get("keypoints")
        polyline_pred = None
        if kp_raw is not None:
            if not isinstance(kp_raw, list) or len(kp_raw) != 8:
                raise SchemaError(f"{path_i}.keypoints", "expected 8 entries ([x, y] or null)")
            slots: list[Optional[Point2]] = []
            for j, entry in enumerate(kp_raw):
                if entry is None:
                    slots.append(None)
                elif isinstance(entry, list) and len(entry) == 2:
                    slots.append(
                        Point2(
                            _number(entry[0], f"{path_i}.keypoints[{j}][0]"),
                            _number(entry[1], f"{path_i}.keypoints[{j}][1]"),
                        )
                    )
                else:
                    raise SchemaError(f"{path_i}.keypoints[{j}]", "expected [x, y] or null")
            polyline_pred = tuple(slots)
        obb_raw = obj.get("obb")
        obb_pred = None if obb_raw is None else _parse_obb(obb_raw, f"{path_i}.obb")
        if polyline_pred is None and obb_pred is None:
            raise SchemaError(path_i, "prediction needs 'keypoints' or 'obb'")
        out.append(Detection(image_id, score, polyline_pred, obb_pred))
    return out


def write_predictions(dets: Sequence[Detection], path: str | Path) -> None:
    entries = []
    for d in dets:
        entry: dict = {"image_id": d.image_id, "score": d.score}
        if d.polyline_pred is not None:
            entry["keypoints"] = [None if p is None else [p.x, p.y] for p in d.polyline_pred]
        if d.obb_pred is not None:
            b = d.obb_pred
            entry["obb"] = [b.center.x, b.center.y, b.w_tl, b.w_br, b.h_tl, b.h_br, b.beta]
        entries.append(entry)
    dump_json({"predictions": entries}, path)


def dump_json(data, path: str | Path) -> None:
    """Stable JSON writer: sorted keys, 2-space indent, trailing newline."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, sort_keys=True, indent=2)
        f.write("\n")


def write_report(report: EvalReport, path: str | Path, fmt: str = "json") -> None:
    """Serialize a report; JSON is lossless and stable-ordered, CSV is a flat summary."""
    if fmt == "json":
        dump_json(report.to_dict(), path)
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["metric", "subset", "value"])
            for name, value in report.map_poks.items():
                w.writerow(["map_poks", name, "" if value is None else repr(value)])
            w.writerow(["map_oks", "all", "" if report.map_oks is None else repr(report.map_oks)])
            w.writerow(["map50_obb", "", "" if report.map50_obb is None else repr(report.map50_obb)])
            for name, value in sorted(report.counts.items()):
                w.writerow([f"count_{name}", "", value])
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_report(path: str | Path) -> EvalReport:
    with open(path, encoding="utf-8") as f:
        return EvalReport.from_dict(json.load(f))


def write_tensor(array: np.ndarray, path: str | Path) -> None:
    """Raw little-endian float32 payload with a JSON sidecar describing its shape."""
    arr = np.ascontiguousarray(np.asarray(array), dtype="<f4")
    path = Path(path)
    path.write_bytes(arr.tobytes(order="C"))
    sidecar = {
        "dtype": "f32",
        "shape": list(arr.shape),
        "order": "row-major",
        "byte_order": "little-endian",
    }
    dump_json(sidecar, path.with_name(path.name + ".json"))


def read_tensor(path: str | Path) -> np.ndarray:
    path = Path(path)
    with open(path.with_name(path.name + ".json"), encoding="utf-8") as f:
        sidecar = json.load(f)
    if sidecar.get("dtype") != "f32":
        raise SchemaError("$.dtype", f"unsupported dtype {sidecar.get('dtype')!r}")
    raw = path.read_bytes()
    arr = np.frombuffer(raw, dtype="<f4")
    return arr.reshape(sidecar["shape"]).copy()


def split_dataset(
    ids: Sequence[str], ratios: Sequence[float], seed: int
) -> tuple[list[str], list[str], list[str]]:
    """Random, exact three-way partition; sizes follow the largest-remainder rule
    (floor allocation first, leftover slots to the earliest splits with the largest
    fractional share)."""
    if len(ratios) != 3:
        raise ValueError("expected three split ratios")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)}")
    ids = list(ids)
    rng = random.Random(seed)
    rng.shuffle(ids)
    n = len(ids)
    exact = [r * n for r in ratios]
    sizes = [math.floor(e) for e in exact]
    leftovers = sorted(range(3), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in range(n - sum(sizes)):
        sizes[leftovers[i % 3]] += 1
    a, b = sizes[0], sizes[0] + sizes[1]
    return ids[:a], ids[a:b], ids[b:]


def dataset_stats(images: Sequence[ImageRecord], annotations: Sequence[LeafAnnotation]) -> DatasetStats:
    n_images = len(images)
    n_leaves = len(annotations)
    n_stem = sum(1 for a in annotations if a.stem_visible)
    by_image = {r.image_id: r.source.value for r in images}
    per_source: dict[str, dict[str, int]] = {
        s.value: {"images": 0, "leaves": 0} for s in Source
    }
    for r in images:
        per_source[r.source.value]["images"] += 1
    for a in annotations:
        per_source[by_image[a.image_id]]["leaves"] += 1
    fraction = n_stem / n_leaves if n_leaves else 0.0
    return DatasetStats(n_images, n_leaves, fraction, per_source)


def build_ground_truths(annotations: Sequence[LeafAnnotation]) -> list[GroundTruthObject]:
    """Evaluation-ready targets: each annotation gets its derived oriented box."""
    from .codec import derive_obb

    out = []
    for i, a in enumerate(annotations):
        try:
            obb = derive_obb(a.polyline, a.blade_polygon)
        except GeometryError as exc:
            raise SchemaError(f"annotations[{i}]", f"cannot derive a box: {exc}") from None
        out.append(GroundTruthObject(a.image_id, a.polyline, obb, a.blade_polygon))
    return out


def import_coco_keypoints(path: str | Path, source: Source = Source.INATURALIST) -> tuple[list[ImageRecord], list[LeafAnnotation]]:
    """Convert a COCO-keypoints-style file (integer ids, v in {0,1,2}, polygon
    segmentation) to the canonical schema. Isolates any upstream schema drift."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    images: dict[str, ImageRecord] = {}
    records = []
    for i, obj in enumerate(data.get("images", [])):
        rec = ImageRecord(
            image_id=str(_require(obj, "id", f"images[{i}]")),
            width=int(_require(obj, "width", f"images[{i}]")),
            height=int(_require(obj, "height", f"images[{i}]")),
            source=source,
            file_name=str(obj.get("file_name", "")),
        )
        images[rec.image_id] = rec
        records.append(rec)
    annotations = []
    for i, obj in enumerate(data.get("annotations", [])):
        path_i = f"annotations[{i}]"
        kps = _require(obj, "keypoints", path_i)
        triplets = [
            [kps[j], kps[j + 1], 1 if kps[j + 2] in (1, 2) else 0] for j in range(0, len(kps), 3)
        ]
        seg = obj.get("segmentation") or []
        polygon = seg[0] if seg and isinstance(seg[0], list) else []
        converted = {
            "image_id": str(_require(obj, "image_id", path_i)),
            "keypoints": [v for t in triplets for v in t],
            "blade_polygon": polygon,
        }
        annotations.append(_parse_annotation(converted, path_i, images))
    return records, annotations
