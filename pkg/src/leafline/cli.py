"""Command-line front door: evaluate, encode, render, stats, split, selftest."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import codec, dataio, heatmaps
from .evaluation import (
    average_precision,
    eval_config_from_mapping,
    evaluate_dataset,
    format_report_lines,
)
from .geometry import GeometryError, OrientedBox, Point2, rotated_iou
from .polylines import GuidedPolyline, Role, min_projection_distance


def _load_config_mapping(args) -> dict:
    mapping: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as f:
            mapping = json.load(f)
    if getattr(args, "sigma_true", None) is not None or getattr(args, "sigma_pseudo", None) is not None:
        mapping.pop("sigmas", None)
        if args.sigma_true is not None:
            mapping["sigma_true"] = args.sigma_true
        if args.sigma_pseudo is not None:
            mapping["sigma_pseudo"] = args.sigma_pseudo
    if getattr(args, "voc_11pt", False):
        mapping["voc_interpolation"] = "eleven_point"
    return mapping


def cmd_evaluate(args) -> int:
    images, annotations = dataio.load_annotations(args.gt)
    gts = dataio.build_ground_truths(annotations)
    dets = dataio.load_predictions(args.pred)
    config = eval_config_from_mapping(_load_config_mapping(args))
    report = evaluate_dataset(gts, dets, config, workers=args.workers, image_count=len(images))
    dataio.write_report(report, args.out, fmt=args.format)
    for line in format_report_lines(report):
        print(line)
    return 0


def _default_box(ann: dataio.LeafAnnotation) -> OrientedBox:
    return codec.derive_obb(ann.polyline, ann.blade_polygon)


def cmd_encode(args) -> int:
    import numpy as np

    images, annotations = dataio.load_annotations(args.gt)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = codec.CenterSpec(codec.CenterMode(args.center))
    mode = codec.ObbParamMode(args.obb_params)
    by_image: dict[str, list[dataio.LeafAnnotation]] = {}
    for a in annotations:
        by_image.setdefault(a.image_id, []).append(a)
    total, total_skipped = 0, 0
    for rec in images:
        samples = []
        dense_rows = []
        skipped = 0
        for ann in by_image.get(rec.image_id, []):
            try:
                sample = codec.encode_sample(ann.polyline, ann.blade_polygon, spec, args.r, mode)
            except ValueError:
                skipped += 1
                continue
            obb_t = sample.obb_target
            samples.append(
                {
                    "downscale_r": sample.downscale_r,
                    "center_cell": list(sample.center_cell),
                    "offset": list(sample.offset),
                    "polar": [
                        None if t is None else {"d": t.d, "cos": t.cos_a, "sin": t.sin_a}
                        for t in sample.polar_targets
                    ],
                    "obb": {
                        "w_tl": obb_t.w_tl, "w_br": obb_t.w_br,
                        "h_tl": obb_t.h_tl, "h_br": obb_t.h_br,
                        "cos_b": obb_t.cos_b, "sin_b": obb_t.sin_b,
                        "mode": obb_t.param_mode.value,
                    },
                }
            )
            dense_rows.append(
                [
                    [t.d, t.cos_a, t.sin_a, 1.0] if t is not None else [0.0, 1.0, 0.0, 0.0]
                    for t in sample.polar_targets
                ]
            )
        dataio.dump_json(
            {"image_id": rec.image_id, "samples": samples, "skipped": skipped},
            out_dir / f"{rec.image_id}.json",
        )
        dataio.write_tensor(
            np.asarray(dense_rows, dtype=np.float32).reshape(len(dense_rows), 8, 4),
            out_dir / f"{rec.image_id}.targets.f32",
        )
        total += len(samples)
        total_skipped += skipped
    print(f"encoded {total} objects across {len(images)} images ({total_skipped} skipped)")
    return 0


def cmd_render(args) -> int:
    images, annotations = dataio.load_annotations(args.gt)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.adaptive:
        spec = heatmaps.GaussianSpec(sigma=None, size_adaptive=True, min_radius=args.min_radius)
    else:
        spec = heatmaps.GaussianSpec(sigma=args.sigma)
    by_image: dict[str, list[dataio.LeafAnnotation]] = {}
    for a in annotations:
        by_image.setdefault(a.image_id, []).append(a)
    for rec in images:
        shape = (math.ceil(rec.height / args.r), math.ceil(rec.width / args.r))
        anns = by_image.get(rec.image_id, [])
        if args.type == "center":
            objects = []
            for ann in anns:
                box = _default_box(ann)
                objects.append((codec.select_center(ann.polyline, box, codec.CenterSpec()), box))
            hm = heatmaps.render_center_heatmap(objects, shape, spec, args.r)
        elif args.type == "p":
            hm = heatmaps.render_p_heatmap([a.polyline for a in anns], shape, spec, args.r)
        else:
            hm = heatmaps.render_s_heatmap([a.polyline for a in anns], shape, spec, args.r)
        dataio.write_tensor(hm.values, out_dir / f"{rec.image_id}.{args.type}.f32")
    print(f"rendered {len(images)} {args.type} heatmaps to {out_dir}")
    return 0


def cmd_stats(args) -> int:
    images, annotations = dataio.load_annotations(args.gt)
    stats = dataio.dataset_stats(images, annotations)
    print(f"images: {stats.n_images}")
    print(f"leaves: {stats.n_leaves}")
    print(f"stem visible: {stats.stem_visible_fraction:.1%}")
    for source, counts in sorted(stats.per_source.items()):
        print(f"{source}: {counts['images']} images, {counts['leaves']} leaves")
    return 0


def cmd_split(args) -> int:
    images, _ = dataio.load_annotations(args.gt)
    ratios = tuple(float(v) for v in args.ratios.split(","))
    train, val, test = dataio.split_dataset([r.image_id for r in images], ratios, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, ids in (("train", train), ("val", val), ("test", test)):
        (out_dir / f"{name}.txt").write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")
    print(f"split {len(train)}/{len(val)}/{len(test)} ids into {out_dir}")
    return 0


def cmd_import_coco(args) -> int:
    images, annotations = dataio.import_coco_keypoints(args.src, dataio.Source(args.source))
    dataio.write_annotations(images, annotations, args.out)
    print(f"imported {len(images)} images / {len(annotations)} annotations to {args.out}")
    return 0


def _selftest_checks():
    import numpy as np

    square = OrientedBox(Point2(0.0, 0.0), 0.5, 0.5, 0.5, 0.5, 0.0)
    rotated = OrientedBox(Point2(0.0, 0.0), 0.5, 0.5, 0.5, 0.5, 45.0)
    yield "rotated-iou octagon", abs(rotated_iou(square, rotated) - 1.0 / math.sqrt(2.0)) < 1e-9

    pl = GuidedPolyline.chain([(100.0, 100.0), (103.0, 104.0)], [Role.TRUE, Role.TRUE])
    targets = codec.encode_keypoints(pl, (100.0, 100.0), 1)
    decoded = codec.decode_keypoints(targets, (100.0, 100.0), 1)
    ok = (
        abs(targets[1].d - 5.0) < 1e-12
        and abs(targets[1].cos_a - 0.6) < 1e-12
        and abs(targets[1].sin_a - 0.8) < 1e-12
        and abs(decoded[1].x - 103.0) < 1e-9
        and abs(decoded[1].y - 104.0) < 1e-9
    )
    yield "polar 3-4-5 roundtrip", ok

    cell, offset = codec.encode_offset((101.0, 100.0), 4)
    back = codec.decode_offset(cell, offset, 4)
    yield "offset roundtrip", cell == (25, 25) and offset == (0.25, 0.0) and (back.x, back.y) == (101.0, 100.0)

    ap = average_precision([(0.9, False), (0.4, True)], n_gt=1)
    yield "average precision 0.5", ap == 0.5

    loss = heatmaps.focal_loss(np.array([[[0.5]]]), np.array([[[1.0]]]))
    yield "focal loss closed form", abs(loss - 0.25 * math.log(2.0)) < 1e-12

    chain = GuidedPolyline.chain(
        [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0)], [Role.TRUE, Role.PSEUDO, Role.TRUE]
    )
    yield "segment projection", abs(min_projection_distance((3.0, 1.0), chain, 1) - 1.0) < 1e-12


def cmd_selftest(args) -> int:
    failures = 0
    for name, ok in _selftest_checks():
        print(f"{'ok' if ok else 'FAIL'}: {name}")
        failures += 0 if ok else 1
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leafline",
        description="Evaluate and encode keypoint-guided leaf polylines and oriented boxes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score predictions against annotations")
    p.add_argument("--gt", required=True, help="annotation JSON")
    p.add_argument("--pred", required=True, help="prediction JSON")
    p.add_argument("--out", required=True, help="report output path")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--config", help="JSON config file (see README)")
    p.add_argument("--sigma-true", dest="sigma_true", type=float, help="sigma for true keypoints")
    p.add_argument("--sigma-pseudo", dest="sigma_pseudo", type=float, help="sigma for pseudo keypoints")
    p.add_argument("--voc-11pt", dest="voc_11pt", action="store_true", help="11-point AP interpolation")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("encode", help="write dense regression targets per image")
    p.add_argument("--gt", required=True)
    p.add_argument("--center", choices=[m.value for m in codec.CenterMode], default="basal")
    p.add_argument("--r", type=int, default=4, help="downscale ratio")
    p.add_argument("--obb-params", dest="obb_params", type=int, choices=[3, 5], default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("render", help="write target heatmaps per image")
    p.add_argument("--gt", required=True)
    p.add_argument("--type", choices=["center", "p", "s"], required=True)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--adaptive", action="store_true", help="size-adaptive sigma")
    p.add_argument("--min-radius", dest="min_radius", type=float, default=1.0)
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--gt", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="write train/val/test id lists")
    p.add_argument("--gt", required=True)
    p.add_argument("--ratios", default="0.7,0.15,0.15")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("import-coco", help="convert a COCO-keypoints-style file")
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source", choices=[s.value for s in dataio.Source], default="inaturalist")
    p.set_defaults(func=cmd_import_coco)

    p = sub.add_parser("selftest", help="run embedded analytic sanity checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except dataio.SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
