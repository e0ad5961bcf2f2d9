"""Regenerate the golden micro-dataset fixtures under tests/fixtures/.

Three images, seven leaves (mixed stem/vein-only), hand-tuned prediction
perturbations covering clean hits, partial hits, a miss and a pure false
positive. The golden report is whatever `leafline evaluate` produces for them;
the acceptance suite re-derives its AP values with the brute-force oracle, so
regenerating after an intentional metric change is safe.

Usage: python scripts/make_golden.py
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"


def leaf(basal, angle_deg, vein_len, stem_len, half_width, curve=0.15):
    """Keypoint triplets plus a blade polygon for one synthetic leaf."""
    rad = math.radians(angle_deg)
    u = (math.cos(rad), math.sin(rad))
    n = (-u[1], u[0])

    def at(t_along, t_perp=0.0):
        return (
            basal[0] + u[0] * t_along + n[0] * t_perp,
            basal[1] + u[1] * t_along + n[1] * t_perp,
        )

    vein = [
        at(0.0),
        at(0.28 * vein_len, curve * half_width),
        at(0.55 * vein_len, curve * half_width * 0.6),
        at(0.80 * vein_len, -curve * half_width * 0.4),
        at(vein_len),
    ]
    points = list(vein)
    if stem_len > 0:
        stem = [at(-stem_len), at(-0.62 * stem_len, -0.1 * half_width), at(-0.30 * stem_len)]
        points = stem + vein
    blade = [
        at(-0.05 * vein_len),
        at(0.30 * vein_len, half_width),
        at(0.72 * vein_len, 0.85 * half_width),
        at(1.05 * vein_len),
        at(0.72 * vein_len, -0.85 * half_width),
        at(0.30 * vein_len, -half_width),
    ]
    keypoints = [v for p in points for v in (p[0], p[1], 1)]
    polygon = [v for p in blade for v in p]
    return keypoints, polygon


def perturb(keypoints, rng, sigma_px, drop_slots=()):
    """Prediction keypoints: noisy copies of the target, with 8 slots always."""
    triplets = [keypoints[i:i + 3] for i in range(0, len(keypoints), 3)]
    if len(triplets) == 5:
        slots = [None] * 3 + triplets
    else:
        slots = triplets
    out = []
    for i, t in enumerate(slots):
        if t is None or i in drop_slots or t[2] == 0:
            out.append(None)
        else:
            out.append([t[0] + rng.normal(0, sigma_px), t[1] + rng.normal(0, sigma_px)])
    return out


def perturbed_obb(ann_keypoints, polygon, rng, angle_jitter, scale_jitter, shift):
    from leafline.codec import derive_obb
    from leafline import GuidedPolyline

    triplets = [ann_keypoints[i:i + 3] for i in range(0, len(ann_keypoints), 3)]
    pts = [(t[0], t[1]) for t in triplets]
    vis = [bool(t[2]) for t in triplets]
    pl = GuidedPolyline.full8(pts, vis) if len(pts) == 8 else GuidedPolyline.vein5(pts, vis)
    poly_pts = [(polygon[i], polygon[i + 1]) for i in range(0, len(polygon), 2)]
    box = derive_obb(pl, poly_pts)
    s = 1.0 + rng.uniform(-scale_jitter, scale_jitter)
    return [
        box.center.x + rng.uniform(-shift, shift),
        box.center.y + rng.uniform(-shift, shift),
        box.w_tl * s, box.w_br * s, box.h_tl * s, box.h_br * s,
        (box.beta + rng.uniform(-angle_jitter, angle_jitter)) % 360.0,
    ]


def main() -> int:
    sys.path.insert(0, str(ROOT / "src"))
    rng = np.random.default_rng(20230831)

    images = [
        {"id": "meadow_01", "width": 640, "height": 480, "source": "inaturalist",
         "file_name": "meadow_01.jpg"},
        {"id": "meadow_02", "width": 512, "height": 512, "source": "roborumex",
         "file_name": "meadow_02.png", "depth_map": "meadow_02_depth.png",
         "odometry": {"x": 3.25, "y": -1.5, "yaw": 0.41}},
        {"id": "meadow_03", "width": 800, "height": 600, "source": "inaturalist",
         "file_name": "meadow_03.jpg"},
    ]
    leaves = [
        ("meadow_01", leaf((200, 240), 15.0, 180, 70, 40)),
        ("meadow_01", leaf((420, 120), 115.0, 150, 0, 35)),
        ("meadow_01", leaf((320, 360), 250.0, 120, 55, 30)),
        ("meadow_02", leaf((150, 300), 305.0, 160, 60, 38)),
        ("meadow_02", leaf((330, 160), 80.0, 140, 0, 32)),
        ("meadow_03", leaf((250, 250), 40.0, 220, 90, 55)),
        ("meadow_03", leaf((520, 380), 170.0, 170, 0, 45)),
    ]
    annotations = []
    for image_id, (keypoints, polygon) in leaves:
        annotations.append({
            "image_id": image_id,
            "keypoints": keypoints,
            "blade_polygon": polygon,
        })
    # one invisible pseudo keypoint for variety (slot 5 of the big meadow_03 leaf)
    annotations[5]["keypoints"][3 * 5 + 2] = 0

    FIXTURES.mkdir(parents=True, exist_ok=True)
    gt_path = FIXTURES / "golden_gt.json"
    gt_path.write_text(
        json.dumps({"images": images, "annotations": annotations}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )

    # predictions: graded noise, one missing leaf (index 6), one pure false positive
    noise_levels = [0.6, 2.5, 6.0, 1.2, 9.0, 3.5, None]
    scores = [0.93, 0.88, 0.42, 0.81, 0.55, 0.77, None]
    predictions = []
    for (image_id, (keypoints, polygon)), sigma, score in zip(leaves, noise_levels, scores):
        if sigma is None:
            continue
        predictions.append({
            "image_id": image_id,
            "score": score,
            "keypoints": perturb(keypoints, rng, sigma),
            "obb": perturbed_obb(keypoints, polygon, rng,
                                 angle_jitter=6.0, scale_jitter=0.12, shift=5.0),
        })
    predictions.append({
        "image_id": "meadow_02",
        "score": 0.60,
        "keypoints": [[20.0 + 10 * i, 30.0] for i in range(8)],
        "obb": [60.0, 40.0, 30.0, 30.0, 10.0, 10.0, 10.0],
    })
    pred_path = FIXTURES / "golden_pred.json"
    pred_path.write_text(
        json.dumps({"predictions": predictions}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )

    from leafline.cli import main as cli_main

    report_path = FIXTURES / "golden_report.json"
    code = cli_main([
        "evaluate", "--gt", str(gt_path), "--pred", str(pred_path), "--out", str(report_path),
    ])
    if code != 0:
        print(f"evaluate failed with exit code {code}", file=sys.stderr)
        return code
    print(f"wrote {gt_path.name}, {pred_path.name}, {report_path.name} in {FIXTURES}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
