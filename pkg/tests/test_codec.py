import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leafline import (
    CenterMode,
    CenterSpec,
    DegenerateGeometryError,
    GuidedPolyline,
    LossWeights,
    ObbParamMode,
    OrientedBox,
    Point2,
    PolarTarget,
    Role,
    decode_keypoints,
    decode_obb,
    decode_offset,
    derive_obb,
    encode_keypoints,
    encode_obb,
    encode_offset,
    l1_loss,
    obb_corners,
    select_center,
    total_loss,
)
from leafline.codec import from_turn_fraction, turn_fraction

from helpers import blade_around, random_polyline


def full8_line(origin=(50.0, 50.0), step=20.0):
    return GuidedPolyline.full8([(origin[0] + i * step, origin[1]) for i in range(8)])


class TestSelectCenter:
    def test_basal_default(self):
        pl = full8_line()
        center = select_center(pl, None, CenterSpec())
        basal = pl.keypoint_at_slot(3).point
        assert (center.x, center.y) == (basal.x, basal.y)

    def test_obb_center_is_box_middle(self):
        pl = full8_line()
        box = OrientedBox(Point2(50, 50), 0, 40, 10, 10, 0.0)
        center = select_center(pl, box, CenterSpec(CenterMode.OBB_CENTER))
        assert (center.x, center.y) == (70.0, 50.0)

    def test_stem_mode_on_vein_only_rejected(self):
        pl = GuidedPolyline.vein5([(0, 0), (1, 0), (2, 0), (3, 0), (4, 1)])
        with pytest.raises(ValueError):
            select_center(pl, None, CenterSpec(CenterMode.K_STEM))

    def test_apex(self):
        pl = full8_line()
        center = select_center(pl, None, CenterSpec(CenterMode.K_APEX))
        assert center.x == 50.0 + 7 * 20.0


class TestKeypointCodec:
    def test_three_four_five_triangle(self):
        pl = GuidedPolyline.chain([(103.0, 104.0)], [Role.TRUE])
        (t,) = encode_keypoints(pl, (100.0, 100.0), 1)
        assert t.d == 5.0
        assert t.cos_a == pytest.approx(0.6, abs=1e-15)
        assert t.sin_a == pytest.approx(0.8, abs=1e-15)

    def test_keypoint_at_center_uses_convention(self):
        pl = GuidedPolyline.chain([(10.0, 10.0)], [Role.TRUE])
        (t,) = encode_keypoints(pl, (10.0, 10.0), 1)
        assert (t.d, t.cos_a, t.sin_a) == (0.0, 1.0, 0.0)

    def test_vertical_with_downscale(self):
        pl = GuidedPolyline.chain([(100.0, 110.0)], [Role.TRUE])
        (t,) = encode_keypoints(pl, (100.0, 100.0), 2)
        assert t.d == 5.0
        assert (t.cos_a, t.sin_a) == (0.0, 1.0)

    def test_invisible_slots_encode_none(self):
        pl = GuidedPolyline.vein5([(0, 0), (10, 0), (20, 0), (30, 0), (40, 5)])
        targets = encode_keypoints(pl, (0.0, 0.0), 4)
        assert targets[0] is None and targets[1] is None and targets[2] is None
        assert all(t is not None for t in targets[3:])

    def test_roundtrip(self):
        pl = GuidedPolyline.chain([(103.0, 104.0)], [Role.TRUE])
        targets = encode_keypoints(pl, (100.0, 100.0), 1)
        (point,) = decode_keypoints(targets, (100.0, 100.0), 1)
        assert point.x == pytest.approx(103.0, abs=1e-6)
        assert point.y == pytest.approx(104.0, abs=1e-6)

    def test_zero_distance_decodes_to_center(self):
        (point,) = decode_keypoints([PolarTarget(0.0, 1.0, 0.0)], (7.0, 9.0), 4)
        assert (point.x, point.y) == (7.0, 9.0)

    def test_denormalized_pair_renormalized(self):
        t = PolarTarget(2.0, 0.3, 0.4)
        assert (t.cos_a, t.sin_a) == (0.6, 0.8)

    def test_near_zero_pair_rejected(self):
        with pytest.raises(ValueError):
            PolarTarget(1.0, 0.01, 0.01)

    @given(st.randoms(use_true_random=False))
    def test_translation_equivariance(self, rnd):
        rng = np.random.default_rng(rnd.randrange(2**32))
        pl = random_polyline(rng, full8=True)
        center = (float(rng.uniform(0, 500)), float(rng.uniform(0, 500)))
        base = encode_keypoints(pl, center, 4)
        dx, dy = rng.uniform(-200, 200, 2)
        moved = GuidedPolyline.full8(
            [(k.point.x + dx, k.point.y + dy) for k in pl.keypoints],
            [k.visible for k in pl.keypoints],
        )
        shifted = encode_keypoints(moved, (center[0] + dx, center[1] + dy), 4)
        for a, b in zip(base, shifted):
            if a is None:
                assert b is None
                continue
            assert b.d == pytest.approx(a.d, rel=1e-9, abs=1e-9)
            assert b.cos_a == pytest.approx(a.cos_a, abs=1e-9)
            assert b.sin_a == pytest.approx(a.sin_a, abs=1e-9)

    def test_distance_scales_inversely_with_r(self):
        pl = GuidedPolyline.chain([(0.0, 120.0)], [Role.TRUE])
        (t1,) = encode_keypoints(pl, (0.0, 0.0), 1)
        (t4,) = encode_keypoints(pl, (0.0, 0.0), 4)
        assert t1.d == 4.0 * t4.d


class TestOffsetCodec:
    def test_quarter_cell(self):
        cell, offset = encode_offset((101.0, 100.0), 4)
        assert cell == (25, 25)
        assert offset == (0.25, 0.0)

    def test_exact_cell(self):
        cell, offset = encode_offset((100.0, 100.0), 4)
        assert offset == (0.0, 0.0)

    def test_roundtrip_exact(self):
        p = decode_offset((25, 25), (0.25, 0.0), 4)
        assert (p.x, p.y) == (101.0, 100.0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            encode_offset((-1.0, 5.0), 4)

    @given(
        x=st.floats(min_value=0, max_value=4096, allow_nan=False),
        y=st.floats(min_value=0, max_value=4096, allow_nan=False),
        r=st.sampled_from([1, 2, 4, 8]),
    )
    def test_offsets_in_unit_square(self, x, y, r):
        cell, offset = encode_offset((x, y), r)
        assert 0.0 <= offset[0] < 1.0 and 0.0 <= offset[1] < 1.0
        back = decode_offset(cell, offset, r)
        assert math.isclose(back.x, x, abs_tol=1e-6)
        assert math.isclose(back.y, y, abs_tol=1e-6)


class TestDeriveObb:
    def test_horizontal_leaf(self):
        pl = GuidedPolyline.vein5([(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)])
        blade = [(0.0, -1.0), (4.0, -1.0), (4.0, 1.0), (0.0, 1.0)]
        box = derive_obb(pl, blade)
        assert box.beta == 0.0
        assert (box.w_tl, box.w_br, box.h_tl, box.h_br) == (0.0, 4.0, 1.0, 1.0)
        assert (box.center.x, box.center.y) == (0.0, 0.0)

    def test_rotated_90(self):
        pl = GuidedPolyline.vein5([(0, 0), (0, 1), (0, 2), (0, 3), (0, 4)])
        blade = [(1.0, 0.0), (1.0, 4.0), (-1.0, 4.0), (-1.0, 0.0)]
        box = derive_obb(pl, blade)
        assert box.beta == pytest.approx(90.0, abs=1e-9)
        assert box.w_tl == pytest.approx(0.0, abs=1e-9)
        assert box.w_br == pytest.approx(4.0, abs=1e-9)
        assert box.h_tl == pytest.approx(1.0, abs=1e-9)
        assert box.h_br == pytest.approx(1.0, abs=1e-9)

    def test_rotated_30_matches_flat_case(self):
        rad = math.radians(30.0)
        c, s = math.cos(rad), math.sin(rad)

        def rot(p):
            return (c * p[0] - s * p[1], s * p[0] + c * p[1])

        pl = GuidedPolyline.vein5([rot((i, 0.0)) for i in range(0, 5)])
        blade = [rot(p) for p in [(0.0, -1.0), (4.0, -1.0), (4.0, 1.0), (0.0, 1.0)]]
        box = derive_obb(pl, blade)
        assert box.beta == pytest.approx(30.0, abs=1e-9)
        assert box.w_tl == pytest.approx(0.0, abs=1e-9)
        assert box.w_br == pytest.approx(4.0, abs=1e-9)
        assert box.h_tl == pytest.approx(1.0, abs=1e-9)
        assert box.h_br == pytest.approx(1.0, abs=1e-9)

    def test_stem_extends_the_box(self):
        pts = [(-3.0, 0.0), (-2.0, 0.0), (-1.0, 0.0)] + [(i, 0.0) for i in range(5)]
        pl = GuidedPolyline.full8(pts)
        blade = [(0.0, -1.0), (4.0, -1.0), (4.0, 1.0), (0.0, 1.0)]
        box = derive_obb(pl, blade)
        assert box.w_tl == pytest.approx(3.0, abs=1e-12)  # stem side included

    def test_degenerate_vein_rejected(self):
        pl = GuidedPolyline.vein5(
            [(1.0, 1.0)] * 5, visible=[True, True, True, False, False]
        )
        with pytest.raises(DegenerateGeometryError):
            derive_obb(pl, [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0)])

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            pl = random_polyline(rng, full8=bool(rng.random() < 0.5))
            blade = blade_around(pl, float(rng.uniform(10, 25)))
            base = derive_obb(pl, blade)
            theta = float(rng.uniform(0, 360))
            rad = math.radians(theta)
            c, s = math.cos(rad), math.sin(rad)

            def rot(p):
                return (c * p.x - s * p.y, s * p.x + c * p.y)

            rotated_pl = type(pl)(
                tuple(
                    type(k)(Point2(*rot(k.point)), k.role, k.visible) for k in pl.keypoints
                ),
                pl.layout,
            )
            rotated_blade = [rot(Point2(*p)) for p in blade]
            rotated = derive_obb(rotated_pl, rotated_blade)
            delta = (rotated.beta - base.beta - theta) % 360.0
            assert min(delta, 360.0 - delta) < 1e-6
            for attr in ("w_tl", "w_br", "h_tl", "h_br"):
                assert getattr(rotated, attr) == pytest.approx(getattr(base, attr), abs=1e-6)


class TestObbCodec:
    def test_five_mode_roundtrip(self):
        pl = GuidedPolyline.vein5([(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)])
        blade = [(0.0, -1.0), (4.0, -1.0), (4.0, 1.0), (0.0, 1.0)]
        box = derive_obb(pl, blade)
        back = decode_obb(encode_obb(box, ObbParamMode.FIVE, 4), box.center, 4)
        for attr in ("w_tl", "w_br", "h_tl", "h_br", "beta"):
            assert getattr(back, attr) == pytest.approx(getattr(box, attr), abs=1e-6)

    def test_three_mode_symmetric_exact(self):
        box = OrientedBox(Point2(10, 20), 3, 3, 2, 2, 120.0)
        back = decode_obb(encode_obb(box, ObbParamMode.THREE, 2), box.center, 2)
        assert (back.w_tl, back.w_br, back.h_tl, back.h_br) == (3.0, 3.0, 2.0, 2.0)
        assert back.beta == pytest.approx(120.0, abs=1e-9)

    def test_three_mode_collapses_asymmetry(self):
        box = OrientedBox(Point2(0, 0), 1, 3, 2, 6, 45.0)
        back = decode_obb(encode_obb(box, ObbParamMode.THREE, 1), box.center, 1)
        assert back.width == pytest.approx(box.width, abs=1e-9)
        assert back.height == pytest.approx(box.height, abs=1e-9)
        assert back.w_tl == back.w_br and back.h_tl == back.h_br

    def test_corner_set_preserved_by_five_mode(self):
        rng = np.random.default_rng(123)
        from helpers import random_box

        for _ in range(100):
            box = random_box(rng)
            back = decode_obb(encode_obb(box, ObbParamMode.FIVE, 4), box.center, 4)
            for c1, c2 in zip(obb_corners(box), obb_corners(back)):
                assert math.hypot(c1.x - c2.x, c1.y - c2.y) < 1e-6


class TestEncodeSample:
    def test_fields_satisfy_grid_invariants(self):
        rng = np.random.default_rng(55)
        from helpers import blade_around
        from leafline import encode_sample

        for _ in range(50):
            pl = random_polyline(rng, full8=True)
            blade = blade_around(pl, 15.0)
            sample = encode_sample(pl, blade, CenterSpec(), r=4)
            assert sample.downscale_r == 4
            assert 0.0 <= sample.offset[0] < 1.0 and 0.0 <= sample.offset[1] < 1.0
            basal = pl.keypoint_at_slot(3).point
            assert sample.center_cell == (math.floor(basal.x / 4), math.floor(basal.y / 4))
            assert len(sample.polar_targets) == 8

    def test_box_anchored_at_requested_center(self):
        pl = full8_line()
        from leafline import encode_sample

        blade = [(50.0, 30.0), (190.0, 30.0), (190.0, 70.0), (50.0, 70.0)]
        apex_sample = encode_sample(pl, blade, CenterSpec(CenterMode.K_APEX), r=1)
        # apex sits at the far-right end: the whole box extends to its top-left
        assert apex_sample.obb_target.w_br == pytest.approx(0.0, abs=1e-9)
        assert apex_sample.obb_target.w_tl == pytest.approx(140.0, abs=1e-9)


class TestAngleAlternative:
    def test_turn_fraction_roundtrip(self):
        for deg in (0.0, 45.0, 120.0, 359.0):
            rad = math.radians(deg)
            frac = turn_fraction(math.cos(rad), math.sin(rad))
            c, s = from_turn_fraction(frac)
            assert c == pytest.approx(math.cos(rad), abs=1e-12)
            assert s == pytest.approx(math.sin(rad), abs=1e-12)

    def test_wraparound_discontinuity_is_inherent(self):
        just_below = turn_fraction(math.cos(math.radians(359.9)), math.sin(math.radians(359.9)))
        just_above = turn_fraction(math.cos(math.radians(0.1)), math.sin(math.radians(0.1)))
        assert abs(just_below - just_above) > 0.99  # the reason the pair encoding exists


class TestLosses:
    def test_l1_zero_on_match(self):
        assert l1_loss([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_l1_mean(self):
        assert l1_loss([1.0, 3.0], [0.0, 0.0]) == 2.0

    def test_l1_masked(self):
        assert l1_loss([1.0, 100.0], [0.0, 0.0], mask=[True, False]) == 1.0

    def test_l1_empty_mask(self):
        assert l1_loss([1.0], [0.0], mask=[False]) == 0.0

    def test_total_with_reference_weights(self):
        components = {k: 1.0 for k in ("center", "offset", "keypoint", "keypoint_heatmap", "obb")}
        assert total_loss(components, LossWeights()) == 43.0

    def test_missing_component_rejected(self):
        with pytest.raises(ValueError):
            total_loss({"center": 1.0})
