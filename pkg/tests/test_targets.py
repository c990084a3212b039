import math

import numpy as np
import pytest

from rboxkit.errors import ConfigError
from rboxkit.geom import HorizontalBox, RotatedBox, enclosing_hbox, normalize_angle, to_vertices
from rboxkit.targets import (
    IGNORE,
    NEGATIVE,
    POSITIVE,
    AnchorConfig,
    AssignConfig,
    HorizontalDelta,
    LocalTarget,
    TransformParams,
    assign_rpn,
    assign_rroi,
    decode_hdelta,
    decode_local,
    decode_transform,
    encode_hdelta,
    encode_local,
    encode_transform,
    generate_anchors,
    sample_minibatch,
    transform_to_quad,
)

from conftest import random_hbox, random_rbox
from oracles import hausdorff


class TestGenerateAnchors:
    def test_single_cell_identity(self):
        cfg = AnchorConfig(scales=[32], aspect_ratios=[1.0], stride_per_level=[32])
        (a,) = generate_anchors([(1, 1)], cfg)
        assert (a.cx, a.cy, a.w, a.h) == (16.0, 16.0, 32.0, 32.0)

    def test_ratio_preserves_area(self):
        cfg = AnchorConfig(scales=[32], aspect_ratios=[2.0], stride_per_level=[32])
        (a,) = generate_anchors([(1, 1)], cfg)
        assert a.w == pytest.approx(22.627417, abs=1e-5)
        assert a.h == pytest.approx(45.254834, abs=1e-5)
        assert a.w * a.h == pytest.approx(1024.0)

    def test_counting_and_order(self):
        cfg = AnchorConfig(scales=[8], aspect_ratios=[0.5, 1.0, 2.0], stride_per_level=[4])
        anchors = generate_anchors([(2, 2)], cfg)
        assert len(anchors) == 12
        # first three anchors share the first cell center
        assert {(a.cx, a.cy) for a in anchors[:3]} == {(2.0, 2.0)}
        assert anchors[3].cx == 6.0  # then the column advances

    def test_empty_config_rejected(self):
        with pytest.raises(ConfigError):
            AnchorConfig(scales=[], aspect_ratios=[1.0], stride_per_level=[])
        cfg = AnchorConfig(scales=[32, 64], aspect_ratios=[1.0], stride_per_level=[8, 16])
        with pytest.raises(ConfigError):
            generate_anchors([(1, 1)], cfg)  # shape count != level count


class TestAssign:
    def test_anchor_equal_to_enclosing_box_is_positive(self):
        gt = RotatedBox(50, 50, 20, 10, math.radians(20))
        ehb = enclosing_hbox(gt)
        anchors = [HorizontalBox(ehb.cx, ehb.cy, ehb.w, ehb.h)]
        labels, matched = assign_rpn(anchors, [gt], AssignConfig.rpn())
        assert labels[0] == POSITIVE
        assert matched[0] == 0

    def test_low_iou_is_negative(self):
        gt = RotatedBox(50, 50, 20, 20, 0.0)
        anchors = [
            HorizontalBox(50, 50, 20, 20),  # argmax holder
            HorizontalBox(90, 90, 20, 20),  # IoU ~ 0 < 0.3
        ]
        labels, _ = assign_rpn(anchors, [gt], AssignConfig.rpn())
        assert labels[1] == NEGATIVE

    def test_mid_iou_not_argmax_is_ignored(self):
        gt = RotatedBox(0, 0, 10, 10, 0.0)
        anchors = [
            HorizontalBox(0, 0, 10, 10),      # IoU 1, argmax
            HorizontalBox(0, 2.5, 10, 10),    # IoU 0.6 -> ignore under 0.7/0.3
            HorizontalBox(30, 30, 10, 10),    # IoU 0 -> negative
        ]
        labels, matched = assign_rpn(anchors, [gt], AssignConfig.rpn())
        iou_mid = 7.5 / 12.5
        assert 0.3 <= iou_mid < 0.7
        assert list(labels) == [POSITIVE, IGNORE, NEGATIVE]
        assert matched[0] == 0

    def test_partition_property(self, rng):
        gts = [random_rbox(rng, span=200.0, size_lo=10, size_hi=60) for _ in range(8)]
        anchors = [random_hbox(rng, span=200.0, size_lo=10, size_hi=60) for _ in range(300)]
        labels, matched = assign_rpn(anchors, gts, AssignConfig.rpn())
        assert set(np.unique(labels)) <= {POSITIVE, NEGATIVE, IGNORE}
        # every gt covered by at least one positive anchor
        covered = set(matched[labels == POSITIVE].tolist())
        assert covered >= set(range(len(gts)))
        assert np.all(matched[labels == POSITIVE] >= 0)

    def test_no_gts_all_negative(self):
        anchors = [HorizontalBox(0, 0, 4, 4), HorizontalBox(9, 9, 4, 4)]
        labels, matched = assign_rpn(anchors, [], AssignConfig.rpn())
        assert np.all(labels == NEGATIVE)
        assert np.all(matched == -1)

    def test_rroi_proposal_equal_to_gt_positive(self):
        gt = RotatedBox(10, 10, 8, 4, 0.4)
        labels, matched = assign_rroi([gt], [gt], AssignConfig.rroi())
        assert labels[0] == POSITIVE and matched[0] == 0

    def test_rroi_just_below_threshold_negative(self):
        gt = RotatedBox(0, 0, 10, 10, 0.0)
        prop = RotatedBox(0, 3.5, 10, 10, 0.0)  # IoU 6.5/13.5 ~ 0.481
        labels, _ = assign_rroi([prop, gt], [gt], AssignConfig.rroi())
        assert labels[0] == NEGATIVE

    def test_rroi_tied_proposals_both_positive(self):
        gt = RotatedBox(0, 0, 10, 10, 0.0)
        left = RotatedBox(-2.5, 0, 10, 10, 0.0)
        right = RotatedBox(2.5, 0, 10, 10, 0.0)
        labels, matched = assign_rroi([left, right], [gt], AssignConfig.rroi())
        # both overlap the gt with IoU 0.6 >= 0.5
        assert list(labels) == [POSITIVE, POSITIVE]
        assert list(matched) == [0, 0]


class TestSampleMinibatch:
    def test_positive_quota(self, rng):
        labels = np.array([POSITIVE] * 300 + [NEGATIVE] * 1000)
        sel = sample_minibatch(labels, AssignConfig.rroi(), seed=7)
        assert len(sel) == 512
        assert int(np.sum(labels[sel] == POSITIVE)) == 128

    def test_zero_positives_pads_with_negatives(self):
        labels = np.array([NEGATIVE] * 1000)
        sel = sample_minibatch(labels, AssignConfig.rroi(), seed=7)
        assert len(sel) == 512
        assert np.all(labels[sel] == NEGATIVE)

    def test_deterministic_under_seed(self):
        labels = np.array([POSITIVE] * 40 + [NEGATIVE] * 400 + [IGNORE] * 60)
        a = sample_minibatch(labels, AssignConfig.rpn(), seed=123)
        b = sample_minibatch(labels, AssignConfig.rpn(), seed=123)
        assert np.array_equal(a, b)
        c = sample_minibatch(labels, AssignConfig.rpn(), seed=124)
        assert not np.array_equal(a, c)

    def test_ignores_never_sampled(self):
        labels = np.array([IGNORE] * 50 + [POSITIVE] * 5 + [NEGATIVE] * 10)
        sel = sample_minibatch(labels, AssignConfig.rpn(), seed=0)
        assert np.all(labels[sel] != IGNORE)
        assert len(sel) == 15

    def test_empty_candidates_flagged(self):
        labels = np.array([IGNORE] * 10)
        with pytest.warns(UserWarning):
            sel = sample_minibatch(labels, AssignConfig.rpn(), seed=0)
        assert sel.size == 0


class TestHdeltaCoding:
    def test_identity(self):
        a = HorizontalBox(10, 10, 5, 5)
        d = encode_hdelta(a, a)
        assert (d.ux, d.uy, d.uw, d.uh) == (0.0, 0.0, 0.0, 0.0)

    def test_hand_example(self):
        anchor = HorizontalBox(100, 100, 50, 50)
        target = HorizontalBox(105, 100, 100, 50)
        d = encode_hdelta(anchor, target)
        assert (d.ux, d.uy, d.uw, d.uh) == pytest.approx((0.1, 0.0, math.log(2), 0.0))

    def test_decode_hand_example(self):
        anchor = HorizontalBox(100, 100, 50, 50)
        t = decode_hdelta(anchor, HorizontalDelta(0.1, 0.0, math.log(2), 0.0))
        assert (t.cx, t.cy, t.w, t.h) == pytest.approx((105, 100, 100, 50))

    def test_round_trip(self, rng):
        for _ in range(2000):
            a = random_hbox(rng)
            t = random_hbox(rng)
            r = decode_hdelta(a, encode_hdelta(a, t))
            assert (r.cx, r.cy, r.w, r.h) == pytest.approx((t.cx, t.cy, t.w, t.h), abs=1e-9)

    def test_decode_clamps_extreme_ratios(self):
        a = HorizontalBox(0, 0, 1, 1)
        t = decode_hdelta(a, HorizontalDelta(0, 0, 50.0, -50.0))
        assert t.w == pytest.approx(math.exp(10.0))
        assert t.h == pytest.approx(math.exp(-10.0))


class TestTransformCoding:
    def test_identity(self):
        p = HorizontalBox(10, 10, 4, 2)
        v = encode_transform(p, RotatedBox(10, 10, 4, 2, 0.0))
        assert (v.v1, v.v2, v.v3, v.v4) == pytest.approx((1, 0, 0, 1))

    def test_pure_rotation(self):
        p = HorizontalBox(0, 0, 4, 2)
        v = encode_transform(p, RotatedBox(0, 0, 4, 2, math.pi / 6))
        assert (v.v1, v.v2, v.v3, v.v4) == pytest.approx(
            (0.86603, -0.5, 0.5, 0.86603), abs=1e-5
        )

    def test_pure_scaling(self):
        p = HorizontalBox(0, 0, 4, 2)
        v = encode_transform(p, RotatedBox(0, 0, 2, 1, 0.0))
        assert (v.v1, v.v2, v.v3, v.v4) == pytest.approx((0.5, 0, 0, 0.5))
        d = decode_transform(p, TransformParams(0.5, 0, 0, 0.5))
        assert (d.cx, d.cy, d.w, d.h, d.theta) == pytest.approx((0, 0, 2, 1, 0))

    def test_identity_matrix_decodes_to_hprop(self):
        p = HorizontalBox(7, 9, 4, 2)
        d = decode_transform(p, TransformParams(1, 0, 0, 1))
        assert (d.cx, d.cy, d.w, d.h, d.theta) == pytest.approx((7, 9, 4, 2, 0))

    def test_round_trip(self, rng):
        # gt shares the proposal center: the transform carries no translation
        for _ in range(2000):
            p = random_hbox(rng)
            g0 = random_rbox(rng)
            g = RotatedBox(p.cx, p.cy, g0.w, g0.h, g0.theta)
            r = decode_transform(p, encode_transform(p, g))
            assert (r.cx, r.cy, r.w, r.h, r.theta) == pytest.approx(
                (g.cx, g.cy, g.w, g.h, g.theta), abs=1e-8
            )

    def test_exact_params_map_corners_onto_gt_vertices(self, rng):
        # The transform captures rotation and scale only; the gt shares the
        # proposal center (centers come from the horizontal-delta stage).
        for _ in range(500):
            p = random_hbox(rng)
            g0 = normalize_angle(random_rbox(rng))
            g = RotatedBox(p.cx, p.cy, g0.w, g0.h, g0.theta)
            q = transform_to_quad(p, encode_transform(p, g))
            assert np.abs(q.as_array() - to_vertices(g).as_array()).max() <= 1e-8

    def test_determinant_positive_for_exact_targets(self, rng):
        for _ in range(300):
            v = encode_transform(random_hbox(rng), random_rbox(rng))
            assert v.v1 * v.v4 - v.v2 * v.v3 > 0


class TestLocalCoding:
    def test_identity(self):
        p = RotatedBox(5, 5, 4, 2, 0.3)
        t = encode_local(p, p)
        assert (t.lx, t.ly, t.sh, t.sw, t.otheta) == pytest.approx((0, 0, 0, 0, 0))

    def test_shift_along_w_axis(self):
        p = RotatedBox(0, 0, 4, 2, math.pi / 6)
        g = RotatedBox(math.cos(math.pi / 6), math.sin(math.pi / 6), 4, 2, math.pi / 6)
        t = encode_local(p, g)
        assert (t.lx, t.ly) == pytest.approx((0.25, 0.0), abs=1e-12)

    def test_pure_angle_offset(self):
        p = RotatedBox(0, 0, 4, 2, 0.2)
        g = RotatedBox(0, 0, 4, 2, 0.3)
        t = encode_local(p, g)
        assert (t.lx, t.ly, t.sh, t.sw) == pytest.approx((0, 0, 0, 0))
        assert t.otheta == pytest.approx(0.1)

    def test_round_trip(self, rng):
        for _ in range(2000):
            p = random_rbox(rng)
            g = random_rbox(rng)
            r = decode_local(p, encode_local(p, g))
            assert (r.cx, r.cy, r.w, r.h) == pytest.approx((g.cx, g.cy, g.w, g.h), abs=1e-8)
            assert abs(r.theta - g.theta) <= 1e-8

    def test_otheta_canonical_range(self, rng):
        for _ in range(500):
            t = encode_local(random_rbox(rng), random_rbox(rng))
            assert abs(t.otheta) <= math.pi / 2


class TestEncodingInvariances:
    def test_translation_invariance(self, rng):
        for _ in range(200):
            a = random_hbox(rng)
            g = random_rbox(rng)
            p = random_rbox(rng)
            tx, ty = rng.uniform(-500, 500, 2)
            a2 = HorizontalBox(a.cx + tx, a.cy + ty, a.w, a.h)
            g2 = RotatedBox(g.cx + tx, g.cy + ty, g.w, g.h, g.theta)
            p2 = RotatedBox(p.cx + tx, p.cy + ty, p.w, p.h, p.theta)

            d1, d2 = encode_hdelta(a, enclosing_hbox(g)), encode_hdelta(a2, enclosing_hbox(g2))
            assert (d1.ux, d1.uy, d1.uw, d1.uh) == pytest.approx(
                (d2.ux, d2.uy, d2.uw, d2.uh), abs=1e-9
            )
            v1, v2 = encode_transform(a, g), encode_transform(a2, g2)
            assert (v1.v1, v1.v2, v1.v3, v1.v4) == pytest.approx(
                (v2.v1, v2.v2, v2.v3, v2.v4), abs=1e-9
            )
            t1, t2 = encode_local(p, g), encode_local(p2, g2)
            assert (t1.lx, t1.ly, t1.sh, t1.sw, t1.otheta) == pytest.approx(
                (t2.lx, t2.ly, t2.sh, t2.sw, t2.otheta), abs=1e-9
            )

    def test_uniform_scale_equivariance(self, rng):
        for _ in range(200):
            a = random_hbox(rng)
            g = random_rbox(rng)
            p = random_rbox(rng)
            k = float(rng.uniform(0.5, 3.0))
            a2 = HorizontalBox(a.cx * k, a.cy * k, a.w * k, a.h * k)
            g2 = RotatedBox(g.cx * k, g.cy * k, g.w * k, g.h * k, g.theta)
            p2 = RotatedBox(p.cx * k, p.cy * k, p.w * k, p.h * k, p.theta)

            d1, d2 = encode_hdelta(a, enclosing_hbox(g)), encode_hdelta(a2, enclosing_hbox(g2))
            assert (d1.ux, d1.uy, d1.uw, d1.uh) == pytest.approx(
                (d2.ux, d2.uy, d2.uw, d2.uh), abs=1e-9
            )
            v1, v2 = encode_transform(a, g), encode_transform(a2, g2)
            assert (v1.v1, v1.v2, v1.v3, v1.v4) == pytest.approx(
                (v2.v1, v2.v2, v2.v3, v2.v4), abs=1e-9
            )
            t1, t2 = encode_local(p, g), encode_local(p2, g2)
            assert (t1.lx, t1.ly, t1.sh, t1.sw, t1.otheta) == pytest.approx(
                (t2.lx, t2.ly, t2.sh, t2.sw, t2.otheta), abs=1e-9
            )
