"""Command-line interface; every pipeline stage is a subcommand.

Angles are radians everywhere; --degrees converts box arguments and
printed angles at the boundary only. Machine-readable results go to
stdout or files, diagnostics to stderr. Exit code 0 on success.
"""

import argparse
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    AnnotationRecord,
    TileSpec,
    format_dota,
    merge_detections,
    parse_dota,
    read_box_csv,
    read_fmap,
    tile_plan,
    write_box_csv,
    write_fmap,
)
from .errors import RBoxError
from .evaluation import EvalConfig, GroundTruth, average_precision, map_evaluate
from .geom import (
    HorizontalBox,
    Quadrilateral,
    RotatedBox,
    from_quad,
    normalize_angle,
    rotated_iou,
    to_vertices,
)
from .kernels import RRoiAlignConfig, center_pool, rroi_align
from .losses import aorpn_loss, bce, smooth_l1
from .postprocess import Detection, rotated_nms
from .targets import (
    HorizontalDelta,
    LocalTarget,
    TransformParams,
    decode_hdelta,
    decode_local,
    decode_transform,
    encode_hdelta,
    encode_local,
    encode_transform,
)


def _fmt(x):
    return f"{float(x):.9g}"


def _rbox(values, degrees):
    cx, cy, w, h, theta = values
    if degrees:
        theta = math.radians(theta)
    return RotatedBox(cx, cy, w, h, theta)


def _hbox(values):
    return HorizontalBox(*values)


def _print_fields(args_degrees, *pairs):
    out = []
    for value, is_angle in pairs:
        v = math.degrees(value) if (args_degrees and is_angle) else value
        out.append(_fmt(v))
    print(" ".join(out))


def cmd_iou(args):
    a = _rbox(args.a, args.degrees)
    b = _rbox(args.b, args.degrees)
    print(f"{rotated_iou(a, b):.6f}")
    return 0


def cmd_nms(args):
    dets = read_box_csv(args.input)
    kept = rotated_nms(dets, args.iou, class_agnostic=args.class_agnostic)
    survivors = [dets[i] for i in kept]
    if args.out:
        write_box_csv(args.out, survivors)
    else:
        buf = io.StringIO()
        write_box_csv(buf, survivors)
        sys.stdout.write(buf.getvalue())
    print(f"kept {len(survivors)} of {len(dets)}", file=sys.stderr)
    return 0


def _need(args, flag, count, what):
    values = getattr(args, flag)
    if values is None or len(values) != count:
        raise RBoxError(f"--{flag} needs {count} values for {what}")
    return values


def cmd_encode(args):
    if args.mode == "hdelta":
        anchor = _hbox(_need(args, "anchor", 4, "hdelta"))
        target = _hbox(_need(args, "target", 4, "hdelta"))
        d = encode_hdelta(anchor, target)
        _print_fields(False, (d.ux, 0), (d.uy, 0), (d.uw, 0), (d.uh, 0))
    elif args.mode == "transform":
        anchor = _hbox(_need(args, "anchor", 4, "transform"))
        target = _rbox(_need(args, "target", 5, "transform"), args.degrees)
        v = encode_transform(anchor, target)
        _print_fields(False, (v.v1, 0), (v.v2, 0), (v.v3, 0), (v.v4, 0))
    else:
        anchor = _rbox(_need(args, "anchor", 5, "local"), args.degrees)
        target = _rbox(_need(args, "target", 5, "local"), args.degrees)
        t = encode_local(anchor, target)
        _print_fields(args.degrees, (t.lx, 0), (t.ly, 0), (t.sh, 0), (t.sw, 0), (t.otheta, 1))
    return 0


def cmd_decode(args):
    if args.mode == "hdelta":
        anchor = _hbox(_need(args, "anchor", 4, "hdelta"))
        code = _need(args, "code", 4, "hdelta")
        b = decode_hdelta(anchor, HorizontalDelta(*code))
        _print_fields(False, (b.cx, 0), (b.cy, 0), (b.w, 0), (b.h, 0))
    elif args.mode == "transform":
        anchor = _hbox(_need(args, "anchor", 4, "transform"))
        code = _need(args, "code", 4, "transform")
        b = decode_transform(anchor, TransformParams(*code))
        _print_fields(args.degrees, (b.cx, 0), (b.cy, 0), (b.w, 0), (b.h, 0), (b.theta, 1))
    else:
        anchor = _rbox(_need(args, "anchor", 5, "local"), args.degrees)
        code = list(_need(args, "code", 5, "local"))
        if args.degrees:
            code[4] = math.radians(code[4])
        b = decode_local(anchor, LocalTarget(*code))
        _print_fields(args.degrees, (b.cx, 0), (b.cy, 0), (b.w, 0), (b.h, 0), (b.theta, 1))
    return 0


def cmd_anchors(args):
    from .targets import AnchorConfig, generate_anchors

    shapes = []
    for token in args.shapes:
        h, _, w = token.partition("x")
        shapes.append((int(h), int(w)))
    cfg = AnchorConfig(scales=args.scales, aspect_ratios=args.ratios, stride_per_level=args.strides)
    anchors = generate_anchors(shapes, cfg)
    for a in anchors:
        print(" ".join(_fmt(v) for v in (a.cx, a.cy, a.w, a.h)))
    print(f"{len(anchors)} anchors", file=sys.stderr)
    return 0


def cmd_align(args):
    fmap = read_fmap(args.fmap)
    box = _rbox(args.box, args.degrees)
    out = rroi_align(fmap, box, RRoiAlignConfig(k=args.k, ks=args.ks))
    write_fmap(args.out, out.astype(np.float32))
    return 0


def cmd_centerpool(args):
    fmap = read_fmap(args.fmap)
    write_fmap(args.out, center_pool(fmap).astype(np.float32))
    return 0


def cmd_tile(args):
    specs = tile_plan(args.width, args.height, args.patch, args.stride, args.source)
    for s in specs:
        print(json.dumps(asdict(s)))
    return 0


def cmd_merge(args):
    specs = []
    with open(args.manifest) as f:
        for line in f:
            line = line.strip()
            if line:
                specs.append(TileSpec(**json.loads(line)))
    per_tile = {}
    for csv_path in sorted(Path(args.dets_dir).glob("*.csv")):
        per_tile[csv_path.stem] = read_box_csv(csv_path)
    merged = merge_detections(per_tile, specs, final_nms_iou=args.nms, class_agnostic=args.class_agnostic)
    if args.out:
        write_box_csv(args.out, merged)
    else:
        buf = io.StringIO()
        write_box_csv(buf, merged)
        sys.stdout.write(buf.getvalue())
    print(f"merged {sum(len(v) for v in per_tile.values())} -> {len(merged)}", file=sys.stderr)
    return 0


def _gts_from_dota(path):
    with open(path) as f:
        anns = parse_dota(f.read())
    categories = sorted({a.category for a in anns})
    index = {c: i for i, c in enumerate(categories)}
    gts = [
        GroundTruth(normalize_angle(from_quad(a.quad)), index[a.category], bool(a.difficult))
        for a in anns
    ]
    return gts, categories


def cmd_eval(args):
    gts, categories = _gts_from_dota(args.gt)
    dets = read_box_csv(args.dets)
    cfg = EvalConfig(
        iou_thresh=args.iou,
        interpolation=args.interp,
        ignore_difficult=not args.keep_difficult,
    )
    result = map_evaluate(dets, gts, cfg, class_names=categories)
    for name in sorted(result.per_class_ap):
        print(f"{name} {result.per_class_ap[name]:.6f}")
    print(f"mAP: {result.mean_ap:.6f}")
    return 0


def cmd_synth(args):
    rng = np.random.default_rng(args.seed)
    cells = max(1, math.ceil(math.sqrt(args.boxes)))
    pitch_x = args.width / cells
    pitch_y = args.height / cells
    size_cap = 0.45 * min(pitch_x, pitch_y)

    anns = []
    dets = []
    placed = 0
    for gy in range(cells):
        for gx in range(cells):
            if placed >= args.boxes:
                break
            w = float(rng.uniform(0.4 * size_cap, size_cap))
            h = float(rng.uniform(0.4 * size_cap, size_cap))
            cx = (gx + 0.5) * pitch_x + float(rng.uniform(-0.15, 0.15)) * pitch_x
            cy = (gy + 0.5) * pitch_y + float(rng.uniform(-0.15, 0.15)) * pitch_y
            theta = float(rng.uniform(-math.pi / 2 + 0.01, math.pi / 2))
            box = RotatedBox(cx, cy, w, h, theta)
            cid = int(rng.integers(0, args.classes))
            anns.append(AnnotationRecord(to_vertices(box), f"cat{cid}", 0))
            jitter = RotatedBox(
                cx + float(rng.normal(0, 0.01 * w)),
                cy + float(rng.normal(0, 0.01 * h)),
                w * float(np.exp(rng.normal(0, 0.01))),
                h * float(np.exp(rng.normal(0, 0.01))),
                theta,
            )
            dets.append(Detection(jitter, float(rng.uniform(0.6, 0.99)), cid))
            placed += 1
    # sprinkle low-score false positives
    for _ in range(max(1, args.boxes // 5)):
        fp = RotatedBox(
            float(rng.uniform(0.1, 0.9) * args.width),
            float(rng.uniform(0.1, 0.9) * args.height),
            float(rng.uniform(4, size_cap)),
            float(rng.uniform(4, size_cap)),
            float(rng.uniform(-math.pi / 2 + 0.01, math.pi / 2)),
        )
        dets.append(Detection(fp, float(rng.uniform(0.05, 0.4)), int(rng.integers(0, args.classes))))

    with open(args.out_gt, "w") as f:
        f.write(format_dota(anns))
    write_box_csv(args.out_dets, dets)
    print(f"wrote {len(anns)} ground truths, {len(dets)} detections", file=sys.stderr)
    return 0


def _selftest_checks():
    rng = np.random.default_rng(7)

    def rand_rbox(span=200.0, lo=5.0, hi=60.0):
        return RotatedBox(
            float(rng.uniform(0, span)),
            float(rng.uniform(0, span)),
            float(rng.uniform(lo, hi)),
            float(rng.uniform(lo, hi)),
            float(rng.uniform(-math.pi / 2 + 1e-6, math.pi / 2)),
        )

    def check_iou_basics():
        b = RotatedBox(10, 10, 6, 3, 0.4)
        assert abs(rotated_iou(b, b) - 1.0) <= 1e-12
        assert rotated_iou(RotatedBox(0, 0, 2, 2, 0), RotatedBox(9, 9, 2, 2, 0)) == 0.0
        inter = 8 * (math.sqrt(2) - 1)
        expect = inter / (8 - inter)
        got = rotated_iou(RotatedBox(0, 0, 2, 2, 0), RotatedBox(0, 0, 2, 2, math.pi / 4))
        assert abs(got - expect) <= 1e-9

    def check_iou_monte_carlo():
        for _ in range(3):
            a = rand_rbox(span=40)
            b = rand_rbox(span=40)
            ex = max((a.w + a.h) / 2, (b.w + b.h) / 2)  # covers any rotation
            lo_x = min(a.cx, b.cx) - ex
            hi_x = max(a.cx, b.cx) + ex
            lo_y = min(a.cy, b.cy) - ex
            hi_y = max(a.cy, b.cy) + ex
            pts = np.column_stack(
                [rng.uniform(lo_x, hi_x, 100_000), rng.uniform(lo_y, hi_y, 100_000)]
            )

            def inside(box):
                c, s = math.cos(box.theta), math.sin(box.theta)
                dx = pts[:, 0] - box.cx
                dy = pts[:, 1] - box.cy
                return (np.abs(c * dx + s * dy) <= box.w / 2) & (np.abs(-s * dx + c * dy) <= box.h / 2)

            in_a, in_b = inside(a), inside(b)
            union = np.count_nonzero(in_a | in_b)
            est = np.count_nonzero(in_a & in_b) / union if union else 0.0
            assert abs(rotated_iou(a, b) - est) <= 2e-2

    def check_round_trips():
        for _ in range(200):
            p = rand_rbox()
            g = rand_rbox()
            r = decode_local(p, encode_local(p, g))
            assert max(abs(r.cx - g.cx), abs(r.cy - g.cy), abs(r.w - g.w), abs(r.h - g.h), abs(r.theta - g.theta)) <= 1e-6
            hp = HorizontalBox(p.cx, p.cy, p.w, p.h)
            hg = HorizontalBox(g.cx, g.cy, g.w, g.h)
            hr = decode_hdelta(hp, encode_hdelta(hp, hg))
            assert max(abs(hr.cx - hg.cx), abs(hr.cy - hg.cy), abs(hr.w - hg.w), abs(hr.h - hg.h)) <= 1e-6
            gt = RotatedBox(hp.cx, hp.cy, g.w, g.h, g.theta)
            tr = decode_transform(hp, encode_transform(hp, gt))
            assert max(abs(tr.cx - gt.cx), abs(tr.cy - gt.cy), abs(tr.w - gt.w), abs(tr.h - gt.h), abs(tr.theta - gt.theta)) <= 1e-6

    def check_normalize():
        for _ in range(300):
            b = rand_rbox()
            n = normalize_angle(b)
            assert abs(n.theta) <= math.pi / 4 + 1e-15
            assert abs(rotated_iou(b, n) - 1.0) <= 1e-9

    def check_nms_brute_force():
        dets = [Detection(rand_rbox(span=120), float(rng.uniform(0, 1)), int(rng.integers(0, 2))) for _ in range(60)]
        kept = rotated_nms(dets, 0.3)
        n = len(dets)
        order = sorted(range(n), key=lambda i: (-dets[i].score, i))
        ref = []
        for i in order:
            if all(
                dets[j].class_id != dets[i].class_id or rotated_iou(dets[i].box, dets[j].box) < 0.3
                for j in ref
            ):
                ref.append(i)
        assert sorted(kept) == sorted(ref)

    def check_ap_fixture():
        ap = average_precision([1, 0, 1], 2)
        assert abs(ap - (0.5 + (2 / 3) * 0.5)) <= 1e-12

    def check_tiling():
        specs = tile_plan(1848, 1848, 1024, 824)
        assert len(specs) == 4
        assert sorted({s.x_off for s in specs}) == [0, 824]

    def check_loss_gradients():
        for _ in range(100):
            x = float(rng.uniform(-3, 3))
            if abs(abs(x) - 1) < 1e-3:
                continue
            _, g = smooth_l1(x)
            fd = (smooth_l1(x + 1e-5)[0] - smooth_l1(x - 1e-5)[0]) / 2e-5
            assert abs(g - fd) <= 1e-5
            p = float(rng.uniform(0.05, 0.95))
            for pstar in (0, 1):
                _, g = bce(p, pstar)
                fd = (bce(p + 1e-5, pstar)[0] - bce(p - 1e-5, pstar)[0]) / 2e-5
                assert abs(g - fd) <= 1e-5

    def check_align_properties():
        f = rng.normal(size=(10, 10, 3))
        g = rng.normal(size=(10, 10, 3))
        b = RotatedBox(5, 5, 6, 4, 0.5)
        cfg = RRoiAlignConfig(k=3, ks=2)
        const = rroi_align(np.full((8, 8, 2), 3.0), RotatedBox(4, 4, 4, 3, 0.2), cfg)
        assert np.max(np.abs(const - 3.0)) <= 1e-12
        lhs = rroi_align(2 * f + 3 * g, b, cfg)
        rhs = 2 * rroi_align(f, b, cfg) + 3 * rroi_align(g, b, cfg)
        assert np.max(np.abs(lhs - rhs)) <= 1e-9

    def check_fmap_round_trip():
        arr = rng.normal(size=(3, 4, 2)).astype(np.float32)
        buf = io.BytesIO()
        write_fmap(buf, arr)
        buf.seek(0)
        assert np.array_equal(read_fmap(buf), arr)

    return [
        ("iou basics", check_iou_basics),
        ("iou monte carlo", check_iou_monte_carlo),
        ("encode/decode round trips", check_round_trips),
        ("angle canonicalization", check_normalize),
        ("nms vs brute force", check_nms_brute_force),
        ("average precision fixture", check_ap_fixture),
        ("tile arithmetic", check_tiling),
        ("loss gradients", check_loss_gradients),
        ("rroi align properties", check_align_properties),
        ("feature map round trip", check_fmap_round_trip),
    ]


def cmd_selftest(args):
    failures = 0
    for name, check in _selftest_checks():
        try:
            check()
        except AssertionError:
            failures += 1
            print(f"FAIL {name}")
        else:
            print(f"ok   {name}")
    if failures:
        print(f"{failures} check(s) failed", file=sys.stderr)
        return 1
    print("all checks passed")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="rboxkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rboxkit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("iou", help="rotated IoU of two boxes")
    p.add_argument("--a", type=float, nargs=5, required=True, metavar=("CX", "CY", "W", "H", "T"))
    p.add_argument("--b", type=float, nargs=5, required=True, metavar=("CX", "CY", "W", "H", "T"))
    p.add_argument("--degrees", action="store_true")
    p.set_defaults(func=cmd_iou)

    p = sub.add_parser("nms", help="rotated NMS over a box CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--iou", type=float, default=0.1)
    p.add_argument("--out")
    p.add_argument("--class-agnostic", action="store_true")
    p.set_defaults(func=cmd_nms)

    p = sub.add_parser("encode", help="encode a regression target")
    p.add_argument("--mode", choices=["hdelta", "transform", "local"], required=True)
    p.add_argument("--anchor", type=float, nargs="+", required=True)
    p.add_argument("--target", type=float, nargs="+", required=True)
    p.add_argument("--degrees", action="store_true")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a regression code")
    p.add_argument("--mode", choices=["hdelta", "transform", "local"], required=True)
    p.add_argument("--anchor", type=float, nargs="+", required=True)
    p.add_argument("--code", type=float, nargs="+", required=True)
    p.add_argument("--degrees", action="store_true")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("anchors", help="generate pyramid anchors")
    p.add_argument("--shapes", nargs="+", required=True, help="per-level HxW, e.g. 32x32")
    p.add_argument("--scales", type=float, nargs="+", required=True)
    p.add_argument("--ratios", type=float, nargs="+", required=True)
    p.add_argument("--strides", type=float, nargs="+", required=True)
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("align", help="rotated RoI align over a feature map")
    p.add_argument("--fmap", required=True)
    p.add_argument("--box", type=float, nargs=5, required=True)
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--ks", type=int, default=2)
    p.add_argument("--out", required=True)
    p.add_argument("--degrees", action="store_true")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("centerpool", help="row/column max center pooling")
    p.add_argument("--fmap", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_centerpool)

    p = sub.add_parser("tile", help="plan crop tiles for an image")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--patch", type=int, default=1024)
    p.add_argument("--stride", type=int, default=824)
    p.add_argument("--source", default="image")
    p.set_defaults(func=cmd_tile)

    p = sub.add_parser("merge", help="merge per-tile detections into the source frame")
    p.add_argument("--manifest", required=True, help="JSON-lines tile manifest")
    p.add_argument("--dets-dir", required=True, help="directory of <tile_id>.csv files")
    p.add_argument("--nms", type=float, default=0.1)
    p.add_argument("--class-agnostic", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("eval", help="evaluate detections against annotations")
    p.add_argument("--dets", required=True, help="box CSV")
    p.add_argument("--gt", required=True, help="annotation text file")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--interp", choices=["allpoint", "11point"], default="allpoint")
    p.add_argument("--keep-difficult", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="emit a synthetic scene for smoke tests")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--width", type=int, default=1848)
    p.add_argument("--height", type=int, default=1848)
    p.add_argument("--boxes", type=int, default=50)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--out-gt", required=True)
    p.add_argument("--out-dets", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RBoxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
