"""Command-line interface: detect, simulate, evaluate, parity, bench, serve.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.
Commands that draw random numbers require an explicit --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from . import evaluate as eval_mod
from . import images, synth
from .detector import (
    DetectionParams,
    Detector,
    read_blobset_json,
    write_blobset_json,
    write_histogram_csv,
)
from .service import ServiceConfig, serve

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _detector_args(p: argparse.ArgumentParser, require_ladder: bool) -> None:
    p.add_argument("--min-sigma", type=float, required=require_ladder, default=None)
    p.add_argument("--max-sigma", type=float, required=require_ladder, default=None)
    p.add_argument("--n-bin", type=int, required=require_ladder, default=None)
    p.add_argument("--truncate", type=float, default=5.0)
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--neighborhood", type=int, default=3)
    p.add_argument("--backend", choices=("direct", "fft"), default="fft")
    p.add_argument("--no-preprocess", action="store_true")
    p.add_argument("--smooth-sigma", type=float, default=1.0)
    p.add_argument("--saturation", type=float, default=0.0035)


def _params_from_args(args, defaults: DetectionParams | None = None) -> DetectionParams:
    base = defaults or DetectionParams()
    return DetectionParams(
        min_sigma=args.min_sigma if args.min_sigma is not None else base.min_sigma,
        max_sigma=args.max_sigma if args.max_sigma is not None else base.max_sigma,
        n_bin=args.n_bin if args.n_bin is not None else base.n_bin,
        truncate=args.truncate,
        threshold=args.threshold,
        overlap=args.overlap,
        neighborhood=args.neighborhood,
        backend=args.backend,
        preprocess=not args.no_preprocess,
        smooth_sigma=args.smooth_sigma,
        saturation=args.saturation,
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="dogblob", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect blobs in one image")
    p.add_argument("--input", required=True)
    _detector_args(p, require_ladder=True)
    p.add_argument("--out-json", required=True)
    p.add_argument("--out-hist", default=None)

    p = sub.add_parser("simulate", help="render a synthetic droplet scene")
    p.add_argument("--width", type=int, default=1000)
    p.add_argument("--height", type=int, default=1000)
    p.add_argument("--n-spheres", type=int, default=100)
    p.add_argument("--r-min", type=float, required=True)
    p.add_argument("--r-max", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--poisson-scale", type=float, default=None)
    p.add_argument("--gaussian-sigma", type=float, default=None)
    p.add_argument("--allow-overlap", action="store_true")
    p.add_argument("--out-image", required=True)
    p.add_argument("--out-truth", required=True)

    p = sub.add_parser("evaluate", help="score a blob set against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = sub.add_parser("parity", help="compare two backends over a scene directory")
    p.add_argument("--scenes", required=True, help="directory of image files + <stem>.csv truths")
    p.add_argument("--backend-a", choices=("direct", "fft"), default="direct")
    p.add_argument("--backend-b", choices=("direct", "fft"), default="fft")
    _detector_args(p, require_ladder=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="runtime scaling sweeps")
    p.add_argument("--sweep", choices=("n_bin", "max_sigma"), required=True)
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    p.add_argument("--backend", choices=("direct", "fft"), required=True)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--seed", type=int, required=True, help="seed for the benchmark scene")
    p.add_argument("--min-sigma", type=float, default=1.0)
    p.add_argument("--max-sigma", type=float, default=10.0, help="fixed value for n_bin sweeps")
    p.add_argument("--n-bin", type=int, default=10, help="fixed value for max_sigma sweeps")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the analysis HTTP service")
    p.add_argument(
        "--listen",
        default=os.environ.get("DROPLET_LISTEN", "127.0.0.1:8750"),
        help="ADDR:PORT (env DROPLET_LISTEN)",
    )
    p.add_argument(
        "--workers",
        type=int,
        default=int(os.environ.get("DROPLET_WORKERS", "1")),
        help="concurrent detection workers (env DROPLET_WORKERS)",
    )
    p.add_argument("--backlog", type=int, default=4)
    p.add_argument("--max-request-mb", type=float, default=16.0)
    _detector_args(p, require_ladder=False)

    return parser


def _cmd_detect(args) -> int:
    img = images.load_image(args.input)
    params = _params_from_args(args)
    result = Detector(params).run(img)
    write_blobset_json(args.out_json, result.blobs, image_name=Path(args.input).name)
    if args.out_hist:
        write_histogram_csv(args.out_hist, result.histogram)
    print(f"{len(result.blobs)} blobs -> {args.out_json}")
    return 0


def _cmd_simulate(args) -> int:
    scene = synth.render_scene(
        args.width,
        args.height,
        args.n_spheres,
        (args.r_min, args.r_max),
        seed=args.seed,
        allow_overlap=args.allow_overlap,
    )
    if args.poisson_scale is not None or args.gaussian_sigma is not None:
        scene = synth.add_noise(
            scene,
            poisson_scale=args.poisson_scale if args.poisson_scale is not None else 255.0,
            gaussian_sigma=args.gaussian_sigma if args.gaussian_sigma is not None else 0.01,
            seed=args.seed,
        )
    images.save_image(args.out_image, scene.image)
    synth.write_truth_csv(args.out_truth, scene)
    print(f"scene with {len(scene.truths)} spheres -> {args.out_image}")
    return 0


def _cmd_evaluate(args) -> int:
    preds = read_blobset_json(args.pred)
    truths = synth.read_truth_csv(args.truth)
    report = eval_mod.match_voc(preds, truths, args.iou)
    eval_mod.write_report_json(args.out, report)
    print(
        f"precision={report.precision:.4f} recall={report.recall:.4f} "
        f"(tp={report.tp} fp={report.fp} fn={report.fn})"
    )
    return 0


def _cmd_parity(args) -> int:
    scene_dir = Path(args.scenes)
    if not scene_dir.is_dir():
        raise FileNotFoundError(f"scene directory not found: {scene_dir}")
    image_paths = sorted(
        p for p in scene_dir.iterdir() if p.suffix.lower() in (".png", ".tif", ".tiff", ".raw")
    )
    if not image_paths:
        raise FileNotFoundError(f"no scene images in {scene_dir}")
    imgs, truths, names = [], [], []
    for p in image_paths:
        truth_path = p.with_suffix(".csv")
        if not truth_path.is_file():
            raise FileNotFoundError(f"missing truth file {truth_path}")
        imgs.append(images.load_image(p))
        truths.append(synth.read_truth_csv(truth_path))
        names.append(p.stem)
    params = _params_from_args(args)
    stats = eval_mod.parity(
        imgs,
        params_a=DetectionParams(**{**params.to_dict(), "backend": args.backend_a}),
        params_b=DetectionParams(**{**params.to_dict(), "backend": args.backend_b}),
        truths_per_image=truths,
        iou_threshold=args.iou,
    )
    eval_mod.write_parity_csv(args.out, stats, names)
    print(
        f"{len(imgs)} scenes: mean dP={stats.mean_dp:+.2e} mean dR={stats.mean_dr:+.2e}"
    )
    return 0


def _cmd_bench(args) -> int:
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        print(f"error: bad --values list {args.values!r}", file=sys.stderr)
        return USAGE_ERROR
    if not values:
        print("error: --values is empty", file=sys.stderr)
        return USAGE_ERROR
    # benchmark content only has to be realistic, not ground-truthed
    n_spheres = max(4, int(40 * args.width * args.height / 512**2))
    r_max = min(15.0, (min(args.width, args.height) - 4) / 4)
    scene = synth.render_scene(
        args.width,
        args.height,
        n_spheres=n_spheres,
        r_range=(min(3.0, r_max / 2), r_max),
        seed=args.seed,
        allow_overlap=True,
    )
    fixed = DetectionParams(
        min_sigma=args.min_sigma,
        max_sigma=args.max_sigma,
        n_bin=args.n_bin,
        backend=args.backend,
        preprocess=False,
        prune=False,
    )
    if args.sweep == "n_bin":
        records = bench_mod.sweep_n_bin(
            args.backend, [int(v) for v in values], fixed, scene.image, args.reps, args.warmup
        )
    else:
        records = bench_mod.sweep_max_sigma(
            args.backend, values, fixed, scene.image, args.reps, args.warmup
        )
    bench_mod.write_bench_csv(args.out, records)
    for r in records:
        print(
            f"{r.backend} n_bin={r.n_bin} max_sigma={r.max_sigma}: "
            f"median {r.median_ms:.1f} ms [{r.p10_ms:.1f}, {r.p90_ms:.1f}]"
        )
    return 0


def _cmd_serve(args) -> int:
    host, _, port = args.listen.rpartition(":")
    if not host or not port.isdigit():
        print(f"error: bad --listen value {args.listen!r}", file=sys.stderr)
        return USAGE_ERROR
    config = ServiceConfig(
        host=host,
        port=int(port),
        params=_params_from_args(args),
        max_request_bytes=int(args.max_request_mb * 1024 * 1024),
        workers=max(1, args.workers),
        backlog=max(0, args.backlog),
    )
    serve(config)
    return 0


_COMMANDS = {
    "detect": _cmd_detect,
    "simulate": _cmd_simulate,
    "evaluate": _cmd_evaluate,
    "parity": _cmd_parity,
    "bench": _cmd_bench,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
