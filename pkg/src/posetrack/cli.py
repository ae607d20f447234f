"""Command-line entry point: ``posetrack <subcommand> ...``."""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("posetrack")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides the config file)")
    p.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    p.add_argument("--threads", type=int, default=None, help="upper bound on BLAS threads")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posetrack", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("topology", help="print the keypoint topology")
    p.add_argument("--dump", action="store_true", help="index,name CSV of all 33 keypoints")
    p.add_argument("--coco", action="store_true", help="COCO-17 subset as coco_name,index,name CSV")
    _common(p)

    p = sub.add_parser("synth-gen", help="render a synthetic dataset or clip")
    p.add_argument("-n", type=int, required=True, help="number of samples (or frames with --clip)")
    p.add_argument("--out", type=Path, default=Path("synth"), help="output directory")
    p.add_argument("--clip", action="store_true", help="render one continuous clip instead")
    p.add_argument("--canvas", type=int, default=None, help="square canvas side in pixels")
    p.add_argument("--upper-body-fraction", type=float, default=None)
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    _common(p)

    p = sub.add_parser("train", help="train a network on a synthetic dataset")
    p.add_argument("--data", type=Path, help="dataset directory or manifest")
    p.add_argument("--out", type=Path, help="checkpoint to write")
    p.add_argument("--preset", default="full-toy", choices=["full-toy", "lite-toy"])
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--holdout", type=int, default=200, help="last N records are held out")
    p.add_argument("--loss-csv", type=Path, default=None, help="epoch,loss,pck CSV (default: <out>.loss.csv)")
    p.add_argument("--figures-dir", type=Path, default=None, help="write a loss-curve PNG here")
    _common(p)

    p = sub.add_parser("strip", help="remove the heatmap/offset heads from a checkpoint")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _common(p)

    p = sub.add_parser("infer", help="run the network on one image")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--image", type=Path, required=True, help="PPM image")
    p.add_argument(
        "--roi", type=float, nargs=4, metavar=("CX", "CY", "SIDE", "ROT_DEG"),
        help="crop window in image pixels; default is the whole (square) image",
    )
    _common(p)

    p = sub.add_parser("track", help="run the detector-tracker loop over a clip")
    p.add_argument("--clip", type=Path, help="clip directory or manifest")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--detector", choices=["oracle", "null"], default="oracle")
    p.add_argument("--detector-noise", type=float, default=0.0)
    p.add_argument("--out", type=Path, default=None, help="per-frame JSONL (default stdout)")
    p.add_argument("--report", type=Path, default=None, help="Table-style report (.csv or .md)")
    p.add_argument("--figures-dir", type=Path, default=None)
    p.add_argument("--label", default=None)
    _common(p)

    p = sub.add_parser("eval", help="PCK evaluation of a checkpoint on manifests")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--manifest", action="append", default=[], metavar="[NAME=]PATH",
                   help="dataset to score; repeat for several report columns")
    p.add_argument("--range", dest="record_range", default=None, metavar="START:END",
                   help="score only this slice of each manifest")
    p.add_argument("--label", default=None)
    p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    p.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")
    p.add_argument("--figures-dir", type=Path, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--invisible", choices=["exclude", "incorrect"], default=None)
    p.add_argument("--assert-min-pck", type=float, default=None, help="exit 1 if any PCK is lower")
    _common(p)

    p = sub.add_parser("agree", help="PCK agreement between two annotation manifests")
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.add_argument("--tolerance", type=float, default=None)
    _common(p)

    p = sub.add_parser("grad-check", help="finite-difference check of every differentiable op")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--eps", type=float, default=1e-5)
    _common(p)

    p = sub.add_parser("align", help="alignment transform for one manifest record, as JSON")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--padding", type=float, default=None)
    p.add_argument("--crop-size", type=int, default=None)
    _common(p)
    return parser


def _run_config(args):
    from .config import RunConfig, load_run_config

    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _path(arg, cfg, key: str, what: str, must_exist=True) -> Path:
    value = arg if arg is not None else cfg.paths.get(key)
    if value is None:
        raise UsageError(f"{what} is required (flag or paths.{key} in --config)")
    p = Path(value)
    if must_exist and not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def cmd_topology(args, cfg) -> int:
    from .topology import COCO17, COCO_NAMES, keypoint_name, topology_csv

    if args.coco:
        lines = ["coco_name,index,name"]
        lines += [f"{c},{k},{keypoint_name(k)}" for c, k in zip(COCO_NAMES, COCO17.members)]
        sys.stdout.write("\n".join(lines) + "\n")
    else:
        sys.stdout.write(topology_csv())
    return 0


def cmd_synth_gen(args, cfg) -> int:
    from .synthdata import generate_clip, generate_dataset

    synth = cfg.synth
    if args.canvas is not None:
        synth = replace(synth, canvas=args.canvas)
    if args.upper_body_fraction is not None:
        synth = replace(synth, upper_body_fraction=args.upper_body_fraction)
    if args.n <= 0:
        raise UsageError("-n must be positive")
    if args.clip:
        records = generate_clip(args.n, cfg.seed, args.out, canvas=synth.canvas)
    else:
        records = generate_dataset(args.n, cfg.seed, args.out, synth, workers=args.workers)
    print(f"wrote {len(records)} records to {args.out / 'manifest.jsonl'}")
    return 0


def cmd_train(args, cfg) -> int:
    from .posenet import PoseNet, preset, save_model, train
    from .synthdata import load_samples, manifest_path

    data = manifest_path(_path(args.data, cfg, "data", "--data"))
    out = _path(args.out, cfg, "checkpoint", "--out", must_exist=False)
    tcfg = replace(cfg.train, seed=cfg.seed)
    for flag, key in (("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "lr"), ("max_steps", "max_steps")):
        if getattr(args, flag) is not None:
            tcfg = replace(tcfg, **{key: getattr(args, flag)})
    samples = load_samples(data)
    if args.holdout >= len(samples):
        raise UsageError(f"--holdout {args.holdout} leaves no training samples")
    split = len(samples) - args.holdout
    net_cfg = cfg.network_config(preset(args.preset))
    model = PoseNet.create(net_cfg, seed=cfg.seed)
    result = train(model, samples[:split], tcfg, heldout=samples[split:] or None, eval_config=cfg.eval)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out)
    loss_csv = args.loss_csv or out.with_name(out.name + ".loss.csv")
    loss_csv.write_text(result.loss_curve_csv())
    if args.figures_dir:
        from .plotting import loss_curve

        loss_curve(result.history, args.figures_dir / f"{out.stem}_loss.png")
    last = result.history[-1]
    print(f"saved {out} after {result.steps} steps; final loss {last.loss:.5f}, held-out PCK {last.pck:.2f}")
    return 0


def cmd_strip(args, cfg) -> int:
    from .posenet import load_model, save_model, strip_heatmap_head

    model = load_model(args.checkpoint)
    stripped = strip_heatmap_head(model)
    save_model(stripped, args.out)
    print(f"{model.parameter_count()} -> {stripped.parameter_count()} parameters; wrote {args.out}")
    return 0


def cmd_infer(args, cfg) -> int:
    from .geometry import Roi, image_to_crop_normalized
    from .posenet import load_model, predict_in_roi
    from .synthdata import read_ppm

    model = load_model(args.checkpoint)
    image = read_ppm(args.image)
    h, w = image.shape[:2]
    if args.roi is not None:
        cx, cy, side, rot = args.roi
        roi = Roi(cx, cy, side, math.radians(rot))
    else:
        if h != w:
            raise UsageError("non-square image: pass --roi")
        roi = Roi(w / 2.0, h / 2.0, float(w), 0.0)
    pose = predict_in_roi(model, image, roi)
    crop = image_to_crop_normalized(pose, roi)
    json.dump(
        {
            "keypoints": pose.points.round(4).tolist(),
            "crop_keypoints": crop.points.round(6).tolist(),
            "visibility": pose.visibility.round(6).tolist(),
        },
        sys.stdout,
    )
    sys.stdout.write("\n")
    return 0


def _frame_pck(results, records, eval_cfg):
    from .evaluation import pck

    scores = []
    for r, rec in zip(results, records):
        if r.pose is None:
            scores.append(0.0)
        else:
            s = pck(r.pose, rec.pose, eval_cfg).pck
            scores.append(100.0 if math.isnan(s) else s)
    return scores


def cmd_track(args, cfg) -> int:
    import time

    from .evaluation import EvalReport, emit_report, pck, report_from_scores
    from .posenet import load_model
    from .synthdata import manifest_path, read_manifest, read_ppm
    from .synthdata.io import resolve_image
    from .tracker import NetworkModel, NullDetector, OracleDetector, run_clip

    clip = manifest_path(_path(args.clip, cfg, "data", "--clip"))
    ckpt = _path(args.checkpoint, cfg, "checkpoint", "--checkpoint")
    records = read_manifest(clip)
    if not records:
        raise UsageError("clip manifest is empty")
    frames = [read_ppm(resolve_image(clip, r)) for r in records]
    model = load_model(ckpt)
    tracker_cfg = replace(cfg.tracker, crop_size=model.config.input_size)
    if args.detector == "oracle":
        detector = OracleDetector([r.pose for r in records], args.detector_noise, cfg.seed)
    else:
        detector = NullDetector()
    t0 = time.perf_counter()
    clip_result = run_clip(frames, detector, NetworkModel(model), tracker_cfg)
    elapsed = time.perf_counter() - t0
    text = clip_result.to_jsonl()
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)

    per_frame = _frame_pck(clip_result.results, records, cfg.eval)
    tracked = per_frame[1:] if len(per_frame) > 1 else per_frame
    scores = [pck(r.pose, rec.pose, cfg.eval) for r, rec in zip(clip_result.results, records) if r.pose is not None]
    label = args.label or ckpt.stem
    report: EvalReport = report_from_scores(scores, cfg.eval, label, frames=len(frames), seconds=elapsed,
                                            dataset=clip.parent.name or "clip")
    log.info("detector ran at frames %s", clip_result.detector_frames)
    print(
        f"frames {len(frames)}, detector runs {len(clip_result.detector_frames)}, "
        f"mean per-frame PCK after first frame {np.mean(tracked):.2f}, {report.fps:.1f} FPS",
        file=sys.stderr,
    )
    if args.report:
        fmt = "csv" if args.report.suffix == ".csv" else "markdown"
        args.report.write_text(emit_report([report], fmt, cfg.eval.tolerance))
    if args.figures_dir:
        from .plotting import tracking_timeline

        tracking_timeline(clip_result.results, per_frame, args.figures_dir / f"{label}_tracking.png")
    return 0


def _parse_range(text):
    if text is None:
        return slice(None)
    start, _, end = text.partition(":")
    return slice(int(start) if start else None, int(end) if end else None)


def cmd_eval(args, cfg) -> int:
    from .evaluation import emit_report, evaluate_dataset, per_keypoint_csv
    from .posenet import AlignedPredictor, load_model
    from .synthdata import load_samples, manifest_path

    ckpt = _path(args.checkpoint, cfg, "checkpoint", "--checkpoint")
    manifests = args.manifest or ([cfg.paths["data"]] if "data" in cfg.paths else [])
    if not manifests:
        raise UsageError("at least one --manifest is required")
    eval_cfg = cfg.eval
    if args.tolerance is not None:
        eval_cfg = replace(eval_cfg, tolerance=args.tolerance)
    if args.invisible is not None:
        eval_cfg = replace(eval_cfg, invisible=args.invisible)
    model = load_model(ckpt)
    predictor = AlignedPredictor(model, cfg.tracker.roi_padding)
    label = args.label or ckpt.stem
    reports = []
    for spec in manifests:
        name, sep, path = str(spec).partition("=")
        if not sep:
            path = spec
        mpath = manifest_path(_path(path, cfg, "data", "--manifest"))
        if not sep:
            name = mpath.parent.name or "dataset"
        samples = load_samples(mpath)[_parse_range(args.record_range)]
        if not samples:
            raise UsageError(f"no records selected from {path}")
        reports.append(evaluate_dataset(predictor, [(s.image, s.pose) for s in samples], eval_cfg, label, name))
    text = emit_report(reports, args.format, eval_cfg.tolerance)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    if args.figures_dir:
        from .plotting import per_keypoint_pck

        args.figures_dir.mkdir(parents=True, exist_ok=True)
        per_keypoint_pck(reports, args.figures_dir / f"{label}_per_keypoint.png", eval_cfg.tolerance)
        for r in reports:
            (args.figures_dir / f"{label}_{r.dataset}_per_keypoint.csv").write_text(per_keypoint_csv(r))
    if args.assert_min_pck is not None:
        worst = min(r.pck for r in reports)
        if not worst >= args.assert_min_pck:
            print(f"PCK {worst:.2f} is below the required {args.assert_min_pck:.2f}", file=sys.stderr)
            return 1
    return 0


def cmd_agree(args, cfg) -> int:
    from .evaluation import annotator_agreement
    from .synthdata import manifest_path, read_manifest

    eval_cfg = cfg.eval if args.tolerance is None else replace(cfg.eval, tolerance=args.tolerance)
    a = read_manifest(manifest_path(_path(args.a, cfg, "data", "--a")))
    b = read_manifest(manifest_path(_path(args.b, cfg, "data", "--b")))
    rep = annotator_agreement(a, b, eval_cfg)
    print(f"A vs B {rep.a_vs_b.pck:.2f}, B vs A {rep.b_vs_a.pck:.2f}, mean PCK@{eval_cfg.tolerance:g} {rep.pck:.2f}")
    return 0


def cmd_grad_check(args, cfg) -> int:
    from .gradsuite import BUILDERS, TOLERANCE, run_check, stopped_gradient_is_zero

    ok = True
    print("check,seeds,max_rel_error,checked,skipped_kinks,passed")
    for name in BUILDERS:
        o = run_check(name, args.seeds, args.eps)
        ok &= o.passed
        print(f"{o.name},{o.seeds},{o.max_rel_error:.3e},{o.checked},{o.skipped_kinks},{o.passed}")
    zero = stopped_gradient_is_zero(cfg.seed)
    ok &= zero
    print(f"stop_gradient_exact_zero,1,0,1,0,{zero}")
    print(f"tolerance {TOLERANCE:g}: {'PASS' if ok else 'FAIL'}", file=sys.stderr)
    return 0 if ok else 1


def cmd_align(args, cfg) -> int:
    from .geometry import pose_to_roi, roi_to_transform
    from .synthdata import manifest_path, read_manifest

    records = read_manifest(manifest_path(args.manifest))
    if not 0 <= args.index < len(records):
        raise UsageError(f"--index must be in [0, {len(records) - 1}]")
    padding = args.padding if args.padding is not None else cfg.tracker.roi_padding
    crop = args.crop_size if args.crop_size is not None else cfg.tracker.crop_size
    roi = pose_to_roi(records[args.index].pose, padding)
    t = roi_to_transform(roi, crop)
    json.dump(
        {
            "rotation": math.degrees(t.rotation),
            "scale": t.scale,
            "tx": t.tx,
            "ty": t.ty,
            "roi": {"cx": roi.center_x, "cy": roi.center_y, "side": roi.side,
                    "rotation": math.degrees(roi.rotation)},
        },
        sys.stdout,
    )
    sys.stdout.write("\n")
    return 0


COMMANDS = {
    "topology": cmd_topology,
    "synth-gen": cmd_synth_gen,
    "train": cmd_train,
    "strip": cmd_strip,
    "infer": cmd_infer,
    "track": cmd_track,
    "eval": cmd_eval,
    "agree": cmd_agree,
    "grad-check": cmd_grad_check,
    "align": cmd_align,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    limits = contextlib.nullcontext()
    if args.threads is not None:
        from threadpoolctl import threadpool_limits

        limits = threadpool_limits(limits=args.threads)
    try:
        from .config import ConfigError

        cfg = _run_config(args)
        with limits:
            return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"posetrack {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"posetrack {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
