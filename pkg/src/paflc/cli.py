"""Command-line front end: ``paflc <subcommand> ...``.

Every constant the pipeline needs lives in one JSON run configuration
(``--config``); flags override individual entries.  Data goes to stdout and
files, diagnostics to stderr.  Exit status is 0 on success, 1 on a pipeline
error and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .core import coco17_skeleton, default_skeleton
from .correction import Scope, clamp_teacher, correct_labels, correction_stats
from .errors import PaflcError
from .io_formats import atomic_write, read_annotations, read_labelset, write_annotations, write_labelset
from .labelgen import LabelDiagnostics, LabelGenConfig, generate_labels
from .losses import loss_kd, loss_kd_lc, loss_lc, masked_l2
from .metrics import EvalConfig, evaluate
from .parser import ParserConfig, PoseResult, parse_poses
from .render import render_labels, render_poses
from .synthetic import CorruptionConfig, gen_scene, inject_failures, oracle_teacher

log = logging.getLogger("paflc")

LABEL_SUFFIX = ".plf"

DEFAULT_CONFIG = {
    "skeleton": "coco18",
    "seed": 0,
    "workers": 1,
    "labelgen": {"stride": 8.0, "sigma": None, "limb_width": 1.0},
    "correct": {"scope": "both", "clamp_teacher": True},
    "parser": {
        "peak_threshold": 0.1,
        "n_samples": 10,
        "min_limb_score": 0.05,
        "min_positive_fraction": 0.8,
        "min_parts": 1,
    },
    "eval": {"max_dets": 20},
    "loss": {"lambda": 0.5},
    "synth": {
        "width": 640,
        "height": 640,
        "height_range": [180.0, 260.0],
        "min_gap": 24.0,
        "crowd_regions": 1,
        "teacher_alpha": 1.0,
        "teacher_smooth_sigma": 0.0,
    },
    "render": {"scale": 4},
}


class UsageError(Exception):
    pass


def _merge(base: dict, over: dict, where="config") -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if key not in base:
            raise UsageError(f"{where}: unknown key {key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise UsageError(f"{where}.{key} must be an object")
            out[key] = _merge(base[key], value, f"{where}.{key}")
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: offset {exc.pos}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return _merge(DEFAULT_CONFIG, doc)


def _override(cfg: dict, section: str | None, key: str, value):
    if value is None:
        return
    if section is None:
        cfg[key] = value
    else:
        cfg[section][key] = value


def _skeleton(name):
    if name in ("coco18", "default"):
        return default_skeleton()
    if name == "coco17":
        return coco17_skeleton()
    raise UsageError(f"unknown skeleton {name!r} (coco18 or coco17)")


def _write_json(path, obj):
    atomic_write(path, (json.dumps(obj, indent=1) + "\n").encode("utf-8"))


def _image_key(stem: str):
    return int(stem) if stem.lstrip("-").isdigit() else stem


def _label_files(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    keyed = [(_image_key(p.stem), p) for p in directory.glob("*" + LABEL_SUFFIX)]
    keyed.sort(key=lambda kp: (isinstance(kp[0], str), kp[0]))
    return [p for _, p in keyed]


def _run_pool(fn, jobs, workers):
    """Map ``fn`` over ``jobs`` keeping input order; ``workers > 1`` uses processes."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _labelgen_cfg(cfg, width, height):
    lg = cfg["labelgen"]
    return LabelGenConfig.for_image(width, height, float(lg["stride"]), lg["sigma"], float(lg["limb_width"]))


# -- generate -----------------------------------------------------------------

def _generate_one(job):
    scene, cfg, out = job
    sk = _skeleton(cfg["skeleton"])
    diag = LabelDiagnostics()
    labels = generate_labels(scene.persons, scene.ignore_regions, sk, _labelgen_cfg(cfg, scene.width, scene.height), diag)
    write_labelset(Path(out) / f"{scene.image_id}{LABEL_SUFFIX}", labels)
    return diag.missing_endpoint, diag.degenerate


def cmd_generate(args, cfg):
    sk = _skeleton(cfg["skeleton"])
    scenes = read_annotations(args.annotations, sk)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(s, cfg, str(out)) for s in scenes.values()]
    results = _run_pool(_generate_one, jobs, cfg["workers"])
    persons = sum(len(s.persons) for s in scenes.values())
    skipped = sum(r[0] for r in results)
    degenerate = sum(r[1] for r in results)
    print(f"images={len(jobs)} persons={persons} skipped_limbs={skipped} degenerate_limbs={degenerate}")
    return 0


# -- correct ------------------------------------------------------------------

def _correct_one(job):
    gt_path, teacher_path, out_path, cfg = job
    sk = _skeleton(cfg["skeleton"])
    gt = read_labelset(gt_path, sk)
    teacher = read_labelset(teacher_path, sk)
    if cfg["correct"]["clamp_teacher"]:
        teacher = clamp_teacher(teacher)
    fixed = correct_labels(gt, teacher, Scope.parse(cfg["correct"]["scope"]))
    write_labelset(out_path, fixed)
    return correction_stats(gt, fixed)


def cmd_correct(args, cfg):
    _override(cfg, "correct", "scope", args.scope)
    Scope.parse(cfg["correct"]["scope"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for gt_path in _label_files(args.gt):
        teacher_path = Path(args.teacher) / gt_path.name
        if not teacher_path.is_file():
            raise FileNotFoundError(f"{teacher_path}: no teacher labels for {gt_path.name}")
        jobs.append((str(gt_path), str(teacher_path), str(out / gt_path.name), cfg))
    stats = _run_pool(_correct_one, jobs, cfg["workers"])
    report = {}
    for (gt_path, *_), s in zip(jobs, stats):
        key = Path(gt_path).stem
        report[key] = s
        print(f"{key} cells_changed={s['cells_changed']} map_cells={s['map_cells_changed']} "
              f"paf_cells={s['paf_cells_changed']} mean_norm_delta={s['mean_norm_delta']:.6g}")
    _write_json(out / "stats.json", report)
    return 0


# -- parse --------------------------------------------------------------------

def _parse_one(job):
    path, cfg = job
    sk = _skeleton(cfg["skeleton"])
    labels = read_labelset(path, sk)
    poses = parse_poses(labels, sk, ParserConfig(**cfg["parser"]))
    return {"image_id": _image_key(Path(path).stem), "poses": [p.to_json() for p in poses]}


def cmd_parse(args, cfg):
    for key in ("peak_threshold", "n_samples", "min_limb_score", "min_positive_fraction", "min_parts"):
        _override(cfg, "parser", key, getattr(args, key))
    ParserConfig(**cfg["parser"])
    jobs = [(str(p), cfg) for p in _label_files(args.labels)]
    results = _run_pool(_parse_one, jobs, cfg["workers"])
    _write_json(args.out, results)
    n = sum(len(r["poses"]) for r in results)
    print(f"images={len(results)} poses={n}")
    return 0


# -- eval ---------------------------------------------------------------------

def _load_preds(path, num_parts):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: offset {exc.pos}: {exc.msg}") from None
    if not isinstance(doc, list):
        raise UsageError(f"{path}: results must be a JSON list")
    preds = {}
    for rec in doc:
        poses = [PoseResult.from_json(p) for p in rec["poses"]]
        for p in poses:
            if len(p.parts) != num_parts:
                raise UsageError(f"{path}: image {rec['image_id']}: pose has {len(p.parts)} parts, expected {num_parts}")
        preds.setdefault(rec["image_id"], []).extend(poses)
    return preds


def cmd_eval(args, cfg):
    _override(cfg, "eval", "max_dets", args.max_dets)
    sk = _skeleton(cfg["skeleton"])
    scenes = read_annotations(args.gt, sk)
    preds = _load_preds(args.preds, sk.num_parts)
    unknown = sorted(set(preds) - set(scenes), key=str)
    if unknown:
        raise UsageError(f"predictions for images not in the annotations: {unknown[:10]}")
    gts = {k: list(s.persons) for k, s in scenes.items()}
    preds = {k: preds.get(k, []) for k in gts}
    report = evaluate(preds, gts, sk, EvalConfig(max_dets=int(cfg["eval"]["max_dets"])))
    for line in report.lines():
        print(line)
    out = Path(args.report) if args.report else Path(args.preds).with_suffix(".eval.json")
    _write_json(out, report.to_dict())
    return 0


# -- synth --------------------------------------------------------------------

def _persons_range(text):
    try:
        if "-" in text:
            lo, hi = (int(t) for t in text.split("-", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected K or A-B, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad person range {text!r}")
    return lo, hi


def _corruption(arg) -> dict:
    if arg is None or arg == "none":
        return {}
    path = Path(arg)
    text = path.read_text(encoding="utf-8") if path.is_file() else arg
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--corrupt: offset {exc.pos}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise UsageError("--corrupt must be a JSON object")
    allowed = {"protrusion", "occlusion_rate", "miss_rate", "drop_mask_rate", "occlusion_radius"}
    extra = set(doc) - allowed
    if extra:
        raise UsageError(f"--corrupt: unknown keys {sorted(extra)}")
    return doc


def _synth_one(job):
    index, n_persons, corrupt, cfg, out = job
    sk = _skeleton(cfg["skeleton"])
    sy = cfg["synth"]
    ss = np.random.SeedSequence([int(cfg["seed"]), index])
    scene_seed, corrupt_seed = ss.generate_state(2)
    scene = gen_scene(
        np.random.default_rng(int(scene_seed)), n_persons, (int(sy["width"]), int(sy["height"])), sk,
        height_range=tuple(sy["height_range"]), min_gap=sy["min_gap"],
        crowd_regions=int(sy["crowd_regions"]), image_id=index,
    )
    result = inject_failures(scene, CorruptionConfig(seed=int(corrupt_seed), **corrupt), sk)
    teacher = oracle_teacher(
        result.reference, sk, _labelgen_cfg(cfg, scene.width, scene.height),
        alpha=float(sy["teacher_alpha"]), smooth_sigma=float(sy["teacher_smooth_sigma"]),
    )
    write_labelset(Path(out) / "teacher" / f"{index}{LABEL_SUFFIX}", teacher)
    return result.reference, result.corrupted, [e.to_json() for e in result.ledger]


def cmd_synth(args, cfg):
    if args.n_scenes < 0:
        raise UsageError("--n-scenes must be non-negative")
    for key in ("width", "height"):
        _override(cfg, "synth", key, getattr(args, key))
    corrupt = _corruption(args.corrupt)
    CorruptionConfig(**corrupt)
    out = Path(args.out)
    (out / "teacher").mkdir(parents=True, exist_ok=True)
    lo, hi = args.persons
    count_rng = np.random.default_rng(np.random.SeedSequence([int(cfg["seed"]), 0x5CE7E]))
    counts = count_rng.integers(lo, hi + 1, size=args.n_scenes) if args.n_scenes else []
    jobs = [(i, int(k), corrupt, cfg, str(out)) for i, k in enumerate(counts)]
    results = _run_pool(_synth_one, jobs, cfg["workers"])
    sk = _skeleton(cfg["skeleton"])
    write_annotations(out / "gt_clean.json", [r[0] for r in results], sk)
    write_annotations(out / "gt_corrupted.json", [r[1] for r in results], sk)
    _write_json(out / "ledger.json", {str(i): r[2] for i, r in enumerate(results)})
    changes = sum(len(r[2]) for r in results)
    persons = sum(len(r[0].persons) for r in results)
    print(f"scenes={len(results)} persons={persons} ledger_entries={changes}")
    return 0


# -- render -------------------------------------------------------------------

def _render_labels_one(job):
    path, out, scale, cfg = job
    labels = read_labelset(path, _skeleton(cfg["skeleton"]))
    render_labels(labels, out, Path(path).stem, scale)
    return 3


def cmd_render(args, cfg):
    _override(cfg, "render", "scale", args.scale)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sk = _skeleton(cfg["skeleton"])
    if args.labels:
        jobs = [(str(p), str(out), int(cfg["render"]["scale"]), cfg) for p in _label_files(args.labels)]
        written = sum(_run_pool(_render_labels_one, jobs, cfg["workers"]))
    else:
        preds = _load_preds(args.preds, sk.num_parts)
        dims = {}
        if args.gt:
            dims = {k: s.dims for k, s in read_annotations(args.gt, sk).items()}
        written = 0
        for image_id, poses in preds.items():
            size = dims.get(image_id)
            if size is None:
                pts = [p[:2] for pose in poses for p in pose.parts if p is not None]
                ext = np.max(pts, axis=0) if pts else np.zeros(2)
                size = (max(1, math.ceil(ext[0]) + 8), max(1, math.ceil(ext[1]) + 8))
            render_poses(poses, sk, size, out / f"{image_id}_poses.png")
            written += 1
    print(f"images_written={written}")
    return 0


# -- loss ---------------------------------------------------------------------

def cmd_loss(args, cfg):
    _override(cfg, "loss", "lambda", args.lam)
    lam = float(cfg["loss"]["lambda"])
    sk = _skeleton(cfg["skeleton"])
    if args.mode in ("lc", "kd", "kd_lc") and not args.teacher:
        raise UsageError(f"--mode {args.mode} needs --teacher")
    total_sum = total_cells = 0.0
    for path in _label_files(args.pred):
        pred = read_labelset(path, sk)
        target = read_labelset(Path(args.target) / path.name, sk)
        teacher = read_labelset(Path(args.teacher) / path.name, sk) if args.teacher else None
        if args.mode == "l2":
            res = masked_l2(pred, target)
        elif args.mode == "lc":
            res = loss_lc(pred, correct_labels(target, clamp_teacher(teacher)))
        elif args.mode == "kd":
            res = loss_kd(pred, target, teacher, lam)
        else:
            res = loss_kd_lc(pred, correct_labels(target, clamp_teacher(teacher)), teacher, lam)
        print(f"{path.stem} sum={res.total:.9g} per_cell={res.mean_per_cell:.9g}")
        total_sum += res.total
        total_cells += res.unmasked_cells
    mean = total_sum / total_cells if total_cells else 0.0
    print(f"total sum={total_sum:.9g} per_cell={mean:.9g}")
    return 0


# -- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="random seed (default from config, 0)")
    common.add_argument("--workers", type=int, help="worker processes for per-image work")
    common.add_argument("--skeleton", choices=("coco18", "coco17"))
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="paflc", description="PAF label generation, correction, parsing and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="annotations -> label files")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=float)
    p.add_argument("--sigma", type=float, help="Gaussian sigma in grid cells")
    p.add_argument("--limb-width", type=float, help="PAF half-width in grid cells")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("correct", parents=[common], help="fuse GT labels with teacher labels")
    p.add_argument("--gt", required=True)
    p.add_argument("--teacher", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scope", choices=("maps", "pafs", "both", "maps_only", "pafs_only"))
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("parse", parents=[common], help="label files -> results.json")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--peak-threshold", type=float)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--min-limb-score", type=float)
    p.add_argument("--min-positive-fraction", type=float)
    p.add_argument("--min-parts", type=int)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", parents=[common], help="OKS average precision of results.json")
    p.add_argument("--preds", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", help="JSON report path (default: <preds>.eval.json)")
    p.add_argument("--max-dets", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", parents=[common], help="synthetic scenes, corruption and oracle teacher")
    p.add_argument("--n-scenes", type=int, required=True)
    p.add_argument("--persons", type=_persons_range, default=(1, 4), help="K or A-B (default 1-4)")
    p.add_argument("--corrupt", help="corruption JSON file or inline JSON object, or 'none'")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", parents=[common], help="PNG visualizations")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--labels")
    src.add_argument("--preds")
    p.add_argument("--gt", help="annotations giving image sizes for --preds")
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=int, help="pixels per grid cell for label images")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("loss", parents=[common], help="masked L2 / LC / KD losses between label directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--teacher")
    p.add_argument("--mode", choices=("l2", "lc", "kd", "kd_lc"), default="l2")
    p.add_argument("--lambda", dest="lam", type=float)
    p.set_defaults(func=cmd_loss)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="paflc: %(levelname)s: %(message)s", stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config)
        _override(cfg, None, "seed", args.seed)
        _override(cfg, None, "workers", args.workers)
        _override(cfg, None, "skeleton", args.skeleton)
        if hasattr(args, "stride"):
            _override(cfg, "labelgen", "stride", args.stride)
            _override(cfg, "labelgen", "sigma", args.sigma)
            _override(cfg, "labelgen", "limb_width", args.limb_width)
        _skeleton(cfg["skeleton"])
        log.info("running %s", args.command)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"paflc: error: {exc}", file=sys.stderr)
        return 2
    except (PaflcError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"paflc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
