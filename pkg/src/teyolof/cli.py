"""Command-line interface: data preparation, training, evaluation and inspection."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import TEYOLOFConfig, load_config, save_config
from .errors import TEYOLOFError

CLASS_COLOURS = np.array([[255, 215, 0], [220, 20, 60], [30, 144, 255]], dtype=np.uint8)


def _floats(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in raw.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from None


def _ints(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}") from None


def _existing(raw: str) -> Path:
    path = Path(raw)
    if not path.exists():
        raise argparse.ArgumentTypeError(f"no such file or directory: {raw}")
    return path


def _model_config(args) -> TEYOLOFConfig:
    return load_config(args.config) if getattr(args, "config", None) else TEYOLOFConfig()


def _subset_samples(args):
    from .data import load_samples, read_manifest

    samples = load_samples(args.annotations, args.images)
    if getattr(args, "manifest", None):
        wanted = set(getattr(read_manifest(args.manifest), args.subset))
        samples = [s for s in samples if s.image_id in wanted]
    return samples


def _post(args):
    from .detection import PostprocessConfig

    return PostprocessConfig(score_threshold=args.score_threshold, nms_threshold=args.nms,
                             max_detections=args.max_detections)


def _load_model(args):
    from .model import TEYOLOF
    from .training import load_checkpoint

    cfg = load_config(args.config)
    model = TEYOLOF(cfg)
    load_checkpoint(args.checkpoint, model)
    return model.eval()


# -- subcommands ------------------------------------------------------------

def cmd_synth(args) -> int:
    from .data import save_samples, synth_generate

    samples = synth_generate(args.n, args.seed, args.size)
    path = save_samples(samples, args.out)
    print(f"wrote {len(samples)} images and {path}")
    return 0


def cmd_convert(args) -> int:
    from .data import voc_to_annotations, write_coco_json

    paths = []
    for p in args.inputs:
        paths.extend(sorted(p.glob("*.xml")) if p.is_dir() else [p])
    if not paths:
        raise TEYOLOFError("no VOC XML files found")
    dataset = voc_to_annotations(paths)
    if args.image_ext:
        for e in dataset.images:
            e.file_name = str(Path(e.file_name).with_suffix(args.image_ext))
    write_coco_json(args.out, dataset)
    counts = dataset.object_counts()
    print(f"converted {len(dataset)} images: " + ", ".join(f"{k} {v}" for k, v in counts.items()))
    return 0


def cmd_split(args) -> int:
    from .data import read_coco_json, split_dataset, write_manifest

    dataset = read_coco_json(args.annotations)
    split = split_dataset([e.image_id for e in dataset.images], args.ratios, args.seed)
    write_manifest(args.out, split)
    by_id = dataset.by_id()
    for name, ids in split.subsets().items():
        objects = sum(len(by_id[i].labels) for i in ids)
        print(f"{name:<5} {len(ids):4d} images {objects:6d} objects")
    return 0


def cmd_train(args) -> int:
    from .training import TrainConfig, train

    samples = _subset_samples(args)
    val = None
    if args.manifest and args.val_subset:
        from .data import load_samples, read_manifest

        wanted = set(getattr(read_manifest(args.manifest), args.val_subset))
        val = [s for s in load_samples(args.annotations, args.images) if s.image_id in wanted]
    cfg = TrainConfig(batch_size=args.batch_size, base_lr=args.lr, warmup_iters=args.warmup, epochs=args.epochs,
                      momentum=args.momentum, weight_decay=args.weight_decay, lr_drop_epochs=args.drop_epochs,
                      seed=args.seed, phi=args.phi, activation=args.activation, resolution=args.resolution,
                      augment=args.augment, eval_every=args.eval_every, dtype=args.dtype)
    _, log = train(cfg, samples, val, _model_config(args), args.out, max_iters=args.max_iters,
                   verbose=not args.quiet)
    last = log.evaluations[-1] if log.evaluations else None
    summary = {"iterations": len(log.iterations), "final_loss": log.final_loss()}
    if last is not None:
        summary.update(ap50=last["result"]["ap50"], map40=last["map40"])
    print(json.dumps(summary))
    return 0


def cmd_eval(args) -> int:
    from .data import prepare
    from .evaluation import format_report, write_report_json
    from .inference import evaluate

    model = _load_model(args)
    samples = prepare(_subset_samples(args), model.cfg.resolution)
    result, map40, _ = evaluate(model, samples, args.batch_size, _post(args), args.map_iou)
    report = format_report(result, map40)
    print(report, end="")
    if args.report:
        Path(args.report).write_text(report, encoding="utf-8")
    if args.json:
        write_report_json(args.json, result, map40)
    return 0


def draw_boxes(image: np.ndarray, dets, thickness: int = 1) -> np.ndarray:
    """Copy of ``image`` with each detection's box outlined in its class colour."""
    out = image.copy()
    h, w = out.shape[:2]
    for d in dets:
        x1, y1, x2, y2 = (int(round(v)) for v in d.box)
        x1, x2 = max(0, min(x1, w - 1)), max(0, min(x2, w - 1))
        y1, y2 = max(0, min(y1, h - 1)), max(0, min(y2, h - 1))
        colour = CLASS_COLOURS[d.class_id % len(CLASS_COLOURS)]
        for t in range(thickness):
            out[min(y1 + t, h - 1), x1:x2 + 1] = colour
            out[max(y2 - t, 0), x1:x2 + 1] = colour
            out[y1:y2 + 1, min(x1 + t, w - 1)] = colour
            out[y1:y2 + 1, max(x2 - t, 0)] = colour
    return out


def cmd_detect(args) -> int:
    from .data import Sample, read_ppm, resize_to, write_ppm
    from .detection.postprocess import write_detections
    from .inference import predict

    model = _load_model(args)
    paths = []
    for p in args.inputs:
        paths.extend(sorted(p.glob("*.ppm")) if p.is_dir() else [p])
    if not paths:
        raise TEYOLOFError("no PPM images given")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    r = model.cfg.resolution
    samples = [resize_to(Sample(read_ppm(p), np.zeros((0, 4)), [], i, str(p)), r)
               for i, p in enumerate(paths, 1)]
    dets = predict(model, samples, args.batch_size, _post(args))
    for s in samples:
        write_ppm(out / f"{Path(s.source_path).stem}_det.ppm", draw_boxes(s.image, dets[s.image_id]))
    write_detections(out / "detections.txt", out / "detections.json", dets)
    total = sum(len(v) for v in dets.values())
    print(f"{len(samples)} images, {total} detections written to {out}")
    return 0


def cmd_params(args) -> int:
    from dataclasses import replace

    from .model import TEYOLOF
    from .nn import flops_estimate, param_count

    cfg = _model_config(args)
    cfg.scaling = replace(cfg.scaling, phi=args.phi)
    if args.resolution is not None:
        cfg.input_resolution = args.resolution
    model = TEYOLOF(cfg)
    r = cfg.resolution
    params = param_count(model)
    flops = flops_estimate(model, (1, 3, r, r))
    print(f"phi {args.phi:g}  resolution {r}  params {params}  ({params / 1e6:.2f}M)  "
          f"GFLOPs {flops / 1e9:.3f}")
    return 0


def cmd_gradcheck(args) -> int:
    from .checks import TOLERANCE, gradient_suite

    results = gradient_suite(range(args.seeds))
    worst: dict[str, float] = {}
    for r in results:
        worst[r.name] = max(worst.get(r.name, 0.0), r.error)
    failed = [n for n, e in worst.items() if not e < TOLERANCE]
    for name, err in worst.items():
        print(f"{'ok  ' if err < TOLERANCE else 'FAIL'} {name:<28} max rel err {err:.3e}")
    print(f"{len(worst) - len(failed)}/{len(worst)} checks within {TOLERANCE:g}")
    return 1 if failed else 0


def cmd_config(args) -> int:
    save_config(args.out, TEYOLOFConfig())
    print(f"wrote default model config to {args.out}")
    return 0


# -- parser -----------------------------------------------------------------

def _add_post(p) -> None:
    p.add_argument("--nms", type=float, default=0.6, help="class-wise NMS IoU threshold")
    p.add_argument("--score-threshold", type=float, default=0.01)
    p.add_argument("--max-detections", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=4)


def _add_data(p, manifest=True) -> None:
    p.add_argument("--annotations", type=_existing, required=True, help="COCO JSON")
    p.add_argument("--images", type=_existing, required=True, help="directory of PPM images")
    if manifest:
        p.add_argument("--manifest", type=_existing, help="split manifest restricting the images")
        p.add_argument("--subset", choices=("train", "val", "test"), default="train")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teyolof", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic blood-smear dataset")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert", help="VOC XML files or directories -> COCO JSON")
    p.add_argument("inputs", nargs="+", type=_existing)
    p.add_argument("--out", required=True)
    p.add_argument("--image-ext", help="rewrite image file suffixes, e.g. .ppm after converting the JPEGs")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("split", help="seeded train/val/test manifest")
    p.add_argument("--annotations", type=_existing, required=True)
    p.add_argument("--ratios", type=_floats, default=(0.7, 0.2, 0.1))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model")
    _add_data(p)
    p.add_argument("--val-subset", choices=("train", "val", "test"), help="evaluate on this manifest subset")
    p.add_argument("--config", type=_existing, help="model config file")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.015)
    p.add_argument("--warmup", type=int, default=1500)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--drop-epochs", type=_ints, default=(8, 11))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--activation", choices=("mish", "relu", "swish"), default="mish")
    p.add_argument("--resolution", type=int)
    p.add_argument("--augment", action="store_true")
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--dtype", choices=("float64", "float32"), default="float64")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="COCO metrics of a checkpoint")
    _add_data(p)
    p.add_argument("--config", type=_existing, required=True)
    p.add_argument("--checkpoint", type=_existing, required=True)
    p.add_argument("--map-iou", type=float, default=0.4)
    p.add_argument("--report", help="write the text table here")
    p.add_argument("--json", help="write the structured result here")
    _add_post(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("detect", help="detect cells and write box-overlaid PPMs")
    p.add_argument("inputs", nargs="+", type=_existing, help="PPM files or directories")
    p.add_argument("--config", type=_existing, required=True)
    p.add_argument("--checkpoint", type=_existing, required=True)
    p.add_argument("--out", required=True)
    _add_post(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("params", help="trainable parameters and GFLOPs")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--resolution", type=int, help="default: 416 scaled by gamma^phi")
    p.add_argument("--config", type=_existing)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op and block")
    p.add_argument("--seeds", type=int, default=10)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("config", help="write the default model config file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (TEYOLOFError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
