"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage, configuration or
input-consistency error.
"""

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, descriptors as desc_mod, fr, niqe, subjective
from .config import THREADS_ENV, default_threads, describe_keys, load_config
from .evaluation import evaluate_splits
from .features import LAYOUTS, FeatureFile, extract_video
from .forest import ForestModel, LayoutMismatchError, augment_device_index, make_splits, train_forest
from .media_io import frame_count, load_meta, open_video, read_luma, sidecar_path

log = logging.getLogger("hdrpatchmax")


class UsageError(Exception):
    """Bad arguments, configuration, or inputs that do not fit together (exit 2)."""


def _meta_for(path, args):
    overrides = {k: getattr(args, k, None) for k in
                 ("width", "height", "bit_depth", "pixel_format", "fps", "range", "transfer", "gamut")}
    sidecar = getattr(args, "meta", None)
    if sidecar is None and not os.path.exists(sidecar_path(path)):
        if overrides["width"] is None or overrides["height"] is None:
            raise UsageError(f"{path}: no sidecar {sidecar_path(path)} and no --width/--height")
        from .media_io import VideoMeta
        return VideoMeta.from_dict({k: v for k, v in overrides.items() if v is not None})
    return load_meta(path, sidecar, **overrides)


def _video_id(path):
    return os.path.splitext(os.path.basename(path))[0]


def _read_scores(path):
    """``video_id -> (score, content_id or None, device_id or None)``."""
    out = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if not reader.fieldnames or "video_id" not in reader.fieldnames or "score" not in reader.fieldnames:
            raise UsageError(f"{path}: score file needs video_id and score columns")
        for row in reader:
            out[row["video_id"]] = (float(row["score"]), row.get("content_id"), row.get("device_id"))
    return out


def _config(args):
    try:
        overrides = {}
        for item in getattr(args, "set", None) or []:
            key, sep, value = item.partition("=")
            if not sep or "." not in key:
                raise UsageError(f"--set expects section.key=value, got {item!r}")
            overrides[key.strip()] = value.strip()
        return load_config(getattr(args, "config", None), overrides)
    except (ValueError, KeyError, OSError) as e:
        raise UsageError(str(e)) from e


def _threads(args):
    return args.threads if args.threads else default_threads()


# subcommands


def cmd_probe(args):
    for path in args.videos:
        meta = _meta_for(path, args)
        n = frame_count(path, meta)
        lo, hi = np.inf, -np.inf
        for y, _, _ in open_video(path, meta):
            codes = np.rint(y * meta.max_code)
            lo, hi = min(lo, codes.min()), max(hi, codes.max())
        info = {"path": path, "frames": n, "luma_code_min": int(lo), "luma_code_max": int(hi), **meta.to_dict()}
        print(json.dumps(info, sort_keys=True))
    return 0


def cmd_extract(args):
    cfg = _config(args)
    model = niqe.NiqePristineModel.load(args.niqe_model) if args.niqe_model else niqe.default_model()
    threads = _threads(args)
    metas = [(p, _meta_for(p, args)) for p in args.videos]

    def one(item):
        path, meta = item
        try:
            return extract_video(path, meta, cfg, args.layout, model)
        except Exception as e:  # noqa: BLE001  per-video failures are reported, not fatal
            log.error("%s: extraction failed: %s", path, e)
            return None

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, metas))
    else:
        results = [one(m) for m in metas]
    ids = [_video_id(p) for (p, _), r in zip(metas, results) if r is not None]
    rows = [r for r in results if r is not None]
    FeatureFile(args.layout, ids, np.array(rows).reshape(len(rows), -1)).write_csv(args.out)
    failed = len(results) - len(rows)
    if failed:
        log.error("%d of %d videos failed", failed, len(results))
        return 1
    return 0


def _training_data(args):
    ff = FeatureFile.read_csv(args.features)
    scores = _read_scores(args.scores)
    missing = [v for v in ff.video_ids if v not in scores]
    if missing:
        raise UsageError(f"no score for training video(s): {', '.join(missing[:10])}")
    X = ff.matrix
    y = np.array([scores[v][0] for v in ff.video_ids])
    groups = [scores[v][1] for v in ff.video_ids]
    groups = None if any(g in (None, "") for g in groups) else np.array(groups)
    layout = ff.layout_version
    if getattr(args, "device_index", False):
        devices = [scores[v][2] for v in ff.video_ids]
        if any(d in (None, "") for d in devices):
            raise UsageError("--device-index needs a device_id column in the score file")
        X, layout = augment_device_index(X, np.array(devices, dtype=int), layout)
    return ff, X, y, groups, layout


def cmd_train_model(args):
    cfg = _config(args)
    _, X, y, groups, layout = _training_data(args)
    model = train_forest(X, y, hyper_grid=cfg.regressor.grid, seed=args.seed, n_folds=cfg.regressor.n_folds,
                         groups=groups, threads=_threads(args), layout_version=layout)
    model.save(args.out)
    log.info("trained %d trees (max_features=%s) on %d videos", model.n_estimators, model.max_features, len(y))
    return 0


def cmd_predict(args):
    model = ForestModel.load(args.model)
    ff = FeatureFile.read_csv(args.features)
    X, layout = ff.matrix, ff.layout_version
    if args.device_id is not None:
        X, layout = augment_device_index(X, np.full(len(X), args.device_id), layout)
    if layout != model.layout_version:
        raise LayoutMismatchError(f"model was trained on layout {model.layout_version!r}, features are {layout!r}")
    pred = model.predict(X)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["video_id", "prediction"])
        for vid, p in zip(ff.video_ids, pred):
            w.writerow([vid, repr(float(p))])
    return 0


def cmd_evaluate(args):
    cfg = _config(args)
    ff, X, y, groups, _ = _training_data(args)
    if groups is None:
        raise UsageError("evaluate needs a content_id column in the score file")
    splits = make_splits(groups, ratio=args.ratio, n_trials=args.trials, seed=args.seed)
    model_config = {"seed": args.seed, "grid": cfg.regressor.grid, "n_folds": cfg.regressor.n_folds,
                    "groups": groups}
    report = evaluate_splits(X, y, splits, model_config, video_ids=ff.video_ids, workers=_threads(args))
    report.write(args.out_prefix)
    print(json.dumps(report.aggregate(), sort_keys=True))
    return 0 if report.n_failed < report.n_trials else 1


def cmd_mos(args):
    table = subjective.ScoreTable.read_csv(args.scores)
    sol = subjective.solve_mos(table)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["video_id", "device_id", "mos"])
        for (vid, dev), p in zip(sol.items, sol.psi):
            w.writerow([vid, dev, repr(float(p))])
    if args.references:
        refs = {}
        with open(args.references, newline="") as f:
            for row in csv.DictReader(f):
                refs[row["video_id"]] = row["reference_id"]
        d = subjective.dmos(sol, refs)
        with open(args.dmos_out or os.path.splitext(args.out)[0] + "_dmos.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["video_id", "device_id", "dmos"])
            for (vid, dev), v in sorted(d.items()):
                w.writerow([vid, dev, repr(float(v))])
    if args.internal_correlation:
        for dev in sorted(set(table.device.tolist())):
            r = subjective.internal_correlation(table, dev, n_trials=args.trials, seed=args.seed)
            print(json.dumps({"device_id": dev, "median_split_half_r": r}))
    return 0


def cmd_merge(args):
    src, dst = [], []
    with open(args.anchors, newline="") as f:
        for row in csv.DictReader(f):
            src.append(float(row["src"]))
            dst.append(float(row["dst"]))
    mapping = subjective.fit_merge_map(src, dst)
    with open(args.out, "w") as f:
        json.dump(mapping.as_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    if args.apply:
        out = args.apply_out or os.path.splitext(args.apply)[0] + "_mapped.csv"
        with open(args.apply, newline="") as fin, open(out, "w", newline="") as fout:
            reader = csv.DictReader(fin)
            w = csv.writer(fout)
            w.writerow(["video_id", "score", "mapped_score"])
            for row in reader:
                s = float(row["score"])
                w.writerow([row["video_id"], repr(s), repr(float(mapping(s)))])
    return 0


def cmd_descriptors(args):
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["path", "si", "ti", "colorfulness", "avg_luminance"])
        for path in args.videos:
            meta = _meta_for(path, args)
            d = desc_mod.descriptors(open_video(path, meta), meta)
            w.writerow([path] + [repr(v) for v in (d.si, d.ti, d.colorfulness, d.avg_luminance)])
    return 0


def cmd_fr(args):
    ref_meta = _meta_for(args.ref, args)
    dist_meta = _meta_for(args.dist, args)
    if (ref_meta.width, ref_meta.height, ref_meta.bit_depth) != (dist_meta.width, dist_meta.height, dist_meta.bit_depth):
        raise UsageError("reference and distorted videos differ in dimensions or bit depth")
    ref = read_luma(args.ref, ref_meta)
    dist = read_luma(args.dist, dist_meta)
    if len(ref) != len(dist):
        raise UsageError(f"frame counts differ: {len(ref)} vs {len(dist)}")
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["ref", "dist", "psnr_db", "ssim"])
        w.writerow([args.ref, args.dist, repr(fr.psnr(ref, dist)), repr(fr.ssim(ref, dist))])
    return 0


def _corpus_frames(directory, args):
    names = sorted(os.listdir(directory))
    for name in names:
        path = os.path.join(directory, name)
        ext = os.path.splitext(name)[1].lower()
        if ext == ".npy":
            yield np.load(path).astype(np.float64)
        elif ext == ".yuv":
            for y, _, _ in open_video(path, _meta_for(path, args)):
                yield y
        elif ext in (".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp"):
            from PIL import Image
            with Image.open(path) as im:
                a = np.asarray(im.convert("L"), dtype=np.float64)
            yield a / 255.0


def cmd_niqe_train(args):
    frames = list(_corpus_frames(args.corpus, args))
    if not frames:
        raise UsageError(f"{args.corpus}: no .npy, .yuv or image files found")
    model = niqe.train_pristine_model(frames, args.patch_size, args.sharpness_fraction)
    model.save(args.out)
    return 0


# parser


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p.add_argument("--config", help="INI config file with [patchmax] [hdrmax] [stchips] [regressor] sections")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override one config value (repeatable; wins over --config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _video_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("raw video metadata (override the JSON sidecar)")
    g.add_argument("--meta", help="sidecar JSON to use instead of <video>.json")
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--bit-depth", type=int, choices=(8, 10))
    g.add_argument("--pixel-format", choices=("yuv420p", "yuv420p10le"))
    g.add_argument("--fps", type=float)
    g.add_argument("--range", choices=("limited", "full"))
    g.add_argument("--transfer", choices=("pq", "bt709"))
    g.add_argument("--gamut", choices=("bt2020", "bt709"))
    return p


def build_parser():
    epilog = "config keys (defaults):\n" + describe_keys()
    parser = argparse.ArgumentParser(prog="hdrpatchmax", description=__doc__.splitlines()[0],
                                     epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common, video = _common(), _video_flags()

    def add(name, func, help, parents=(common,)):
        p = sub.add_parser(name, help=help, parents=list(parents), epilog=epilog,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = add("probe", cmd_probe, "report metadata, frame count and luma code range", (common, video))
    p.add_argument("videos", nargs="+")

    p = add("extract", cmd_extract, "extract HDRPatchMAX feature vectors", (common, video))
    p.add_argument("videos", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--layout", choices=sorted(LAYOUTS), default="full-v1")
    p.add_argument("--niqe-model", help="pristine model JSON (default: bundled model)")

    p = add("train-model", cmd_train_model, "train the random-forest regressor")
    p.add_argument("--features", required=True)
    p.add_argument("--scores", required=True, help="CSV: video_id, score[, content_id][, device_id]")
    p.add_argument("--out", required=True)
    p.add_argument("--device-index", action="store_true", help="append the device_id column as a feature")

    p = add("predict", cmd_predict, "predict quality with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--device-id", type=int, choices=(1, 2, 3), help="device index for +tv models")

    p = add("evaluate", cmd_evaluate, "repeated content-aware train/test evaluation")
    p.add_argument("--features", required=True)
    p.add_argument("--scores", required=True, help="CSV: video_id, score, content_id[, device_id]")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--device-index", action="store_true")

    p = add("mos", cmd_mos, "MLE MOS (and DMOS) from raw subject scores")
    p.add_argument("--scores", required=True, help="CSV: subject_id, video_id, device_id, score")
    p.add_argument("--out", required=True)
    p.add_argument("--references", help="CSV: video_id, reference_id")
    p.add_argument("--dmos-out")
    p.add_argument("--internal-correlation", action="store_true")
    p.add_argument("--trials", type=int, default=100)

    p = add("merge", cmd_merge, "fit a logistic map between databases from anchor scores")
    p.add_argument("--anchors", required=True, help="CSV: src, dst")
    p.add_argument("--out", required=True)
    p.add_argument("--apply", help="CSV of video_id, score to map")
    p.add_argument("--apply-out")

    p = add("descriptors", cmd_descriptors, "SI, TI, colorfulness and average luminance", (common, video))
    p.add_argument("videos", nargs="+")
    p.add_argument("--out", required=True)

    p = add("fr", cmd_fr, "PSNR and SSIM between aligned videos", (common, video))
    p.add_argument("--ref", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--out", required=True)

    p = add("niqe-train", cmd_niqe_train, "train a NIQE pristine model from a corpus directory", (common, video))
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--patch-size", type=int, default=96)
    p.add_argument("--sharpness-fraction", type=float, default=0.75)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except (UsageError, LayoutMismatchError) as e:
        log.error("%s", e)
        return 2
    except (OSError, ValueError, KeyError, RuntimeError, ArithmeticError) as e:
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
