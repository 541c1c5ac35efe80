"""Command-line entry point wiring the pipeline stages together.

Subcommands: features extract, bandwidth scan, dataset filter, dataset
stats, augment, train, evaluate, sweep, attention, fixture generate.
Every command takes --seed where randomness is involved and is deterministic
given it. Exit codes: 0 success, 2 validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .analysis import collect_attention, export_trace
from .audio_io import detect_bandwidth, read_wav
from .augment import AugmentSpec, augment_manifest
from .config import ExperimentConfig, load_config_file, merge_options
from .dataset import Manifest, filter_narrowband, load_manifest, save_manifest, stats
from .errors import MissingFeatures, ValidationError
from .fixture import C19S_PLAN, SMALL_PLAN, generate_corpus
from .interchange import read_feat, write_feat, write_sidecar
from .metrics import report as metrics_report, uar_percent
from .model import CnnSapModel, HeadModel, load_checkpoint
from .spectral import EXTRACTORS, extract, spectrogram_257
from .training import TrainConfig, evaluate, train, write_history_csv


def _feat_path(features_dir: str, uid: str, tag: str) -> str:
    return os.path.join(features_dir, f"{uid}.{tag}.feat")


def _load_items(manifest: Manifest, split: str, features_dir: str, tag: str):
    items = []
    for e in manifest.split_entries(split):
        path = _feat_path(features_dir, e.id, tag)
        if not os.path.exists(path):
            raise MissingFeatures(f"{path} (run `features extract` first)")
        items.append((read_feat(path).data, e.label_index))
    return items


def _build_model(cfg: ExperimentConfig, in_dim: int, dropout_p: float):
    if cfg.family == "cnn":
        return CnnSapModel(in_dim=in_dim, dropout_p=dropout_p, seed=cfg.seed)
    return HeadModel(in_dim=in_dim, k=cfg.k, pooling=cfg.pooling,
                     dropout_p=dropout_p, seed=cfg.seed)


# ---------------------------------------------------------------- commands


def cmd_features_extract(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    names = sorted(n for n in os.listdir(args.input) if n.lower().endswith(".wav"))
    if not names:
        raise MissingFeatures(f"no .wav files in {args.input}")
    for name in names:
        wav_path = os.path.join(args.input, name)
        fm = extract(read_wav(wav_path), args.type)
        stem = os.path.splitext(name)[0]
        out_path = _feat_path(args.out, stem, args.type)
        write_feat(fm, out_path)
        if not args.no_sidecar:
            write_sidecar(out_path, {
                "source_wav": os.path.abspath(wav_path),
                "extractor": args.type,
                "extractor_version": __version__,
                "n_frames": fm.n_frames,
                "dim": fm.dim,
            })
    print(f"extracted {args.type} features for {len(names)} files -> {args.out}")
    return 0


def cmd_bandwidth_scan(args) -> int:
    names = sorted(n for n in os.listdir(args.input) if n.lower().endswith(".wav"))
    if not names:
        raise ValidationError(f"no .wav files in {args.input}")
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "high_band_ratio", "is_narrowband"])
        n_narrow = 0
        for name in names:
            r = detect_bandwidth(read_wav(os.path.join(args.input, name)),
                                 cutoff_hz=args.cutoff, threshold=args.threshold)
            n_narrow += r.is_narrowband
            writer.writerow([name, repr(r.high_band_ratio),
                             "true" if r.is_narrowband else "false"])
    print(f"scanned {len(names)} files, {n_narrow} narrow-band -> {args.out}")
    return 0


def cmd_dataset_filter(args) -> int:
    manifest = load_manifest(args.manifest)
    flags: dict[str, bool] = {}
    with open(args.reports, newline="") as fh:
        for row in csv.DictReader(fh):
            uid = os.path.splitext(row["filename"])[0]
            flags[uid] = row["is_narrowband"] == "true"
    filtered = filter_narrowband(manifest, flags)
    save_manifest(filtered, args.out)
    for split in ("train", "dev", "test"):
        before, after = manifest.class_counts(split), filtered.class_counts(split)
        print(f"{split}: {before['total']} -> {after['total']} "
              f"(positives {before['positive']} -> {after['positive']})")
    return 0


def cmd_dataset_stats(args) -> int:
    payload = json.dumps(stats(load_manifest(args.manifest)), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    print(payload)
    return 0


def cmd_augment(args) -> int:
    manifest = load_manifest(args.manifest)
    spec = AugmentSpec(seed=args.seed)
    extended = augment_manifest(manifest, spec, args.out_dir)
    out_manifest = args.out_manifest or os.path.join(args.out_dir, "manifest.csv")
    save_manifest(extended, out_manifest)
    n_train = len(extended.split_entries("train"))
    print(f"train split now {n_train} items; manifest -> {out_manifest}")
    return 0


def _experiment_config(args) -> tuple[ExperimentConfig, TrainConfig, float]:
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    exp_defaults = {
        "feature": "fbank", "pooling": "sap", "k": 256, "family": "head",
        "seed": 0, "manifest": "", "features_dir": "", "out": "",
        "augmentation": False, "bandwidth_filter": True,
    }
    train_defaults = {
        "steps": 10000, "eval_every": 200, "batch_size": 8,
        "lr": 4e-4, "cnn_lr_peak": 2e-4, "cnn_warmup_steps": 1400,
        "weight_decay": 0.01, "dropout": 0.1, "balanced_sampling": False,
    }
    flag_values = {k: getattr(args, k, None) for k in {**exp_defaults, **train_defaults}}
    merged = merge_options({**exp_defaults, **train_defaults}, file_values, flag_values)

    exp = ExperimentConfig(**{k: merged[k] for k in exp_defaults})
    exp.validate()
    tc = TrainConfig(
        total_steps=merged["steps"], eval_every=merged["eval_every"],
        batch_size=merged["batch_size"], base_lr=merged["lr"],
        cnn_lr_peak=merged["cnn_lr_peak"], cnn_warmup_steps=merged["cnn_warmup_steps"],
        weight_decay=merged["weight_decay"], seed=exp.seed,
        balanced_sampling=bool(merged["balanced_sampling"]),
    )
    return exp, tc, merged["dropout"]


def cmd_train(args) -> int:
    exp, tc, dropout_p = _experiment_config(args)
    if not exp.manifest or not exp.features_dir or not exp.out:
        raise ValidationError("train needs --manifest, --features-dir and --out")
    manifest = load_manifest(exp.manifest)
    train_items = _load_items(manifest, "train", exp.features_dir, exp.feature)
    dev_items = _load_items(manifest, "dev", exp.features_dir, exp.feature)

    model = _build_model(exp, in_dim=train_items[0][0].shape[1], dropout_p=dropout_p)
    result = train(model, train_items, dev_items, tc,
                   ckpt_extra={"feature": exp.feature, "seed": exp.seed})

    with open(exp.out, "wb") as fh:
        fh.write(result.best_state)
    history_path = args.history or exp.out + ".history.csv"
    write_history_csv(result.history, history_path)
    print(f"best dev UAR {uar_percent(result.best_uar)} at step {result.best_step}; "
          f"checkpoint -> {exp.out}")
    return 0


def cmd_evaluate(args) -> int:
    model, desc = load_checkpoint(args.ckpt)
    tag = args.feature or desc.get("feature")
    if not tag:
        raise ValidationError("checkpoint records no feature tag; pass --feature")
    manifest = load_manifest(args.manifest)
    items = _load_items(manifest, args.split, args.features_dir, tag)
    uar_value, confusion = evaluate(model, items)
    payload = json.dumps(metrics_report(confusion), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    print(payload)
    print(f"UAR ({args.split}): {uar_percent(uar_value)}")
    return 0


def _cell_seed(seed: int, feature: str, pooling: str, k: int) -> int:
    return zlib.crc32(f"{seed}|{feature}|{pooling}|{k}".encode()) % (2**31)


def _run_sweep_cell(task: tuple) -> dict:
    (manifest_path, features_dir, feature, pooling, k, seed,
     steps, eval_every, batch_size) = task
    manifest = load_manifest(manifest_path)
    train_items = _load_items(manifest, "train", features_dir, feature)
    dev_items = _load_items(manifest, "dev", features_dir, feature)
    cell_seed = _cell_seed(seed, feature, pooling, k)
    tc = TrainConfig(total_steps=steps, eval_every=eval_every,
                     batch_size=batch_size, seed=cell_seed)
    model = HeadModel(in_dim=train_items[0][0].shape[1], k=k,
                      pooling=pooling, seed=cell_seed)
    result = train(model, train_items, dev_items, tc)
    return {"feature": feature, "pooling": pooling, "k": k,
            "dev_uar": result.best_uar, "best_step": result.best_step}


def cmd_sweep(args) -> int:
    features = [f.strip() for f in args.features.split(",") if f.strip()]
    poolings = [p.strip() for p in args.poolings.split(",") if p.strip()]
    ks = [int(k) for k in args.ks.split(",")]
    for pooling in poolings:
        for k in ks:
            ExperimentConfig(pooling=pooling, k=k).validate()
    tasks = [
        (args.manifest, args.features_dir, feature, pooling, k, args.seed,
         args.steps, args.eval_every, args.batch_size)
        for feature in features for pooling in poolings for k in ks
    ]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            cells = list(pool.map(_run_sweep_cell, tasks))
    else:
        cells = [_run_sweep_cell(t) for t in tasks]

    by_key = {(c["feature"], c["pooling"], c["k"]): c for c in cells}
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "pooling"] + [f"k={k}" for k in ks] + ["feature_best"])
        for feature in features:
            feature_cells = [c for c in cells if c["feature"] == feature]
            best = max(feature_cells, key=lambda c: c["dev_uar"])
            marker = f"{best['pooling']}@k={best['k']}"
            for pooling in poolings:
                row = [feature, pooling]
                row += [uar_percent(by_key[(feature, pooling, k)]["dev_uar"]) for k in ks]
                row.append(marker)
                writer.writerow(row)
    print(f"swept {len(cells)} cells -> {args.out}")
    return 0


def cmd_attention(args) -> int:
    ckpt_paths = [p.strip() for p in args.ckpts.split(",") if p.strip()]
    models = [load_checkpoint(p)[0] for p in ckpt_paths]
    clip = read_wav(args.wav)
    if args.feat:
        feats = read_feat(args.feat)
    elif args.feature in EXTRACTORS:
        feats = extract(clip, args.feature)
    else:
        raise ValidationError(
            f"{args.feature!r} is not a native extractor; pass --feat <file>"
        )
    stem = os.path.splitext(os.path.basename(args.wav))[0]
    trace = collect_attention(models, feats.data, utterance_id=stem,
                              frame_shift_ms=feats.frame_shift_ms)
    csv_path, png_path = export_trace(trace, spectrogram_257(clip), args.out, stem=stem)
    print(f"attention trace -> {csv_path}, overlay -> {png_path}")
    return 0


def cmd_fixture_generate(args) -> int:
    plan = SMALL_PLAN if args.small else C19S_PLAN
    manifest = generate_corpus(args.out, seed=args.seed, duration_s=args.duration, plan=plan)
    counts = {s: manifest.class_counts(s)["total"] for s in ("train", "dev", "test")}
    print(f"fixture corpus -> {args.out} {counts}")
    return 0


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covspeech",
                                description="speech-based COVID-19 screening pipeline")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    feat = sub.add_parser("features", help="frame-feature extraction")
    fsub = feat.add_subparsers(dest="subcommand", required=True)
    fx = fsub.add_parser("extract", help="extract features for a directory of WAVs")
    fx.add_argument("--type", required=True, choices=sorted(EXTRACTORS))
    fx.add_argument("--in", dest="input", required=True)
    fx.add_argument("--out", required=True)
    fx.add_argument("--no-sidecar", action="store_true")
    fx.set_defaults(func=cmd_features_extract)

    band = sub.add_parser("bandwidth", help="bandwidth screening")
    bsub = band.add_subparsers(dest="subcommand", required=True)
    bs = bsub.add_parser("scan", help="scan WAVs and emit a report CSV")
    bs.add_argument("--in", dest="input", required=True)
    bs.add_argument("--out", required=True)
    bs.add_argument("--cutoff", type=float, default=4000.0)
    bs.add_argument("--threshold", type=float, default=1e-3)
    bs.set_defaults(func=cmd_bandwidth_scan)

    ds = sub.add_parser("dataset", help="manifest operations")
    dsub = ds.add_subparsers(dest="subcommand", required=True)
    df = dsub.add_parser("filter", help="drop narrow-band train/dev entries")
    df.add_argument("--manifest", required=True)
    df.add_argument("--reports", required=True, help="CSV from `bandwidth scan`")
    df.add_argument("--out", required=True)
    df.set_defaults(func=cmd_dataset_filter)
    dst = dsub.add_parser("stats", help="per-split class counts as JSON")
    dst.add_argument("--manifest", required=True)
    dst.add_argument("--out")
    dst.set_defaults(func=cmd_dataset_stats)

    aug = sub.add_parser("augment", help="double the train split with augmented twins")
    aug.add_argument("--manifest", required=True)
    aug.add_argument("--out-dir", required=True)
    aug.add_argument("--seed", type=int, default=0)
    aug.add_argument("--out-manifest")
    aug.set_defaults(func=cmd_augment)

    tr = sub.add_parser("train", help="train one classifier")
    tr.add_argument("--config", help="TOML-style key=value file; flags win")
    tr.add_argument("--feature")
    tr.add_argument("--pooling", choices=["mean", "sap"])
    tr.add_argument("--k", type=int)
    tr.add_argument("--family", choices=["head", "cnn"])
    tr.add_argument("--seed", type=int)
    tr.add_argument("--manifest")
    tr.add_argument("--features-dir", dest="features_dir")
    tr.add_argument("--out")
    tr.add_argument("--history")
    tr.add_argument("--steps", type=int)
    tr.add_argument("--eval-every", dest="eval_every", type=int)
    tr.add_argument("--batch-size", dest="batch_size", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--weight-decay", dest="weight_decay", type=float)
    tr.add_argument("--dropout", type=float)
    tr.add_argument("--balanced-sampling", dest="balanced_sampling",
                    action="store_const", const=True)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="score a checkpoint on a split")
    ev.add_argument("--ckpt", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--features-dir", dest="features_dir", required=True)
    ev.add_argument("--split", default="dev", choices=["train", "dev", "test"])
    ev.add_argument("--feature", help="override the tag recorded in the checkpoint")
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_evaluate)

    sw = sub.add_parser("sweep", help="pooling x hidden-size grid for one or more features")
    sw.add_argument("--features", required=True, help="comma-separated tags")
    sw.add_argument("--poolings", default="mean,sap")
    sw.add_argument("--ks", default="128,256,512,768")
    sw.add_argument("--manifest", required=True)
    sw.add_argument("--features-dir", dest="features_dir", required=True)
    sw.add_argument("--out", required=True)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--steps", type=int, default=10000)
    sw.add_argument("--eval-every", dest="eval_every", type=int, default=200)
    sw.add_argument("--batch-size", dest="batch_size", type=int, default=8)
    sw.set_defaults(func=cmd_sweep)

    at = sub.add_parser("attention", help="average attention weights across checkpoints")
    at.add_argument("--ckpts", required=True, help="comma-separated checkpoint paths")
    at.add_argument("--wav", required=True)
    at.add_argument("--feature", required=True)
    at.add_argument("--feat", help="precomputed .feat file for non-native tags")
    at.add_argument("--out", required=True)
    at.set_defaults(func=cmd_attention)

    fix = sub.add_parser("fixture", help="synthetic corpus")
    fixsub = fix.add_subparsers(dest="subcommand", required=True)
    fg = fixsub.add_parser("generate", help="generate the corpus-shaped fixture")
    fg.add_argument("--out", required=True)
    fg.add_argument("--seed", type=int, default=0)
    fg.add_argument("--duration", type=float, default=0.5)
    fg.add_argument("--small", action="store_true",
                    help="toy split sizes instead of the corpus-shaped ones")
    fg.set_defaults(func=cmd_fixture_generate)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - unexpected runtime failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
