"""Command-line entry point: ``hpm <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or runtime failure, 2 usage error,
3 evaluation produced a non-finite metric.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as config_mod, formats
from .audio import MelSpectrogram, griffin_lim, write_wav
from .booster import EMOTIONS
from .config import ABLATION_PRESETS, SIZES
from .data import Dataset
from .errors import HPMError, InvalidConfig, MissingFeature, MissingModel
from .metrics import MelClassifiers, accuracy_eval, score_pair
from .synth import SyntheticSpec, generate_dataset, spec_from_manifest
from .train import (Trainer, evaluate_losses, load_checkpoint, save_checkpoint, synthesize)

log = logging.getLogger("hpm")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_NONFINITE = 0, 1, 2, 3


def _env_seed():
    raw = os.environ.get("HPM_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise InvalidConfig(f"HPM_SEED must be an integer, got {raw!r}") from exc


def _emit(args, payload, text=None):
    if args.json:
        print(json.dumps(payload, sort_keys=True, default=str))
    else:
        print(text if text is not None else "\n".join(f"{k}: {v}" for k, v in payload.items()))


# -- configuration -------------------------------------------------------------

def _data_settings(root):
    """Audio settings recorded by the generator, if the manifest has them."""
    try:
        spec = spec_from_manifest(root)
    except (KeyError, TypeError, ValueError):
        return {}
    return {"audio.sr": spec.sr, "audio.hop": spec.hs, "audio.fps": float(spec.fps),
            "audio.win": spec.win, "model.n_mels": spec.n_mels, "model.scene_dim": spec.scene_dim}


def _data_speakers(root):
    try:
        return spec_from_manifest(root).n_speakers
    except (KeyError, TypeError, ValueError):
        return 0


def build_config(args, data_root=None):
    """defaults -> size -> file -> preset -> dataset settings -> HPM_SEED -> --set."""
    explicit = {}
    if getattr(args, "config", None):
        try:
            explicit.update(config_mod.parse_text(Path(args.config).read_text()))
        except OSError as exc:
            raise InvalidConfig(f"cannot read config {args.config}: {exc}") from exc
    overrides = config_mod.parse_overrides(getattr(args, "set", None))
    explicit.update(overrides)
    cfg = config_mod.load(getattr(args, "config", None), (), getattr(args, "size", None),
                          getattr(args, "preset", None))
    if data_root is not None:
        found = _data_settings(data_root)
        for key, value in found.items():
            if key in explicit and explicit[key] != value:
                raise InvalidConfig(f"{key}={explicit[key]} conflicts with the dataset ({value})")
        cfg = cfg.updated(found)
        speakers = _data_speakers(data_root)
        if speakers > cfg["model.n_speakers"]:
            if "model.n_speakers" in explicit:
                raise InvalidConfig(f"model.n_speakers={explicit['model.n_speakers']} but the dataset has {speakers}")
            cfg = cfg.updated({"model.n_speakers": speakers})
    seed = _env_seed()
    if seed is not None:
        cfg = cfg.updated({"train.seed": seed})
    if overrides:
        cfg = cfg.updated(overrides)
    if getattr(args, "steps", None) is not None:
        cfg = cfg.updated({"train.steps": args.steps})
    return cfg


# -- subcommands ---------------------------------------------------------------

def cmd_synth_data(args):
    seed = args.seed if args.seed is not None else _env_seed()
    spec = SyntheticSpec(
        n_samples=args.n, n_speakers=args.speakers, fps=args.fps, sr=args.sr, hs=args.hop,
        min_frames=args.min_frames, max_frames=args.max_frames,
        seed=1 if seed is None else seed)
    result = generate_dataset(spec, args.out)
    counts = {}
    for e in result["entries"]:
        counts[e["split"]] = counts.get(e["split"], 0) + 1
    _emit(args, {"out": result["root"], "samples": len(result["entries"]), "splits": counts,
                 "seed": spec.seed, "spec_hash": spec.digest()})
    return EXIT_OK


def _write_loss_log(path, reports):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "mel", "pitch", "energy", "emo", "total"])
        for r in reports:
            writer.writerow([r.step] + [f"{v:.9g}" for v in (r.mel, r.pitch, r.energy, r.emo, r.total)])


def _train(cfg, data_root, split="train", label="", snapshots=None):
    """Train on one split; ``snapshots`` maps step -> checkpoint path to save along the way."""
    samples = Dataset(data_root, split).samples
    trainer = Trainer(cfg, samples)
    every = max(1, cfg["train.log_every"])
    snapshots = snapshots or {}

    def progress(rep):
        if rep.step % every == 0:
            log.info("%sstep %d total %.4f mel %.4f pitch %.4f energy %.4f emo %.4f", label,
                     rep.step, rep.total, rep.mel, rep.pitch, rep.energy, rep.emo)
        if rep.step in snapshots:
            save_checkpoint(snapshots[rep.step], trainer.model, trainer.stats, rep.step)

    reports = trainer.fit(cfg["train.steps"], progress)
    return trainer, reports


def cmd_train(args):
    cfg = build_config(args, args.data)
    out = Path(args.out)
    snapshots = {step: out.with_name(f"{out.stem}.step{step}{out.suffix}") for step in args.save_at or ()}
    trainer, reports = _train(cfg, args.data, snapshots=snapshots)
    save_checkpoint(out, trainer.model, trainer.stats, trainer.step,
                    extra={"data": str(args.data), "preset": args.preset or ""})
    log_path = out.with_suffix(".losses.csv")
    _write_loss_log(log_path, reports)
    last = reports[-1].as_dict() if reports else {}
    _emit(args, {"checkpoint": str(out), "loss_log": str(log_path), "steps": trainer.step,
                 "config_hash": cfg.hash(), "final": last,
                 "snapshots": {str(k): str(v) for k, v in snapshots.items() if k <= trainer.step}})
    return EXIT_OK


def _sample_meta(cfg):
    return {"sr": cfg["audio.sr"], "hop": cfg["audio.hop"], "win": cfg["audio.win"],
            "fps": cfg["audio.fps"], "n_mels": cfg["model.n_mels"], "units": "dB"}


def cmd_infer(args):
    model, stats, header = load_checkpoint(args.checkpoint)
    cfg = model.config
    dataset = Dataset(args.data, args.split, require_targets=False)
    if not dataset.samples:
        raise MissingFeature(f"split {args.split!r} of {args.data} is empty")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for res in synthesize(model, dataset.samples, stats, cfg):
        sdir = out / res["id"]
        sdir.mkdir(exist_ok=True)
        formats.write_matrix(sdir / "mel.bin", res["mel"])
        formats.write_json(sdir / "mel.json", dict(_sample_meta(cfg), n_frames=len(res["mel"])))
        formats.write_series(sdir / "pitch.csv", {"log_f0": res["pitch"]})
        formats.write_series(sdir / "energy.csv", {"energy": res["energy"]})
        if res["emotion_logits"] is not None:
            (sdir / "emotion.txt").write_text(f"{int(np.argmax(res['emotion_logits']))}\n")
        entries.append({"id": res["id"], "split": args.split, "path": res["id"]})
    formats.write_manifest(out / "manifest.txt", entries,
                           {"generator": "hpm-infer", "checkpoint": str(args.checkpoint),
                            "config_hash": header["config_hash"]})
    _emit(args, {"out": str(out), "samples": len(entries),
                 "emotion_head": model.has_emotion_head})
    return EXIT_OK


def _read_generated(gen_root, sid):
    sdir = Path(gen_root) / sid
    if not (sdir / "mel.bin").exists():
        raise MissingFeature(f"no generated mel for {sid} under {gen_root}")
    mel = formats.read_matrix(sdir / "mel.bin", 2).astype(np.float64)
    emo = sdir / "emotion.txt"
    return mel, int(emo.read_text().strip()) if emo.exists() else None


def cmd_eval(args):
    ref = Dataset(args.ref, args.split)
    _, gen_entries = formats.read_manifest(args.gen)
    wanted = {e["id"] for e in gen_entries}
    samples = [s for s in ref.samples if s["id"] in wanted]
    if not samples:
        raise MissingFeature(f"no generated samples of split {args.split!r} found in {args.gen}")

    rows, gen_mels, head_hits, nonfinite = [], [], [], False
    for s in samples:
        mel, emo_pred = _read_generated(args.gen, s["id"])
        rep = score_pair(mel, np.asarray(s["mel"], dtype=np.float64))
        nonfinite |= not rep.finite()
        gen_mels.append(mel)
        if emo_pred is not None:
            head_hits.append(emo_pred == s["emotion"])
        rows.append(dict(id=s["id"], **rep.as_dict(),
                         emotion=s["emotion"], emotion_pred="" if emo_pred is None else emo_pred))

    if args.fit_classifier:
        train = Dataset(args.ref, "train")
        clf = MelClassifiers(train.samples[0]["mel"].shape[1], len(EMOTIONS), _n_speakers(ref, train))
        clf.fit([s["mel"] for s in train.samples], [s["emotion"] for s in train.samples],
                [s["speaker"] for s in train.samples], seed=_env_seed() or 0)
        clf.save(args.fit_classifier)
        classifier = args.fit_classifier
    else:
        classifier = args.classifier
    emo_acc = id_acc = None
    if classifier:
        emo_acc, id_acc = accuracy_eval(gen_mels, [s["emotion"] for s in samples],
                                        [s["speaker"] for s in samples], classifier)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else f"{v:.6f}" if isinstance(v, float) else v)
                             for k, v in row.items()})

    def mean_of(key):
        vals = [r[key] for r in rows if r[key] is not None]
        return float(np.mean(vals)) if vals else None

    head_complete = len(head_hits) == len(rows)
    summary = {
        "samples": len(rows),
        "mcd": mean_of("mcd"),
        "mcd_dtw": mean_of("mcd_dtw"),
        "mcd_dtw_sl": mean_of("mcd_dtw_sl"),
        "emotion_head_accuracy": float(np.mean(head_hits)) if head_hits and head_complete else "N/A",
        "emo_acc": emo_acc if emo_acc is not None else "N/A",
        "id_acc": id_acc if id_acc is not None else "N/A",
        "report": str(out),
        "nonfinite": nonfinite,
    }
    summary_path = Path(args.summary) if args.summary else out.with_suffix(".summary.json")
    formats.write_json(summary_path, summary)
    summary["summary"] = str(summary_path)
    _emit(args, summary)
    if nonfinite or any(isinstance(v, float) and not math.isfinite(v) for v in summary.values()):
        print("error: non-finite metric in evaluation", file=sys.stderr)
        return EXIT_NONFINITE
    return EXIT_OK


def _n_speakers(*datasets):
    return max(int(s["speaker"]) for d in datasets for s in d.samples) + 1


def cmd_export_mel(args):
    model, stats, _ = load_checkpoint(args.checkpoint)
    cfg = model.config
    dataset = Dataset(args.data, None, require_targets=False)
    matches = [s for s in dataset.samples if s["id"] == args.sample]
    if not matches:
        raise MissingFeature(f"sample {args.sample!r} not found in {args.data}")
    mel = synthesize(model, matches, stats, cfg)[0]["mel"]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    formats.write_matrix(out, mel)
    meta = dict(_sample_meta(cfg), n_frames=int(mel.shape[0]), id=args.sample,
                layout="4 x uint32 little-endian dims, then float32 row-major")
    sidecar = out.with_name(out.name + ".json")
    formats.write_json(sidecar, meta)
    payload = {"mel": str(out), "sidecar": str(sidecar), "shape": list(mel.shape)}
    if args.wav:
        spec = MelSpectrogram(mel, cfg["audio.sr"], cfg["audio.hop"], cfg["audio.win"])
        write_wav(args.wav, griffin_lim(spec, iters=args.iters), cfg["audio.sr"])
        payload["wav"] = str(args.wav)
    _emit(args, payload)
    return EXIT_OK


def _held_out(trainer, cfg, data_root, split):
    samples = Dataset(data_root, split).samples
    res = evaluate_losses(trainer.model if isinstance(trainer, Trainer) else trainer[0],
                          samples, trainer.stats if isinstance(trainer, Trainer) else trainer[1], cfg)
    res["pitch_energy"] = res["pitch"] + res["energy"]
    if res["emotion_accuracy"] is None:
        res["emotion_accuracy"] = "N/A"
        res["emo"] = "N/A"
    return res


def cmd_ablate(args):
    base = build_config(argparse.Namespace(**dict(vars(args), preset=None)), args.data)
    ablated = base.with_preset(args.preset)
    save_dir = Path(args.save_dir) if args.save_dir else None

    if args.full_checkpoint:
        model, stats, header = load_checkpoint(args.full_checkpoint)
        if model.config != base:
            raise InvalidConfig("--full-checkpoint was trained with a different configuration")
        full = (model, stats)
    else:
        full, _ = _train(base, args.data, label="full ")
        if save_dir:
            save_checkpoint(save_dir / "full.ckpt", full.model, full.stats, full.step)
    variant, _ = _train(ablated, args.data, label=f"{args.preset} ")
    if save_dir:
        save_checkpoint(save_dir / f"{args.preset}.ckpt", variant.model, variant.stats, variant.step)

    full_res = _held_out(full, base, args.data, args.split)
    var_res = _held_out(variant, ablated, args.data, args.split)
    report = {
        "preset": args.preset,
        "switches": ABLATION_PRESETS[args.preset],
        "split": args.split,
        "steps": base["train.steps"],
        "seed": base["train.seed"],
        "full": full_res,
        "ablated": var_res,
        "pitch_energy_delta": var_res["pitch_energy"] - full_res["pitch_energy"],
        "ablated_pitch_energy_higher": var_res["pitch_energy"] > full_res["pitch_energy"],
    }
    if args.out:
        formats.write_json(args.out, report)
    lines = [f"ablation {args.preset} on {args.split} split, {report['steps']} steps, seed {report['seed']}",
             f"{'metric':<18}{'full':>14}{args.preset:>14}"]
    for key in ("mel", "pitch", "energy", "pitch_energy", "emo", "emotion_accuracy"):
        a, b = full_res[key], var_res[key]
        fmt = lambda v: f"{v:>14.5f}" if isinstance(v, float) else f"{v:>14}"
        lines.append(f"{key:<18}{fmt(a)}{fmt(b)}")
    _emit(args, report, "\n".join(lines))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _add_config_args(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--size", choices=sorted(SIZES), default="desk",
                   help="model width preset (default: desk)")
    p.add_argument("--steps", type=int, help="training steps (overrides train.steps)")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="hpm", parents=[common],
                                     description="Expressive visual voice cloning for dubbing.")
    parser.add_argument("--version", action="version", version=f"hpm {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("synth-data", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--n", type=int, default=32, help="number of clips")
    p.add_argument("--seed", type=int, help="generator seed (default: HPM_SEED or 1)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--speakers", type=int, default=4)
    p.add_argument("--fps", type=float, default=20.0)
    p.add_argument("--sr", type=int, default=16000)
    p.add_argument("--hop", type=int, default=200)
    p.add_argument("--min-frames", type=int, default=8)
    p.add_argument("--max-frames", type=int, default=16)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", parents=[common], help="train a model on a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", default="model.ckpt", help="checkpoint path")
    p.add_argument("--preset", choices=sorted(ABLATION_PRESETS), help="ablation switch preset")
    p.add_argument("--save-at", type=int, action="append", metavar="STEP",
                   help="also save a snapshot after this step (repeatable)")
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[common], help="generate mels for a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=formats.SPLITS)
    p.add_argument("--out", required=True, help="output directory for generated features")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", parents=[common], help="score generated mels against references")
    p.add_argument("--ref", required=True, help="reference dataset directory")
    p.add_argument("--gen", required=True, help="directory written by infer")
    p.add_argument("--split", default="test", choices=formats.SPLITS)
    p.add_argument("--out", default="eval.csv", help="per-sample CSV report")
    p.add_argument("--summary", help="summary JSON (default: next to the CSV)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--classifier", help="saved emotion/identity classifiers")
    group.add_argument("--fit-classifier", metavar="PATH",
                       help="fit classifiers on the reference train split and save them here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-mel", parents=[common], help="export one generated mel")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--sample", required=True, help="sample id")
    p.add_argument("--out", required=True, help="binary mel path (a .json sidecar is added)")
    p.add_argument("--wav", help="also render audio with Griffin-Lim")
    p.add_argument("--iters", type=int, default=60, help="Griffin-Lim iterations")
    p.set_defaults(func=cmd_export_mel)

    p = sub.add_parser("ablate", parents=[common],
                       help="train full and ablated models under one budget and compare")
    p.add_argument("--data", required=True)
    p.add_argument("--preset", required=True, choices=sorted(ABLATION_PRESETS))
    p.add_argument("--split", default="test", choices=formats.SPLITS, help="held-out split")
    p.add_argument("--full-checkpoint", help="reuse an already trained full model")
    p.add_argument("--save-dir", help="keep both checkpoints here")
    p.add_argument("--out", help="report JSON path")
    _add_config_args(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (HPMError, OSError) as exc:
        kind = "missing model" if isinstance(exc, MissingModel) else type(exc).__name__
        print(f"error ({kind}): {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
