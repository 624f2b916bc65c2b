"""Command-line entry point: ``dfmetric {synth,sample,train,eval,report,mine-stats}``.

Values resolve as defaults < ``--config`` JSON file < explicit flags, and every
run writes its resolved config to ``run_config.json`` beside its outputs, which
can be passed back through ``--config`` to repeat the run.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import os

_threads = os.environ.get("DFMETRIC_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint  # noqa: E402
from .evaluation import (  # noqa: E402
    format_report,
    grouped_report,
    predict_manifest,
    read_predictions_csv,
    video_scores,
    write_predictions_csv,
    write_report_csv,
)
from .ingest import ManifestError, load_manifest, save_manifest  # noqa: E402
from .mining import EASY, HARD, SEMI_HARD, count_categories, pairwise_distances  # noqa: E402
from .model import Network  # noqa: E402
from .sampler import SamplingPlan, SynthSpec, balanced_sample, generate_synthetic_corpus  # noqa: E402
from .trainer import NumericError, label_space_for, manifest_arrays, sub_rng, train, write_history_csv  # noqa: E402
from .types import LossConfig, RecordError, TrainConfig  # noqa: E402

log = logging.getLogger("dfmetric")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

LOSS_CHOICES = {"bce": "none", "bce+ba": "BA", "bce+hphn": "HP_HN", "bce+ephn": "EP_HN"}
LABEL_MODE_CHOICES = {"binary": "binary", "att-categ": "att_categ", "att-dataset": "att_dataset"}

_TRAIN_DEFAULTS = TrainConfig()
DEFAULTS = {
    "synth": {
        "out": None, "seed": 0, "n_videos": 20, "frames_min": 1, "frames_max": 8, "dim": 16,
        "datasets": ["synth_a", "synth_b"], "separation": 4.0, "cluster_std": 0.5, "coherence_std": 0.25,
    },
    "sample": {"manifest": None, "out": None, "target_total": None, "tolerance": 0.05, "seed": 0},
    "train": {
        "train": None, "val": None, "out": None, "loss": "bce", "margin": 0.2, "triplet_weight": 1.0,
        "label_mode": "binary", "epochs": _TRAIN_DEFAULTS.epochs, "batch_size": _TRAIN_DEFAULTS.batch_size,
        "base_lr": _TRAIN_DEFAULTS.base_lr, "weight_decay": _TRAIN_DEFAULTS.weight_decay,
        "layer_decay": _TRAIN_DEFAULTS.layer_decay, "warmup_epochs": _TRAIN_DEFAULTS.warmup_epochs,
        "hidden_dims": list(_TRAIN_DEFAULTS.hidden_dims), "embed_dim": _TRAIN_DEFAULTS.embed_dim,
        "jitter": 0.0, "seed": 0,
    },
    "eval": {"checkpoint": None, "manifest": None, "out": None, "group_by": "dataset", "label_mode": None,
             "threshold": 0.5},
    "report": {"predictions": None, "out": None, "group_by": "dataset", "threshold": 0.5},
    "mine-stats": {"manifest": None, "checkpoint": None, "out": None, "batch_size": 64, "margin": 0.2,
                   "epochs": 1, "label_mode": "binary", "seed": 0},
}
REQUIRED = {
    "synth": ["out"], "sample": ["manifest", "out", "target_total"], "train": ["train", "val", "out"],
    "eval": ["checkpoint", "manifest", "out"], "report": ["predictions", "out"], "mine-stats": ["manifest", "out"],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dfmetric", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON file of option values (flags override it)")
        sp.add_argument("-v", "--verbose", action="store_true")
        return sp

    s = add("synth", "generate a synthetic train/val/test corpus")
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--n-videos", type=int, help="videos per (dataset, class) cell")
    s.add_argument("--frames-min", type=int)
    s.add_argument("--frames-max", type=int)
    s.add_argument("--dim", type=int)
    s.add_argument("--datasets", nargs="+")
    s.add_argument("--separation", type=float)
    s.add_argument("--cluster-std", type=float)
    s.add_argument("--coherence-std", type=float)

    s = add("sample", "balanced per-video subsample of a manifest")
    s.add_argument("--manifest")
    s.add_argument("--out")
    s.add_argument("--target-total", type=int)
    s.add_argument("--tolerance", type=float)
    s.add_argument("--seed", type=int)

    s = add("train", "train encoder + head")
    s.add_argument("--train")
    s.add_argument("--val")
    s.add_argument("--out")
    s.add_argument("--loss", choices=sorted(LOSS_CHOICES))
    s.add_argument("--margin", type=float)
    s.add_argument("--triplet-weight", type=float)
    s.add_argument("--label-mode", choices=sorted(LABEL_MODE_CHOICES))
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--base-lr", type=float)
    s.add_argument("--weight-decay", type=float)
    s.add_argument("--layer-decay", type=float)
    s.add_argument("--warmup-epochs", type=float)
    s.add_argument("--hidden-dims", type=int, nargs="*")
    s.add_argument("--embed-dim", type=int)
    s.add_argument("--jitter", type=float, help="std of Gaussian feature jitter")
    s.add_argument("--seed", type=int)

    s = add("eval", "video-level evaluation of a checkpoint")
    s.add_argument("--checkpoint")
    s.add_argument("--manifest")
    s.add_argument("--out")
    s.add_argument("--group-by", choices=["dataset", "manipulation"])
    s.add_argument("--label-mode", choices=sorted(LABEL_MODE_CHOICES))
    s.add_argument("--threshold", type=float)

    s = add("report", "grouped report from a predictions CSV")
    s.add_argument("--predictions")
    s.add_argument("--out")
    s.add_argument("--group-by", choices=["dataset", "manipulation"])
    s.add_argument("--threshold", type=float)

    s = add("mine-stats", "easy/semi-hard/hard triplet counts per batch")
    s.add_argument("--manifest")
    s.add_argument("--checkpoint")
    s.add_argument("--out")
    s.add_argument("--batch-size", type=int)
    s.add_argument("--margin", type=float)
    s.add_argument("--epochs", type=int)
    s.add_argument("--label-mode", choices=sorted(LABEL_MODE_CHOICES))
    s.add_argument("--seed", type=int)
    return p


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        loaded.pop("command", None)
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise UsageError(f"unknown keys in config file: {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    missing = [k for k in REQUIRED[args.command] if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return cfg


def write_run_config(out_dir: Path, command: str, cfg: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_config.json").write_text(
        json.dumps({"command": command, **cfg}, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_synth(cfg: dict) -> None:
    spec = SynthSpec(
        datasets=tuple(cfg["datasets"]), n_videos_per_cell=cfg["n_videos"],
        frames_per_video=(cfg["frames_min"], cfg["frames_max"]), feature_dim=cfg["dim"],
        separation=cfg["separation"], cluster_std=cfg["cluster_std"],
        video_coherence_std=cfg["coherence_std"], seed=cfg["seed"],
    )
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    for name, manifest in zip(("train", "val", "test"), generate_synthetic_corpus(spec)):
        save_manifest(manifest, out / f"{name}.jsonl")
        log.info("%s: %d samples", name, len(manifest))
    write_run_config(out, "synth", cfg)


def cmd_sample(cfg: dict) -> None:
    manifest = load_manifest(cfg["manifest"])
    plan = SamplingPlan(cfg["target_total"], cfg["seed"], cfg["tolerance"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_manifest(balanced_sample(manifest, plan), out)
    write_run_config(out.parent, "sample", cfg)


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        epochs=cfg["epochs"], batch_size=cfg["batch_size"], base_lr=cfg["base_lr"],
        weight_decay=cfg["weight_decay"], layer_decay=cfg["layer_decay"], warmup_epochs=cfg["warmup_epochs"],
        loss=LossConfig(margin=cfg["margin"], triplet_weight=cfg["triplet_weight"],
                        triplet_variant=LOSS_CHOICES[cfg["loss"]]),
        label_mode=LABEL_MODE_CHOICES[cfg["label_mode"]], hidden_dims=tuple(cfg["hidden_dims"]),
        embed_dim=cfg["embed_dim"], feature_jitter=cfg["jitter"], seed=cfg["seed"],
    )


def cmd_train(cfg: dict, explicit_weight: bool) -> None:
    if cfg["loss"] not in LOSS_CHOICES:
        raise UsageError(f"unknown --loss {cfg['loss']!r}")
    if cfg["label_mode"] not in LABEL_MODE_CHOICES:
        raise UsageError(f"unknown --label-mode {cfg['label_mode']!r}")
    if cfg["loss"] == "bce" and explicit_weight:
        log.warning("--triplet-weight is ignored with --loss bce")
    try:
        config = _train_config(cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    train_m, val_m = load_manifest(cfg["train"]), load_manifest(cfg["val"])
    if config.label_mode == "att_categ":
        untagged = [r.sample_id for m in (train_m, val_m) for r in m if r.is_fake and r.manipulation is None]
        if untagged:
            raise UsageError(f"--label-mode att-categ needs manipulation tags; {len(untagged)} fake samples lack one "
                             f"(first: {untagged[0]})")
    result = train(train_m, val_m, config)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.checkpoint, out / "checkpoint.ckpt")
    write_history_csv(result.history, out / "metrics.csv")
    write_run_config(out, "train", cfg)
    log.info("best epoch %d, val_loss %.6f", result.checkpoint.epoch, result.checkpoint.val_loss)


def _write_reports(report, out: Path) -> None:
    write_report_csv(report, out / "report.csv")
    (out / "report.txt").write_text(format_report(report), encoding="utf-8")


def cmd_eval(cfg: dict) -> None:
    ckpt = load_checkpoint(cfg["checkpoint"])
    if cfg["label_mode"] is not None and LABEL_MODE_CHOICES.get(cfg["label_mode"]) != ckpt.label_mode:
        raise UsageError(f"--label-mode {cfg['label_mode']} does not match checkpoint mode {ckpt.label_mode}")
    manifest = load_manifest(cfg["manifest"])
    frames, probs = predict_manifest(ckpt, manifest)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_predictions_csv(frames, out / "predictions.csv", probs, ckpt.class_names)
    report = grouped_report(video_scores(frames), cfg["group_by"], cfg["threshold"])
    _write_reports(report, out)
    write_run_config(out, "eval", cfg)
    sys.stdout.write(format_report(report))


def cmd_report(cfg: dict) -> None:
    frames = read_predictions_csv(cfg["predictions"])
    report = grouped_report(video_scores(frames), cfg["group_by"], cfg["threshold"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_reports(report, out)
    write_run_config(out, "report", cfg)
    sys.stdout.write(format_report(report))


def mine_stats(manifest, network: Network, space, batch_size: int, margin: float, epochs: int, seed: int):
    """Rows of (epoch, batch, n_easy, n_semi, n_hard, active_fraction) over seeded shuffles."""
    x, y = manifest_arrays(manifest, space)
    rng = sub_rng(seed, "shuffle")
    rows = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(x))
        for b, start in enumerate(range(0, len(x), batch_size)):
            idx = order[start : start + batch_size]
            h = network.encode(x[idx])
            c = count_categories(pairwise_distances(h), y[idx], margin)
            total = c[EASY] + c[SEMI_HARD] + c[HARD]
            active = (c[SEMI_HARD] + c[HARD]) / total if total else 0.0
            rows.append((epoch, b, c[EASY], c[SEMI_HARD], c[HARD], active))
    return rows


def cmd_mine_stats(cfg: dict) -> None:
    manifest = load_manifest(cfg["manifest"])
    if cfg["checkpoint"]:
        ckpt = load_checkpoint(cfg["checkpoint"])
        net = ckpt.network
        space = label_space_for(manifest, ckpt.label_mode)
    else:
        space = label_space_for(manifest, LABEL_MODE_CHOICES[cfg["label_mode"]])
        d = TrainConfig()
        net = Network.init(len(manifest.records[0].features), d.hidden_dims, d.embed_dim, space.num_classes,
                           sub_rng(cfg["seed"], "init"))
    rows = mine_stats(manifest, net, space, cfg["batch_size"], cfg["margin"], cfg["epochs"], cfg["seed"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,batch,n_easy,n_semi,n_hard,active_fraction\n")
        for r in rows:
            fh.write(f"{r[0]},{r[1]},{r[2]},{r[3]},{r[4]},{r[5]!r}\n")
    write_run_config(out.parent, "mine-stats", cfg)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        if args.command == "synth":
            cmd_synth(cfg)
        elif args.command == "sample":
            cmd_sample(cfg)
        elif args.command == "train":
            cmd_train(cfg, explicit_weight=args.triplet_weight is not None)
        elif args.command == "eval":
            cmd_eval(cfg)
        elif args.command == "report":
            cmd_report(cfg)
        else:
            cmd_mine_stats(cfg)
    except UsageError as exc:
        print(f"dfmetric {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"dfmetric {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ManifestError, RecordError, CheckpointError, ValueError, json.JSONDecodeError) as exc:
        print(f"dfmetric {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
