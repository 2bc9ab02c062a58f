"""Command-line front end: one binary, subcommand style.

    frozen-align inspect STORE [--head N]
    frozen-align train  --config train.json  [--seed --out --max-steps --batch-size --tau]
    frozen-align eval   --config task.json --checkpoint CKPT [--out --verbose]
    frozen-align viterb --config bench.json [--dataset NAME --out --seed]

The config file is the source of truth; flags override. All randomness flows
from one root seed, and every report records a digest of the resolved config.

Exit codes: 0 ok, 1 config/validation error, 2 corrupt store, 3 non-finite
loss, 4 missing embedding, 5 split overlap or train/eval leak.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CORRUPT = 2
EXIT_NONFINITE = 3
EXIT_MISSING_EMBEDDING = 4
EXIT_LEAK = 5


def _cap_threads() -> None:
    """FROZEN_ALIGN_THREADS caps BLAS parallelism; must run before numpy loads."""
    cap = os.environ.get("FROZEN_ALIGN_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    with open(p, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def cmd_inspect(args) -> int:
    from .errors import FrozenAlignError
    from .store import open_store

    try:
        handle = open_store(args.store)
    except FrozenAlignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    h = handle.header
    print(f"store:    {args.store}")
    print(f"modality: {h.modality.value}")
    print(f"dim:      {h.dim}")
    print(f"count:    {h.count}")
    print(f"version:  {h.version}")
    if args.head:
        import numpy as np
        for rid in handle.ids[:args.head]:
            vec = handle.get_by_id(rid)
            print(f"  {rid}  norm={float(np.linalg.norm(vec)):.4f}")
    return EXIT_OK


def _resolve_train_config(cfg: dict, args) -> "TrainConfig":
    from .optim import AdamConfig
    from .projection import ProjectionConfig
    from .trainer import TrainConfig

    tr = dict(cfg.get("train", {}))
    if args.seed is not None:
        tr["seed"] = args.seed
    if args.max_steps is not None:
        tr["max_steps"] = args.max_steps
    if args.batch_size is not None:
        tr["batch_size"] = args.batch_size
    if args.tau is not None:
        tr["tau"] = args.tau
    proj = dict(cfg["projection"])
    proj.setdefault("seed", tr.get("seed", 0))  # one root seed
    return TrainConfig(
        projection=ProjectionConfig.from_dict(proj),
        optimizer=AdamConfig.from_dict(cfg.get("optimizer", {})),
        **tr,
    )


def cmd_train(args) -> int:
    from .errors import FrozenAlignError, NonFiniteLoss
    from .store import build_pairs, open_store
    from .trainer import train
    from .util import config_digest

    try:
        cfg = _load_json(args.config)
        data = cfg["data"]
        vision = open_store(_require_file(data["vision_store"], "vision store"))
        text = open_store(_require_file(data["text_store"], "text store"))
        manifest = _require_file(data["manifest"], "pair manifest")
        dataset = build_pairs(vision, text, manifest)
        train_config = _resolve_train_config(cfg, args)
        out_dir = Path(args.out or cfg.get("out_dir", "runs/train"))
    except NonFiniteLoss:
        raise
    except (FrozenAlignError, FileNotFoundError, KeyError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    digest = config_digest(train_config.to_dict())
    print(f"dataset: {dataset.n_images} images, {dataset.n_captions} captions; "
          f"config digest {digest}")
    try:
        report = train(train_config, dataset, out_dir=out_dir)
    except NonFiniteLoss as exc:
        print(f"error: non-finite loss: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except FrozenAlignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    payload = report.to_dict()
    payload["config_digest"] = digest
    payload["config"] = train_config.to_dict()
    with open(out_dir / "train_report.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    print(f"steps_run={report.steps_run}  final_train_loss={report.final_train_loss}  "
          f"best_val_loss={report.best_val_loss} (step {report.best_val_step})")
    print(f"report: {out_dir / 'train_report.json'}")
    return EXIT_OK


def _load_reps(spec: dict, classes: list[str] | None):
    from .class_reps import RepKind, expand_templates, load_rep_dir, load_template_file

    kind = RepKind(spec["kind"])
    if kind is RepKind.TEMPLATES:
        if classes is None:
            raise ValueError("template representations need a class list")
        templates = load_template_file(_require_file(spec["templates_file"], "template file"))
        reps = expand_templates(classes, templates)
    else:
        reps = load_rep_dir(spec["dir"], kind)
    return reps.with_store_ids()


def _classes_from(cfg: dict) -> list[str] | None:
    if "classes" in cfg:
        return list(cfg["classes"])
    if "classes_file" in cfg:
        with open(_require_file(cfg["classes_file"], "class list"), encoding="utf-8") as fh:
            return [line.strip() for line in fh if line.strip()]
    return None


def _write_report(report, out_dir: Path, digest: str) -> None:
    report.config_digest = digest
    out_dir.mkdir(parents=True, exist_ok=True)
    base = out_dir / f"eval_{report.task}"
    with open(base.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    with open(base.with_suffix(".txt"), "w", encoding="utf-8") as fh:
        fh.write(report.render() + "\n")
    print(report.render())
    print(f"report: {base.with_suffix('.json')}")


def cmd_eval(args) -> int:
    from .class_reps import build_classifier
    from .errors import FrozenAlignError, KExceedsCorpus, MissingEmbedding
    from .store import open_store, parse_pair_manifest
    from .trainer import load_net
    from .util import config_digest
    from .zeroshot import (
        eval_caption_choice,
        eval_classification,
        eval_retrieval,
        eval_winoground,
        load_caption_choice_manifest,
        load_label_manifest,
        load_winoground_manifest,
    )

    try:
        cfg = _load_json(args.config)
        task = cfg["task"]
        net, _ = load_net(_require_file(args.checkpoint, "checkpoint"))
        vision = open_store(_require_file(cfg["vision_store"], "vision store"))
        text = open_store(_require_file(cfg["text_store"], "text store"))
        out_dir = Path(args.out or cfg.get("out_dir", "runs/eval"))
        digest = config_digest(cfg)

        if task == "classification":
            labels = load_label_manifest(_require_file(cfg["labels"], "label manifest"))
            reps = _load_reps(cfg["reps"], _classes_from(cfg))
            classifier = build_classifier(reps, net, text)
            feats = vision.get_rows([img for img, _ in labels])
            report = eval_classification(
                feats, [c for _, c in labels], classifier,
                mode=cfg.get("mode", "top1"), dataset=cfg.get("dataset", ""),
            )
        elif task == "retrieval":
            pairs = parse_pair_manifest(_require_file(cfg["pairs_manifest"], "pair manifest"))
            image_ids = [img for img, _ in pairs]
            text_ids, t2i = [], []
            for img_idx, (_, caps) in enumerate(pairs):
                for cid in caps:
                    text_ids.append(cid)
                    t2i.append(img_idx)
            from .zeroshot import embed_images, embed_texts
            report = eval_retrieval(
                embed_images(vision, image_ids), embed_texts(net, text, text_ids),
                t2i, int(cfg["k"]), dataset=cfg.get("dataset", ""),
            )
        elif task == "winoground":
            items = load_winoground_manifest(_require_file(cfg["items"], "item manifest"))
            report = eval_winoground(items, net, vision, text,
                                     dataset=cfg.get("dataset", ""), verbose=args.verbose)
        elif task == "caption_choice":
            items = load_caption_choice_manifest(_require_file(cfg["items"], "item manifest"))
            report = eval_caption_choice(items, net, vision, text,
                                         dataset=cfg.get("dataset", ""))
        else:
            raise ValueError(f"unknown task {task!r}")
    except MissingEmbedding as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_EMBEDDING
    except KExceedsCorpus as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FrozenAlignError, FileNotFoundError, KeyError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _write_report(report, out_dir, digest)
    return EXIT_OK


def cmd_viterb(args) -> int:
    from .errors import FrozenAlignError, LeakDetected, NonFiniteLoss, OverlapDetected
    from .optim import AdamConfig
    from .projection import ProjectionConfig
    from .store import open_store
    from .trainer import TrainConfig
    from .util import config_digest
    from .viterb import aggregate, load_or_make_split, run_viterb
    from .zeroshot import load_label_manifest

    try:
        cfg = _load_json(args.config)
        datasets = cfg["datasets"]
        if args.dataset:
            datasets = [d for d in datasets if d["name"] == args.dataset]
            if not datasets:
                raise ValueError(f"no dataset named {args.dataset!r} in config")
        tr = dict(cfg.get("train", {}))
        if args.seed is not None:
            tr["seed"] = args.seed
        proj = dict(cfg["projection"])
        proj.setdefault("seed", tr.get("seed", 0))
        config = TrainConfig(
            projection=ProjectionConfig.from_dict(proj),
            optimizer=AdamConfig.from_dict(cfg.get("optimizer", {})),
            **tr,
        )
        out_dir = Path(args.out or cfg.get("out_dir", "runs/viterb"))
        out_dir.mkdir(parents=True, exist_ok=True)
        digest = config_digest(cfg)

        entries = []
        for dcfg in datasets:
            split = load_or_make_split(dcfg["name"], dcfg["split"])
            vision = open_store(_require_file(dcfg["vision_store"], "vision store"))
            text = open_store(_require_file(dcfg["text_store"], "text store"))
            train_labels = load_label_manifest(_require_file(dcfg["train_labels"], "train labels"))
            eval_labels = load_label_manifest(_require_file(dcfg["eval_labels"], "eval labels"))
            reps = _load_reps(dcfg["reps"], list(split.seen) + list(split.unseen))
            entry = run_viterb(split, vision, train_labels, eval_labels, reps, text,
                               config, out_dir=out_dir / dcfg["name"])
            print(f"{entry.dataset}: unseen per-class accuracy {entry.unseen_per_class_acc:.2f}")
            entries.append(entry)

        payload = {"config_digest": digest,
                   "entries": [{"dataset": e.dataset, "unseen_per_class_acc": e.unseen_per_class_acc,
                                "steps_run": e.steps_run} for e in entries]}
        if not args.dataset:
            result = aggregate(entries, [d["name"] for d in cfg["datasets"]])
            payload["overall_mean"] = result.overall_mean
            print(result.render())
        with open(out_dir / "viterb_result.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"report: {out_dir / 'viterb_result.json'}")
    except (OverlapDetected, LeakDetected) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LEAK
    except NonFiniteLoss as exc:
        print(f"error: non-finite loss: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except (FrozenAlignError, FileNotFoundError, KeyError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frozen-align", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="validate and summarize a feature store")
    p.add_argument("store")
    p.add_argument("--head", type=int, default=0, help="print the first N ids with norms")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("train", help="train the text projection")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--tau", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run an evaluation task from a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viterb", help="run the seen/unseen benchmark")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", help="run a single named dataset only")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_viterb)
    return parser


def main(argv: list[str] | None = None) -> int:
    _cap_threads()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
