"""Feature extraction front end.

    extract-features text   --manifest caps.tsv   --model MODEL --out text.fstore
                            [--pooling last_token] [--batch-size 8] [--device cpu]
    extract-features vision --manifest images.tsv --model MODEL --out vision.fstore
                            [--pooling cls_token]  [--batch-size 8] [--device cpu]

Manifests are `id<TAB>content` lines (caption text or image path). The model
argument is a pretrained identifier/path, or the built-in `tiny-test-decoder`
/ `tiny-test-vit` for self-contained runs.

Exit codes: 0 ok, 1 config/manifest error, 2 model load failure, 3 bad input
(empty caption or undecodable image).
"""

from __future__ import annotations

import argparse
import sys


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="extract-features", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, default_pooling in (("text", "last_token"), ("vision", "cls_token")):
        p = sub.add_parser(name, help=f"extract {name} features")
        p.add_argument("--manifest", required=True)
        p.add_argument("--model", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--pooling", default=default_pooling,
                       choices=["cls_token", "last_token", "mean_token"])
        p.add_argument("--batch-size", type=int, default=8, dest="batch_size")
        p.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)

    from .errors import EmptyCaption, ExtractError, ImageDecodeFailure, ModelLoadFailure
    from .extract import extract_text_features, extract_vision_features
    from .manifest import ExtractionManifest, load_entries

    try:
        entries = load_entries(args.manifest)
        manifest = ExtractionManifest(
            entries=entries, model=args.model, pooling=args.pooling,
            output=args.out, batch_size=args.batch_size, device=args.device,
        )
        run = extract_text_features if args.command == "text" else extract_vision_features
        out = run(manifest)
    except ModelLoadFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EmptyCaption, ImageDecodeFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ExtractError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(entries)} records to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
