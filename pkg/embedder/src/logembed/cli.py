"""logembed: encode host log text into an HFT1 tensor file.

Exit codes: 0 success, 2 bad arguments/config, 3 bad input data, 4 encoder
unavailable.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import EmbeddingConfig
from .embed import embed_to_file
from .encoders import EncoderUnavailableError
from .records import EmptyRecordSetError, load_jsonl


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logembed", description=__doc__)
    parser.add_argument("--input", required=True, help="JSONL log records")
    parser.add_argument("--output", required=True, help="HFT1 output path")
    parser.add_argument("--config", default=None, help="JSON embedding config")
    parser.add_argument("--encoder", default=None, help="override: 'hash' or 'st:<model>'")
    parser.add_argument(
        "--offline-cache", action="store_true",
        help="forbid any model download; use only locally cached encoders",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.offline_cache:
        os.environ["HF_HUB_OFFLINE"] = "1"
    try:
        cfg = EmbeddingConfig.from_json(args.config) if args.config else EmbeddingConfig()
        if args.encoder:
            cfg = EmbeddingConfig(*cfg.dims, encoder=args.encoder)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        records = load_jsonl(args.input)
    except (EmptyRecordSetError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    try:
        embed_to_file(records, cfg, args.output)
    except EncoderUnavailableError as exc:
        print(f"encoder unavailable: {exc}", file=sys.stderr)
        return 4
    print(f"{len(records)} samples ({cfg.encoder}) -> {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
