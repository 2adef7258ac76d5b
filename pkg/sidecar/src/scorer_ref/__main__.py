"""Command-line entry: serve the reference scorer on stdio or HTTP."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .service import ScoringSession, serve_http, serve_stdio

CLIP_DIR_ENV = "MINIA_CLIP_MODEL_DIR"
LPIPS_CKPT_ENV = "MINIA_LPIPS_CHECKPOINT"

# Container layout fallbacks, overridable by env or flags.
_DEFAULT_CLIP_DIR = "/root/weights/clip-vit-base-patch32"
_DEFAULT_LPIPS_CKPT = "/root/weights/alex_shift_tolerant.pth"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="scorer-ref",
        description=(
            "Reference perceptual scorer answering newline-delimited JSON "
            "frames on stdio (default) or over HTTP."
        ),
    )
    parser.add_argument(
        "--http",
        type=int,
        metavar="PORT",
        default=None,
        help="serve POST /score on this port instead of stdio (0 picks a free port)",
    )
    parser.add_argument(
        "--clip-dir",
        default=os.environ.get(CLIP_DIR_ENV, _DEFAULT_CLIP_DIR),
        help="local CLIP ViT-B/32 model directory",
    )
    parser.add_argument(
        "--lpips-checkpoint",
        default=os.environ.get(LPIPS_CKPT_ENV, _DEFAULT_LPIPS_CKPT),
        help="shift-tolerant LPIPS checkpoint file",
    )
    args = parser.parse_args(argv)

    clip_dir = Path(args.clip_dir)
    checkpoint = Path(args.lpips_checkpoint)
    if not clip_dir.is_dir():
        print(f"fatal: CLIP model directory not found: {clip_dir}", file=sys.stderr)
        return 2
    if not checkpoint.is_file():
        print(f"fatal: LPIPS checkpoint not found: {checkpoint}", file=sys.stderr)
        return 2

    session = ScoringSession(clip_dir, checkpoint)
    if args.http is not None:
        def announce(port: int) -> None:
            print(f"scorer-ref listening on http://127.0.0.1:{port}", file=sys.stderr, flush=True)

        serve_http(session, args.http, announce)
    else:
        serve_stdio(session)
    return 0


if __name__ == "__main__":
    sys.exit(main())
