"""NDJSON scoring service over the reference models: stdio loop and HTTP endpoint.

Wire grammar, one UTF-8 JSON frame per line:

    request:  {"id": N, "op": "handshake" | "clip_similarity" | "lpips",
               "image_a": <base64 PNG>, "image_b": <base64 PNG>}
    response: {"id": N, "value": <number | handshake object>}
            | {"id": N, "error": "message"}

The same frames travel over HTTP as ``POST /score`` (an error frame
comes back with status 400); ``GET /health`` answers 200 as soon as the
process accepts requests.  A bad frame never kills the server: the reply
is an error frame, with id -1 when the id itself is unreadable.
"""

from __future__ import annotations

import base64
import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable

from .models import ClipEmbedder, ShiftTolerantLpips, decode_image, file_sha256

__all__ = [
    "CLIP_MODEL_ID",
    "LPIPS_MODEL_ID",
    "RequestError",
    "ScoringSession",
    "serve_http",
    "serve_stdio",
]

CLIP_MODEL_ID = "clip-vit-b32"
LPIPS_MODEL_ID = "lpips-alexnet-st"


class RequestError(ValueError):
    """A request we answer with an error frame instead of dying."""


class ScoringSession:
    """Owns the models (loaded lazily, once per process) and answers ops."""

    def __init__(self, clip_dir: str | Path, lpips_checkpoint: str | Path):
        self.clip_dir = Path(clip_dir)
        self.lpips_checkpoint = Path(lpips_checkpoint)
        self._clip: ClipEmbedder | None = None
        self._lpips: ShiftTolerantLpips | None = None
        self._handshake: dict | None = None
        self._lock = threading.Lock()

    def clip(self) -> ClipEmbedder:
        if self._clip is None:
            self._clip = ClipEmbedder(self.clip_dir)
        return self._clip

    def lpips(self) -> ShiftTolerantLpips:
        if self._lpips is None:
            self._lpips = ShiftTolerantLpips(self.lpips_checkpoint)
        return self._lpips

    # -- ops --------------------------------------------------------------

    def handshake(self) -> dict:
        """Model identities, checkpoint hashes and preprocessing summary."""
        with self._lock:
            if self._handshake is None:
                clip_weights = self.clip_dir / "model.safetensors"
                if not clip_weights.is_file():
                    clip_weights = self.clip_dir / "pytorch_model.bin"
                self._handshake = {
                    "clip_model": CLIP_MODEL_ID,
                    "lpips_model": LPIPS_MODEL_ID,
                    "clip_checkpoint_sha256": file_sha256(clip_weights),
                    "lpips_checkpoint_sha256": file_sha256(self.lpips_checkpoint),
                    "preprocessing": {
                        "alpha": "composited onto rgb(128,128,128)",
                        "clip_similarity": (
                            "resize shortest side to 224, center crop 224x224, "
                            "CLIP channel normalization"
                        ),
                        "lpips": "squash to 256x256 bilinear, scale to [-1, 1]",
                    },
                    "value_conventions": {
                        "clip_similarity": "cosine of unit image embeddings, clamped to [-1, 1]",
                        "lpips": "non-negative perceptual distance, 0 = identical",
                    },
                }
            return dict(self._handshake)

    def score(self, op: str, image_a: bytes, image_b: bytes) -> float:
        try:
            a = decode_image(image_a)
            b = decode_image(image_b)
        except Exception as exc:
            raise RequestError(f"undecodable image: {exc}") from None
        with self._lock:
            if op == "clip_similarity":
                return self.clip().similarity(a, b)
            return self.lpips().distance(a, b)

    def answer(self, frame: dict):
        """Dispatch one parsed request frame to its op handler."""
        op = frame.get("op")
        if op == "handshake":
            return self.handshake()
        if op in ("clip_similarity", "lpips"):
            try:
                a = base64.b64decode(frame["image_a"], validate=True)
                b = base64.b64decode(frame["image_b"], validate=True)
            except (KeyError, ValueError) as exc:
                raise RequestError(f"bad image payload: {exc}") from None
            return self.score(op, a, b)
        raise RequestError(f"unknown op {op!r}")


def _reply_for(session: ScoringSession, line: str) -> dict:
    frame_id = -1
    try:
        frame = json.loads(line)
        if not isinstance(frame, dict) or not isinstance(frame.get("id"), int):
            raise RequestError("request frame lacks an integer id")
        frame_id = frame["id"]
        return {"id": frame_id, "value": session.answer(frame)}
    except Exception as exc:  # noqa: BLE001 - protocol servers must not die
        return {"id": frame_id, "error": str(exc)}


def serve_stdio(session: ScoringSession, stdin=None, stdout=None) -> None:
    """Answer one frame per line until end-of-input."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(json.dumps(_reply_for(session, line)) + "\n")
        stdout.flush()


def serve_http(
    session: ScoringSession,
    port: int,
    announce: Callable[[int], None] | None = None,
) -> None:
    """Serve ``POST /score`` and ``GET /health`` forever on 127.0.0.1.

    Port 0 binds an ephemeral port; ``announce`` receives the bound port
    before the serve loop starts.
    """

    class Handler(BaseHTTPRequestHandler):
        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):  # noqa: N802 - http.server naming
            if self.path == "/health":
                self._send(200, {"status": "ok"})
            else:
                self._send(404, {"error": f"no such endpoint {self.path!r}"})

        def do_POST(self):  # noqa: N802 - http.server naming
            if self.path != "/score":
                self._send(404, {"error": f"no such endpoint {self.path!r}"})
                return
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length).decode("utf-8", errors="replace")
            reply = _reply_for(session, raw)
            self._send(200 if "value" in reply else 400, reply)

        def log_message(self, *args):  # keep stderr quiet
            pass

    server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
    if announce is not None:
        announce(server.server_address[1])
    server.serve_forever()
