"""Perceptual-scorer wire protocol: client transports and a stub scorer.

The harness talks to an external scorer over newline-delimited JSON
frames.  One frame per line, UTF-8:

    request:  {"id": N, "op": "handshake" | "clip_similarity" | "lpips",
               "image_a": <base64 PNG>, "image_b": <base64 PNG>}
    response: {"id": N, "value": <number | handshake object>}
            | {"id": N, "error": "message"}

Ids are monotonically increasing integers and are echoed back; exactly
one request is in flight per connection.  The same frames travel over
HTTP as ``POST /score``.  The stub scorer answers in-process, is fully
deterministic and has no model dependencies, so the entire primary test
suite runs without any sidecar.
"""

from __future__ import annotations

import base64
import io
import json
import select
import shlex
import subprocess
import threading
import urllib.error
import urllib.request

import numpy as np
from PIL import Image

from .errors import (
    ProtocolViolation,
    ScorerError,
    ScorerUnavailable,
    Timeout,
)

__all__ = [
    "PerceptualScorer",
    "StubScorer",
    "SubprocessScorer",
    "HttpScorer",
    "scorer_from_spec",
    "serve_stdio",
    "SCORER_CMD_ENV",
]

SCORER_CMD_ENV = "MINIA_SCORER_CMD"


class PerceptualScorer:
    """Base client: handshake once, then score image pairs.

    Subclasses implement ``_request(op, image_a, image_b)``.  All calls
    are serialized by an internal lock (one in-flight request).
    """

    transport = "in-process"

    def __init__(self, request_timeout: float = 30.0):
        self.request_timeout = request_timeout
        self.model_ids: tuple[str, str] | None = None
        self._lock = threading.Lock()
        self._next_id = 0

    # -- public surface -------------------------------------------------

    def handshake(self) -> tuple[str, str]:
        """Return the declared (clip model, lpips model) pair."""
        with self._lock:
            if self.model_ids is None:
                info = self._request("handshake", None, None)
                if not isinstance(info, dict):
                    raise ProtocolViolation("handshake value must be an object")
                try:
                    self.model_ids = (str(info["clip_model"]), str(info["lpips_model"]))
                except KeyError as missing:
                    raise ProtocolViolation(
                        f"handshake lacks {missing} field"
                    ) from None
                self.handshake_info = info
            return self.model_ids

    def clip_similarity(self, image_a: bytes, image_b: bytes) -> float:
        """Cosine similarity of the scorer's embeddings, in [-1, 1]."""
        self.handshake()
        with self._lock:
            value = self._request("clip_similarity", image_a, image_b)
        return float(value)

    def lpips(self, image_a: bytes, image_b: bytes) -> float:
        """Perceptual distance (lower is more similar), >= 0."""
        self.handshake()
        with self._lock:
            value = self._request("lpips", image_a, image_b)
        return float(value)

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- shared frame plumbing -------------------------------------------

    def _make_frame(self, op, image_a, image_b) -> dict:
        self._next_id += 1
        frame = {"id": self._next_id, "op": op}
        if image_a is not None:
            frame["image_a"] = base64.b64encode(image_a).decode("ascii")
        if image_b is not None:
            frame["image_b"] = base64.b64encode(image_b).decode("ascii")
        return frame

    def _check_reply(self, frame_id: int, reply: dict):
        if not isinstance(reply, dict) or "id" not in reply:
            raise ProtocolViolation("response frame lacks an id")
        if reply["id"] != frame_id:
            raise ProtocolViolation(
                f"response id {reply['id']} does not match request id {frame_id}"
            )
        if "error" in reply and reply["error"]:
            raise ScorerError(str(reply["error"]))
        if "value" not in reply:
            raise ProtocolViolation("response carries neither value nor error")
        return reply["value"]

    def _request(self, op, image_a, image_b):
        raise NotImplementedError


class StubScorer(PerceptualScorer):
    """Deterministic in-process scorer for tests and dry runs.

    Images are decoded, converted to 32x32 grayscale thumbnails and
    compared directly: cosine similarity for ``clip_similarity`` and RMS
    difference for ``lpips``.  Pure functions of the input bytes.
    """

    transport = "in-process"
    THUMB = 32

    def _thumb(self, png: bytes) -> np.ndarray:
        with Image.open(io.BytesIO(png)) as img:
            small = img.convert("L").resize((self.THUMB, self.THUMB), Image.BILINEAR)
        return np.asarray(small, dtype=np.float64).reshape(-1) / 255.0

    def _request(self, op, image_a, image_b):
        if op == "handshake":
            return {
                "clip_model": "stub",
                "lpips_model": "stub",
                "preprocessing": f"grayscale {self.THUMB}x{self.THUMB} bilinear",
            }
        if image_a == image_b:
            # exact on identical bytes, independent of float rounding
            return 1.0 if op == "clip_similarity" else 0.0
        a = self._thumb(image_a)
        b = self._thumb(image_b)
        if op == "clip_similarity":
            na = float(np.linalg.norm(a))
            nb = float(np.linalg.norm(b))
            if na == 0.0 and nb == 0.0:
                return 1.0
            if na == 0.0 or nb == 0.0:
                return 0.0
            return float(np.clip(a @ b / (na * nb), -1.0, 1.0))
        if op == "lpips":
            return float(np.sqrt(np.mean((a - b) ** 2)))
        raise ScorerError(f"unknown op {op!r}")


class SubprocessScorer(PerceptualScorer):
    """Talks to a sidecar process over its standard streams."""

    transport = "subprocess-stdio"

    def __init__(self, command, request_timeout: float = 30.0):
        super().__init__(request_timeout)
        if isinstance(command, str):
            command = shlex.split(command)
        try:
            self._proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ScorerUnavailable(f"cannot start scorer {command!r}: {exc}") from None

    def _request(self, op, image_a, image_b):
        if self._proc.poll() is not None:
            raise ScorerUnavailable("scorer process has exited")
        frame = self._make_frame(op, image_a, image_b)
        try:
            self._proc.stdin.write(json.dumps(frame) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerUnavailable(f"scorer pipe broken: {exc}") from None

        ready, _, _ = select.select(
            [self._proc.stdout], [], [], self.request_timeout
        )
        if not ready:
            raise Timeout(f"no response within {self.request_timeout}s")
        line = self._proc.stdout.readline()
        if not line:
            raise ScorerUnavailable("scorer closed its output")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"bad response frame: {exc}") from None
        return self._check_reply(frame["id"], reply)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


class HttpScorer(PerceptualScorer):
    """Talks to a scorer over ``POST /score`` with the same frames."""

    transport = "http"

    def __init__(self, base_url: str, request_timeout: float = 30.0):
        super().__init__(request_timeout)
        self.base_url = base_url.rstrip("/")

    def _request(self, op, image_a, image_b):
        frame = self._make_frame(op, image_a, image_b)
        req = urllib.request.Request(
            self.base_url + "/score",
            data=json.dumps(frame).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.request_timeout) as resp:
                payload = resp.read()
        except urllib.error.HTTPError as exc:
            payload = exc.read()
            try:
                reply = json.loads(payload)
            except json.JSONDecodeError:
                raise ScorerError(f"HTTP {exc.code} from scorer") from None
            return self._check_reply(frame["id"], reply)
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise Timeout(f"no response within {self.request_timeout}s") from None
            raise ScorerUnavailable(f"scorer unreachable: {exc.reason}") from None
        except TimeoutError:
            raise Timeout(f"no response within {self.request_timeout}s") from None
        try:
            reply = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"bad response frame: {exc}") from None
        return self._check_reply(frame["id"], reply)


def scorer_from_spec(spec: str, request_timeout: float = 30.0) -> PerceptualScorer:
    """Build a scorer from a CLI-style selector.

    ``stub`` gives the in-process stub; ``sidecar`` launches the command
    named by the MINIA_SCORER_CMD environment variable; ``http:<url>``
    connects to a running HTTP scorer.
    """
    import os

    if spec == "stub":
        return StubScorer(request_timeout)
    if spec == "sidecar":
        cmd = os.environ.get(SCORER_CMD_ENV)
        if not cmd:
            raise ScorerUnavailable(
                f"--scorer sidecar requires the {SCORER_CMD_ENV} environment variable"
            )
        return SubprocessScorer(cmd, request_timeout)
    if spec.startswith("http:"):
        url = spec[len("http:"):]
        if not url.startswith(("http://", "https://")):
            url = "http://" + url
        return HttpScorer(url, request_timeout)
    raise ValueError(f"unknown scorer spec {spec!r}")


# ----------------------------------------------------------- stub server


def serve_stdio(scorer: PerceptualScorer | None = None, stdin=None, stdout=None) -> None:
    """Answer protocol frames on stdio until end-of-input.

    Used to expose the stub scorer as a sidecar process in protocol
    tests.  Never exits on a bad frame: malformed requests get an error
    response (with id -1 when the id itself is unreadable).
    """
    import sys

    scorer = scorer or StubScorer()
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        frame_id = -1
        try:
            frame = json.loads(line)
            if not isinstance(frame, dict) or not isinstance(frame.get("id"), int):
                raise ScorerError("request frame lacks an integer id")
            frame_id = frame["id"]
            reply = {"id": frame_id, "value": _serve_one(scorer, frame)}
        except Exception as exc:  # noqa: BLE001 - protocol servers must not die
            reply = {"id": frame_id, "error": str(exc)}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def _serve_one(scorer: PerceptualScorer, frame: dict):
    op = frame.get("op")
    if op == "handshake":
        return scorer._request("handshake", None, None)
    if op in ("clip_similarity", "lpips"):
        try:
            a = base64.b64decode(frame["image_a"], validate=True)
            b = base64.b64decode(frame["image_b"], validate=True)
        except (KeyError, ValueError) as exc:
            raise ScorerError(f"bad image payload: {exc}") from None
        return scorer._request(op, a, b)
    raise ScorerError(f"unknown op {op!r}")


if __name__ == "__main__":
    serve_stdio()
