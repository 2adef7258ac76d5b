"""Wire-level tests: NDJSON frames over stdio and HTTP, error replies, soak runs.

These spawn the real sidecar (``python3 -m scorer_ref``) and speak raw
frames to it, so they double as an independent check of the protocol
grammar: integer ids echoed back, one reply per line, error frames with
id -1 when the id itself is unreadable, and a server that survives
garbage input.
"""

from __future__ import annotations

import base64
import json
import os
import re
import select
import subprocess
import sys
import threading
import time
import urllib.error
import urllib.request

import pytest

STARTUP_TIMEOUT = 120.0
REPLY_TIMEOUT = 180.0

SOAK_FRAMES = 100
SOAK_PAIRS = [
    ("plate", "plate_shift"),
    ("plate", "disk"),
    ("disk", "noise"),
    ("plate", "plate"),
]


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _scoring_frame(frame_id: int, op: str, a: bytes, b: bytes) -> dict:
    return {"id": frame_id, "op": op, "image_a": _b64(a), "image_b": _b64(b)}


def _check_scored(reply: dict, frame: dict) -> float:
    assert reply["id"] == frame["id"], reply
    assert "error" not in reply, reply
    value = reply["value"]
    assert isinstance(value, (int, float))
    if frame["op"] == "clip_similarity":
        assert -1.0 <= value <= 1.0
    else:
        assert value >= 0.0
    return float(value)


class _StdioClient:
    """Minimal strict request/reply client over a sidecar's pipes."""

    def __init__(self, proc: subprocess.Popen):
        self.proc = proc
        self.next_id = 0

    def send_line(self, line: str) -> None:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def read_reply(self, timeout: float = REPLY_TIMEOUT) -> dict:
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            assert remaining > 0, "no reply from sidecar"
            ready, _, _ = select.select([self.proc.stdout], [], [], min(remaining, 1.0))
            if ready:
                line = self.proc.stdout.readline()
                assert line, "sidecar closed stdout"
                return json.loads(line)

    def roundtrip(self, frame: dict) -> dict:
        self.send_line(json.dumps(frame))
        return self.read_reply()

    def score(self, op: str, a: bytes, b: bytes) -> float:
        frame = _scoring_frame(self.next_id, op, a, b)
        self.next_id += 1
        return _check_scored(self.roundtrip(frame), frame)


@pytest.fixture(scope="module")
def stdio(weight_paths):
    proc = subprocess.Popen(
        [sys.executable, "-m", "scorer_ref"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
        text=True,
        bufsize=1,
        env={
            **os.environ,
            "MINIA_CLIP_MODEL_DIR": str(weight_paths["clip"]),
            "MINIA_LPIPS_CHECKPOINT": str(weight_paths["lpips"]),
        },
    )
    yield _StdioClient(proc)
    proc.stdin.close()
    proc.terminate()
    proc.wait(timeout=10)


@pytest.fixture(scope="module")
def http_base(weight_paths):
    proc = subprocess.Popen(
        [sys.executable, "-m", "scorer_ref", "--http", "0"],
        stdin=subprocess.DEVNULL,
        stdout=subprocess.DEVNULL,
        stderr=subprocess.PIPE,
        text=True,
        bufsize=1,
        env={
            **os.environ,
            "MINIA_CLIP_MODEL_DIR": str(weight_paths["clip"]),
            "MINIA_LPIPS_CHECKPOINT": str(weight_paths["lpips"]),
        },
    )
    port = None
    deadline = time.monotonic() + STARTUP_TIMEOUT
    while time.monotonic() < deadline:
        line = proc.stderr.readline()
        if not line:
            break
        match = re.search(r"listening on http://127\.0\.0\.1:(\d+)", line)
        if match:
            port = int(match.group(1))
            break
    assert port is not None, "sidecar never announced its port"
    # Keep draining stderr so the child can never block on a full pipe.
    threading.Thread(target=proc.stderr.read, daemon=True).start()
    yield f"http://127.0.0.1:{port}"
    proc.terminate()
    proc.wait(timeout=10)


def _post(base: str, body: bytes, path: str = "/score") -> tuple[int, dict]:
    req = urllib.request.Request(
        base + path,
        data=body,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=REPLY_TIMEOUT) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


# -- stdio ---------------------------------------------------------------


def test_stdio_handshake(stdio):
    frame = {"id": stdio.next_id, "op": "handshake"}
    stdio.next_id += 1
    reply = stdio.roundtrip(frame)
    assert reply["id"] == frame["id"]
    info = reply["value"]
    assert info["clip_model"] == "clip-vit-b32"
    assert info["lpips_model"] == "lpips-alexnet-st"
    assert len(info["lpips_checkpoint_sha256"]) == 64


def test_stdio_soak(stdio, images):
    seen = {}
    for i in range(SOAK_FRAMES):
        left, right = SOAK_PAIRS[i % len(SOAK_PAIRS)]
        op = "clip_similarity" if (i // len(SOAK_PAIRS)) % 2 == 0 else "lpips"
        value = stdio.score(op, images[left], images[right])
        key = (op, left, right)
        if key in seen:
            assert value == seen[key], key  # same frame, same answer
        seen[key] = value
    # The identical pair obeys the self rules through the wire too.
    assert seen[("clip_similarity", "plate", "plate")] >= 0.999
    assert seen[("lpips", "plate", "plate")] <= 0.001


def test_stdio_error_replies(stdio, images):
    cases = [
        ("this is not json", -1),
        (json.dumps({"op": "handshake"}), -1),  # no id at all
        (json.dumps({"id": "seven", "op": "handshake"}), -1),  # non-integer id
        (json.dumps({"id": 7001, "op": "transmogrify"}), 7001),
        (json.dumps({"id": 7002, "op": "lpips", "image_a": "!!!", "image_b": "!!!"}), 7002),
        (json.dumps({"id": 7003, "op": "clip_similarity"}), 7003),  # missing payload
        (
            json.dumps(
                {
                    "id": 7004,
                    "op": "lpips",
                    "image_a": _b64(b"junk bytes"),
                    "image_b": _b64(b"junk bytes"),
                }
            ),
            7004,
        ),
    ]
    for line, want_id in cases:
        stdio.send_line(line)
        reply = stdio.read_reply()
        assert reply["id"] == want_id, line
        assert "error" in reply and "value" not in reply, line
    # Blank lines are skipped, and the server is still healthy after all that.
    stdio.send_line("")
    assert stdio.score("lpips", images["plate"], images["plate"]) <= 0.001


def test_stdio_matches_in_process(stdio, session, images):
    for op, left, right in [
        ("clip_similarity", "plate", "disk"),
        ("lpips", "plate", "disk"),
        ("lpips", "plate", "plate_shift"),
    ]:
        over_wire = stdio.score(op, images[left], images[right])
        in_process = session.score(op, images[left], images[right])
        assert abs(over_wire - in_process) <= 1e-4, (op, left, right)


# -- http ----------------------------------------------------------------


def test_http_health(http_base):
    with urllib.request.urlopen(http_base + "/health", timeout=30) as resp:
        assert resp.status == 200
        assert json.loads(resp.read()) == {"status": "ok"}


def test_http_handshake(http_base):
    status, reply = _post(http_base, json.dumps({"id": 0, "op": "handshake"}).encode())
    assert status == 200
    assert reply["id"] == 0
    assert reply["value"]["clip_model"] == "clip-vit-b32"


def test_http_soak(http_base, images):
    for i in range(SOAK_FRAMES):
        left, right = SOAK_PAIRS[i % len(SOAK_PAIRS)]
        op = "clip_similarity" if (i // len(SOAK_PAIRS)) % 2 == 0 else "lpips"
        frame = _scoring_frame(1000 + i, op, images[left], images[right])
        status, reply = _post(http_base, json.dumps(frame).encode())
        assert status == 200
        _check_scored(reply, frame)


def test_http_error_replies(http_base):
    status, reply = _post(http_base, b"this is not json")
    assert status == 400 and reply["id"] == -1 and "error" in reply

    status, reply = _post(http_base, json.dumps({"id": 9, "op": "transmogrify"}).encode())
    assert status == 400 and reply["id"] == 9 and "error" in reply

    status, reply = _post(http_base, b"{}", path="/nope")
    assert status == 404

    req = urllib.request.Request(http_base + "/nope")
    with pytest.raises(urllib.error.HTTPError) as excinfo:
        urllib.request.urlopen(req, timeout=30)
    assert excinfo.value.code == 404


def test_http_matches_in_process(http_base, session, images):
    for op, left, right in [
        ("clip_similarity", "plate", "disk"),
        ("lpips", "disk", "noise"),
    ]:
        frame = _scoring_frame(5000, op, images[left], images[right])
        status, reply = _post(http_base, json.dumps(frame).encode())
        assert status == 200
        over_wire = _check_scored(reply, frame)
        in_process = session.score(op, images[left], images[right])
        assert abs(over_wire - in_process) <= 1e-4, (op, left, right)


# -- startup validation ----------------------------------------------------


def test_missing_weights_is_fatal(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "scorer_ref", "--clip-dir", str(tmp_path / "nowhere")],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 2
    assert "fatal" in proc.stderr
