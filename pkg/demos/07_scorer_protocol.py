"""The perceptual scorer wire protocol, inside and outside the process.

Scorers answer three operations -- handshake, clip_similarity, lpips --
over newline-delimited JSON frames.  The same stub model is exercised
three ways here: directly, through a subprocess speaking the stdio
protocol, and the raw frames themselves.
"""

import json
import subprocess
import sys

import numpy as np

import minia

rng = np.random.default_rng(0)
img_a = minia.encode_png(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))
img_b = minia.encode_png(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))

# 1. In process.
stub = minia.StubScorer()
print(f"handshake: {stub.handshake()}")
print(f"clip(a, a) = {stub.clip_similarity(img_a, img_a)}")
print(f"clip(a, b) = {stub.clip_similarity(img_a, img_b):.4f}")
print(f"lpips(a, b) = {stub.lpips(img_a, img_b):.4f}")

# 2. As a sidecar process; python3 -m minia.scorer serves the stub over
#    stdio, which is also the contract a real model server implements.
print("\nsame scores through a subprocess sidecar:")
with minia.SubprocessScorer([sys.executable, "-m", "minia.scorer"]) as sidecar:
    print(f"handshake: {sidecar.handshake()}")
    assert sidecar.clip_similarity(img_a, img_b) == stub.clip_similarity(img_a, img_b)
    assert sidecar.lpips(img_a, img_b) == stub.lpips(img_a, img_b)
    print("subprocess values match in-process values bit for bit")

# 3. What actually crosses the pipe: one request frame, one response
#    frame, ids echoed back.  Errors come back as frames too -- the
#    server never dies on bad input.
proc = subprocess.Popen(
    [sys.executable, "-m", "minia.scorer"],
    stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True,
)
frames = [
    {"id": 1, "op": "handshake"},
    {"id": 2, "op": "no_such_op"},
    "not json at all",
]
for frame in frames:
    line = frame if isinstance(frame, str) else json.dumps(frame)
    proc.stdin.write(line + "\n")
    proc.stdin.flush()
    reply = proc.stdout.readline().strip()
    shown = reply if len(reply) < 100 else reply[:97] + "..."
    print(f"\n>> {line}\n<< {shown}")
proc.stdin.close()
proc.wait()
