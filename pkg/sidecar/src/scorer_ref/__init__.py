"""Reference perceptual scorer sidecar.

Serves CLIP cosine similarity and a shift-tolerant LPIPS distance over
the newline-delimited JSON scoring protocol, on stdio or HTTP.  Run it
with ``python3 -m scorer_ref`` (or the ``scorer-ref`` console script).
"""

from .models import BlurPool, ClipEmbedder, ShiftTolerantLpips, decode_image, file_sha256
from .service import (
    CLIP_MODEL_ID,
    LPIPS_MODEL_ID,
    RequestError,
    ScoringSession,
    serve_http,
    serve_stdio,
)

__all__ = [
    "BlurPool",
    "CLIP_MODEL_ID",
    "ClipEmbedder",
    "LPIPS_MODEL_ID",
    "RequestError",
    "ScoringSession",
    "ShiftTolerantLpips",
    "decode_image",
    "file_sha256",
    "serve_http",
    "serve_stdio",
]
