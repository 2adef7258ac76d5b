"""Shared fixtures: weight locations and small structured test images."""

from __future__ import annotations

import io
import os
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

_CLIP_DIR = Path(os.environ.get("MINIA_CLIP_MODEL_DIR", "/root/weights/clip-vit-base-patch32"))
_LPIPS_CKPT = Path(os.environ.get("MINIA_LPIPS_CHECKPOINT", "/root/weights/alex_shift_tolerant.pth"))


@pytest.fixture(scope="session")
def weight_paths() -> dict[str, Path]:
    if not (_CLIP_DIR.is_dir() and _LPIPS_CKPT.is_file()):
        pytest.skip("model weights not installed")
    return {"clip": _CLIP_DIR, "lpips": _LPIPS_CKPT}


def _encode(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def _l_plate(shift: int = 0) -> np.ndarray:
    """A flat L-shaped figure on the neutral gray the renders use."""
    arr = np.full((240, 240, 3), 128, np.uint8)
    arr[40 + shift : 200 + shift, 40:110] = (235, 215, 60)
    arr[150 + shift : 200 + shift, 40:200] = (235, 215, 60)
    return arr


def _disk() -> np.ndarray:
    yy, xx = np.mgrid[:240, :240]
    inside = (yy - 120) ** 2 + (xx - 120) ** 2 < 80**2
    arr = np.full((240, 240, 3), 128, np.uint8)
    arr[inside] = (40, 90, 200)
    return arr


@pytest.fixture(scope="session")
def images() -> dict[str, bytes]:
    rng = np.random.default_rng(20260815)
    return {
        "plate": _encode(_l_plate()),
        "plate_shift": _encode(_l_plate(shift=2)),
        "disk": _encode(_disk()),
        "noise": _encode(rng.integers(0, 256, (240, 240, 3), dtype=np.uint8)),
    }


@pytest.fixture(scope="session")
def session(weight_paths):
    from scorer_ref import ScoringSession

    return ScoringSession(weight_paths["clip"], weight_paths["lpips"])
