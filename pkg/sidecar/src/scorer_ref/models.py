"""Reference perceptual models: CLIP image embeddings and a shift-tolerant LPIPS.

Everything runs on CPU in inference mode.  The LPIPS network is an
AlexNet-shaped feature stack whose downsampling happens through fixed
binomial blur filters instead of bare strides, which keeps the distance
stable under small image translations; all of its weights (backbone,
blur filters, scaling constants and the five learned calibration heads)
load from one checkpoint file.  The CLIP embedder wraps the published
ViT-B/32 image tower together with its exact preprocessing pipeline,
loaded from a local model directory.
"""

from __future__ import annotations

import hashlib
import io
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from torch import nn

__all__ = [
    "BlurPool",
    "ShiftTolerantLpips",
    "ClipEmbedder",
    "decode_image",
    "file_sha256",
]

#: Side length images are squashed to before the LPIPS comparison.
LPIPS_INPUT_SIZE = 256

#: Neutral background that transparent pixels are composited onto,
#: matching the gray the evaluation renders use.
BACKGROUND_GRAY = 128


def decode_image(data: bytes) -> Image.Image:
    """Decode image bytes to RGB, compositing any alpha onto mid-gray."""
    img = Image.open(io.BytesIO(data))
    img.load()
    has_alpha = img.mode in ("RGBA", "LA", "PA") or (
        img.mode == "P" and "transparency" in img.info
    )
    if has_alpha:
        rgba = img.convert("RGBA")
        background = Image.new("RGBA", rgba.size, (BACKGROUND_GRAY,) * 3 + (255,))
        img = Image.alpha_composite(background, rgba)
    return img.convert("RGB")


def file_sha256(path: str | Path) -> str:
    """Hex SHA-256 of a file, streamed in 1 MiB chunks."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class BlurPool(nn.Module):
    """Stride-2 downsampling through a fixed per-channel 3x3 binomial filter."""

    def __init__(self, channels: int, stride: int = 2):
        super().__init__()
        self.stride = stride
        self.channels = channels
        taps = torch.tensor([1.0, 2.0, 1.0])
        filt = taps[:, None] * taps[None, :]
        filt = filt / filt.sum()
        self.register_buffer("filt", filt[None, None].repeat(channels, 1, 1, 1))
        self.pad = nn.ReflectionPad2d(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.conv2d(self.pad(x), self.filt, stride=self.stride, groups=self.channels)


class ShiftTolerantLpips(nn.Module):
    """Learned perceptual distance over anti-aliased AlexNet features.

    Both images pass through the same five-stage feature extractor; the
    per-stage feature maps are unit-normalized across channels, squared
    differences go through learned 1x1 calibration heads, and the five
    spatially averaged head outputs are summed.  The result is 0.0 for
    identical inputs and grows with perceptual difference; unrelated
    images typically land somewhere around 0.2-0.7.
    """

    _HEAD_CHANNELS = (64, 192, 384, 256, 256)
    # Half-open [start, stop) ranges of backbone layers per feature stage.
    _STAGE_BOUNDS = ((0, 3), (3, 7), (7, 11), (11, 13), (13, 15))

    def __init__(self, checkpoint: str | Path):
        super().__init__()
        layers = self._backbone()
        # Channel-wise input standardization constants (stored as buffers
        # so the checkpoint supplies the published values).
        self.scaling_layer = nn.Module()
        self.scaling_layer.register_buffer("shift", torch.zeros(1, 3, 1, 1))
        self.scaling_layer.register_buffer("scale", torch.ones(1, 3, 1, 1))
        # The feature stack keeps the backbone's absolute layer indices as
        # module names inside each stage so checkpoint keys line up.
        self.net = nn.Module()
        for stage, (lo, hi) in enumerate(self._STAGE_BOUNDS, start=1):
            block = nn.Sequential()
            for idx in range(lo, hi):
                block.add_module(str(idx), layers[idx])
            self.net.add_module(f"slice{stage}", block)
        for stage, width in enumerate(self._HEAD_CHANNELS):
            head = nn.Module()
            head.model = nn.Sequential(nn.Dropout(), nn.Conv2d(width, 1, 1, bias=False))
            self.add_module(f"lin{stage}", head)

        state = torch.load(checkpoint, map_location="cpu", weights_only=True)
        self.load_state_dict(state, strict=True)
        self.eval()
        for param in self.parameters():
            param.requires_grad_(False)

    @staticmethod
    def _backbone() -> nn.Sequential:
        return nn.Sequential(
            nn.Conv2d(3, 64, kernel_size=11, stride=2, padding=2),
            BlurPool(64),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(kernel_size=3, stride=1),
            BlurPool(64),
            nn.Conv2d(64, 192, kernel_size=5, padding=2),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(kernel_size=3, stride=1),
            BlurPool(192),
            nn.Conv2d(192, 384, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(384, 256, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(256, 256, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
        )

    def to_tensor(self, img: Image.Image) -> torch.Tensor:
        """Squash to the comparison resolution and scale into [-1, 1]."""
        img = img.resize((LPIPS_INPUT_SIZE, LPIPS_INPUT_SIZE), Image.BILINEAR)
        arr = np.asarray(img, dtype=np.float32) / 255.0
        tensor = torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)
        return tensor * 2.0 - 1.0

    def _features(self, x: torch.Tensor) -> list[torch.Tensor]:
        x = (x - self.scaling_layer.shift) / self.scaling_layer.scale
        feats = []
        for stage in range(1, 6):
            x = getattr(self.net, f"slice{stage}")(x)
            feats.append(x)
        return feats

    @staticmethod
    def _unit(feat: torch.Tensor) -> torch.Tensor:
        norm = feat.square().sum(dim=1, keepdim=True).sqrt()
        return feat / (norm + 1e-10)

    def distance(self, img_a: Image.Image, img_b: Image.Image) -> float:
        with torch.inference_mode():
            feats_a = self._features(self.to_tensor(img_a))
            feats_b = self._features(self.to_tensor(img_b))
            total = torch.zeros(())
            for stage, (fa, fb) in enumerate(zip(feats_a, feats_b)):
                diff = (self._unit(fa) - self._unit(fb)).square()
                head = getattr(self, f"lin{stage}").model
                total = total + head(diff).mean(dim=(2, 3)).sum()
        return float(total)


class ClipEmbedder:
    """Unit-norm image embeddings from a local ViT-B/32 image tower."""

    def __init__(self, model_dir: str | Path):
        # Heavy import kept local so the protocol layer stays importable
        # without transformers installed.
        from transformers import CLIPModel, CLIPProcessor

        try:
            from transformers.utils import logging as hf_logging

            hf_logging.disable_progress_bar()
        except Exception:
            pass

        self.model_dir = Path(model_dir)
        self.model = CLIPModel.from_pretrained(self.model_dir).eval()
        self.processor = CLIPProcessor.from_pretrained(self.model_dir)
        for param in self.model.parameters():
            param.requires_grad_(False)

    def embed(self, img: Image.Image) -> torch.Tensor:
        inputs = self.processor(images=img, return_tensors="pt")
        with torch.inference_mode():
            out = self.model.get_image_features(pixel_values=inputs["pixel_values"])
        # Older transformers return the projected tensor directly; newer
        # ones return the vision outputs with the projection in
        # pooler_output.
        feats = out if isinstance(out, torch.Tensor) else out.pooler_output
        return F.normalize(feats, dim=-1)[0]

    def similarity(self, img_a: Image.Image, img_b: Image.Image) -> float:
        cos = float(self.embed(img_a) @ self.embed(img_b))
        # Float rounding can push the cosine of near-identical embeddings
        # a hair past 1; the wire contract promises [-1, 1].
        return max(-1.0, min(1.0, cos))
