"""Deterministic orthographic software renderer.

Produces geometry-only gray renders, coverage (depth) masks and depth
buffers.  Everything is pure CPU math with a fixed pixel convention
(pixel centers at half-integers, top-left fill rule), so identical inputs
give bit-identical rasters on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DegenerateProjection, DimensionMismatch, EmptyMesh
from .mesh import TriangleMesh

__all__ = [
    "RenderConfig",
    "RenderOutput",
    "ReferenceImage",
    "render",
    "composite_on_gray",
    "alpha_mask",
    "frame_reference",
    "save_png",
    "load_reference",
    "encode_png",
]


@dataclass(frozen=True)
class RenderConfig:
    """Knobs of the standardized render.

    resolution : square frame size in pixels.
    margin_fraction : empty border per side; the larger in-plane extent of
        the mesh spans ``(1 - 2 * margin_fraction) * resolution`` pixels.
    background_gray : 8-bit value written wherever no fragment lands.
    albedo, ambient : uniform diffuse material and ambient floor.
    light_direction : unit vector in view space; ``None`` means the light
        travels with the camera (head-on).
    """

    resolution: int = 512
    margin_fraction: float = 0.05
    background_gray: int = 128
    albedo: float = 0.75
    ambient: float = 0.25
    light_direction: tuple | None = None

    def __post_init__(self):
        if self.resolution < 16:
            raise ValueError("resolution must be at least 16")
        if not 0.0 <= self.margin_fraction < 0.5:
            raise ValueError("margin_fraction must lie in [0, 0.5)")
        if not 0 <= self.background_gray <= 255:
            raise ValueError("background_gray must be an 8-bit value")
        if not 0.0 <= self.ambient <= 1.0:
            raise ValueError("ambient must lie in [0, 1]")


@dataclass(frozen=True)
class RenderOutput:
    """shaded RGB raster + coverage mask + nearest-depth buffer."""

    shaded: np.ndarray       # (res, res, 3) uint8
    depth_mask: np.ndarray   # (res, res) bool
    depth_buffer: np.ndarray  # (res, res) float64, +inf where empty


@dataclass(frozen=True)
class ReferenceImage:
    """RGBA crop whose alpha channel is the silhouette reference."""

    rgba: np.ndarray  # (h, w, 4) uint8
    alpha_threshold: int = 128

    def __post_init__(self):
        a = np.asarray(self.rgba)
        if a.ndim != 3 or a.shape[2] != 4 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("rgba must be (h, w, 4) with h, w >= 1")


def _is_top_left(dx: float, dy: float) -> bool:
    # Pixel-center ties on a shared edge go to the triangle for which the
    # edge is a "top" or "left" edge (y grows downward here).
    return dy < 0 or (dy == 0 and dx > 0)


def render(mesh: TriangleMesh, view, config: RenderConfig) -> RenderOutput:
    """Orthographic render of ``mesh`` seen through ``view``.

    ``view`` is an orientation candidate (anything with an ``as_transform``
    3x3 matrix) or a bare 3x3 matrix mapping model coordinates to view
    coordinates: x right, y up, z = depth growing away from the camera.

    The mesh is centered on its bounding-box center and scaled so the
    larger in-plane extent spans ``1 - 2 * margin`` of the frame.
    Shading is flat per face: ``ambient + (1 - ambient) * albedo * |n.l|``,
    double-sided, quantized to 8 bits.  Raises ``DegenerateProjection``
    when both in-plane extents are zero.
    """
    if mesh.face_count == 0:
        raise EmptyMesh("cannot render an empty mesh")
    matrix = np.asarray(getattr(view, "as_transform", view), dtype=np.float64)
    if matrix.shape != (3, 3):
        raise ValueError("view must provide a 3x3 transform")

    res = config.resolution
    pts = mesh.vertices @ matrix.T
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    extent = max(hi[0] - lo[0], hi[1] - lo[1])
    if extent <= 0.0:
        raise DegenerateProjection("mesh projects to a point")
    scale = (1.0 - 2.0 * config.margin_fraction) * res / extent
    cx = (lo[0] + hi[0]) / 2.0
    cy = (lo[1] + hi[1]) / 2.0

    px = (pts[:, 0] - cx) * scale + res / 2.0
    py = res / 2.0 - (pts[:, 1] - cy) * scale
    pz = pts[:, 2]

    if config.light_direction is None:
        light = np.array([0.0, 0.0, 1.0])
    else:
        light = np.asarray(config.light_direction, dtype=np.float64)
        light = light / np.linalg.norm(light)

    shaded = np.full((res, res, 3), config.background_gray, dtype=np.uint8)
    depth_buffer = np.full((res, res), np.inf, dtype=np.float64)
    depth_mask = np.zeros((res, res), dtype=bool)

    tri_xy = np.stack([px[mesh.faces], py[mesh.faces]], axis=2)  # (m, 3, 2)
    tri_z = pz[mesh.faces]                                       # (m, 3)

    # Flat shade per face from the view-space geometric normal.
    v0 = pts[mesh.faces[:, 0]]
    e1 = pts[mesh.faces[:, 1]] - v0
    e2 = pts[mesh.faces[:, 2]] - v0
    normals = np.cross(e1, e2)
    norm_len = np.linalg.norm(normals, axis=1)

    for t in range(len(mesh.faces)):
        corners = tri_xy[t]
        zs = tri_z[t]
        area2 = _cross2(corners[1] - corners[0], corners[2] - corners[0])
        if area2 == 0.0:
            continue  # edge-on: no footprint
        if area2 < 0.0:
            corners = corners[[0, 2, 1]]
            zs = zs[[0, 2, 1]]
            area2 = -area2

        if norm_len[t] == 0.0:
            continue
        n_dot_l = abs(float(normals[t] @ light)) / norm_len[t]
        intensity = config.ambient + (1.0 - config.ambient) * config.albedo * n_dot_l
        gray = np.uint8(int(min(max(intensity, 0.0), 1.0) * 255.0 + 0.5))

        x0 = max(0, int(np.floor(corners[:, 0].min() - 0.5)))
        x1 = min(res - 1, int(np.ceil(corners[:, 0].max() - 0.5)))
        y0 = max(0, int(np.floor(corners[:, 1].min() - 0.5)))
        y1 = min(res - 1, int(np.ceil(corners[:, 1].max() - 0.5)))
        if x1 < x0 or y1 < y0:
            continue

        xs = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
        ys = np.arange(y0, y1 + 1, dtype=np.float64) + 0.5
        gx, gy = np.meshgrid(xs, ys)

        covered = np.ones(gx.shape, dtype=bool)
        bary = []
        for a, b in ((1, 2), (2, 0), (0, 1)):
            dx = corners[b, 0] - corners[a, 0]
            dy = corners[b, 1] - corners[a, 1]
            w = dx * (gy - corners[a, 1]) - dy * (gx - corners[a, 0])
            if _is_top_left(dx, dy):
                covered &= w >= 0.0
            else:
                covered &= w > 0.0
            bary.append(w)
        if not covered.any():
            continue

        depth = (bary[0] * zs[0] + bary[1] * zs[1] + bary[2] * zs[2]) / area2

        zwin = depth_buffer[y0 : y1 + 1, x0 : x1 + 1]
        hit = covered & (depth < zwin)
        if not hit.any():
            continue
        zwin[hit] = depth[hit]
        depth_mask[y0 : y1 + 1, x0 : x1 + 1][hit] = True
        shaded[y0 : y1 + 1, x0 : x1 + 1][hit] = gray

    return RenderOutput(shaded=shaded, depth_mask=depth_mask, depth_buffer=depth_buffer)


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def composite_on_gray(reference: ReferenceImage, config: RenderConfig) -> np.ndarray:
    """Alpha-blend the reference over a uniform gray field.

    ``out = round(alpha * rgb + (1 - alpha) * background_gray)`` per
    channel, alpha taken as ``a / 255``.
    """
    rgba = reference.rgba.astype(np.float64)
    alpha = rgba[:, :, 3:4] / 255.0
    blended = alpha * rgba[:, :, :3] + (1.0 - alpha) * config.background_gray
    return np.floor(blended + 0.5).astype(np.uint8)


def alpha_mask(reference: ReferenceImage) -> np.ndarray:
    """Boolean silhouette: alpha at or above the reference threshold."""
    return reference.rgba[:, :, 3] >= reference.alpha_threshold


def frame_reference(reference: ReferenceImage, config: RenderConfig) -> ReferenceImage:
    """Fit the reference into the square working frame used by renders.

    The alpha-tight crop is scaled (aspect preserved, bilinear) so its
    larger side spans ``1 - 2 * margin`` of the frame, then centered on a
    fully transparent canvas.  Masks and composites of the result are
    directly comparable with rendered output of the same config.
    """
    res = config.resolution
    mask = alpha_mask(reference)
    canvas = np.zeros((res, res, 4), dtype=np.uint8)
    if not mask.any():
        return ReferenceImage(rgba=canvas, alpha_threshold=reference.alpha_threshold)

    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    crop = reference.rgba[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
    ch, cw = crop.shape[:2]
    span = (1.0 - 2.0 * config.margin_fraction) * res
    scale = span / max(ch, cw)
    nw = max(1, int(round(cw * scale)))
    nh = max(1, int(round(ch * scale)))
    resized = np.asarray(
        Image.fromarray(crop, mode="RGBA").resize((nw, nh), Image.BILINEAR)
    )
    y0 = (res - nh) // 2
    x0 = (res - nw) // 2
    canvas[y0 : y0 + nh, x0 : x0 + nw] = resized
    return ReferenceImage(rgba=canvas, alpha_threshold=reference.alpha_threshold)


# ------------------------------------------------------------- PNG I/O


def _to_image(array: np.ndarray) -> Image.Image:
    arr = np.asarray(array)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    if arr.ndim == 2:
        return Image.fromarray(arr, mode="L")
    if arr.ndim == 3 and arr.shape[2] == 3:
        return Image.fromarray(arr, mode="RGB")
    if arr.ndim == 3 and arr.shape[2] == 4:
        return Image.fromarray(arr, mode="RGBA")
    raise DimensionMismatch(f"cannot encode array of shape {arr.shape} as PNG")


def save_png(array: np.ndarray, path) -> None:
    """Write an 8-bit non-interlaced PNG."""
    _to_image(array).save(path, format="PNG")


def encode_png(array: np.ndarray) -> bytes:
    """PNG bytes of a raster (used on the scorer wire)."""
    import io

    buf = io.BytesIO()
    _to_image(array).save(buf, format="PNG")
    return buf.getvalue()


def load_reference(path, alpha_threshold: int = 128) -> ReferenceImage:
    """Read any Pillow-supported image as an RGBA reference."""
    with Image.open(path) as img:
        rgba = np.asarray(img.convert("RGBA"))
    return ReferenceImage(rgba=rgba.copy(), alpha_threshold=alpha_threshold)
