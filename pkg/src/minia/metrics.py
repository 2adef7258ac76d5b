"""Per-figure quality metrics and their aggregation.

Nothing here needs ground-truth geometry: every number is computed
against the reference image (silhouette overlap, perceptual distance,
embedding similarity) or against the mesh itself (flatness of the
bounding box, watertightness).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBox, DimensionMismatch, EmptyInput
from .mesh import Aabb, TriangleMesh, compute_aabb
from .raster import (
    ReferenceImage,
    RenderConfig,
    alpha_mask,
    composite_on_gray,
    encode_png,
    frame_reference,
    render,
)
from .scorer import PerceptualScorer
from .topology import analyze_topology

__all__ = [
    "MetricRecord",
    "AggregateRow",
    "silhouette_iou",
    "depth_range_ratio",
    "evaluate_figure",
    "aggregate",
]

_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


def silhouette_iou(mask_a: np.ndarray, mask_b: np.ndarray) -> float:
    """Intersection-over-union of two boolean masks.

    Two empty masks agree perfectly (1.0); one empty mask against a
    non-empty one is a total miss (0.0).
    """
    mask_a = np.asarray(mask_a, dtype=bool)
    mask_b = np.asarray(mask_b, dtype=bool)
    if mask_a.shape != mask_b.shape:
        raise DimensionMismatch(
            f"mask shapes differ: {mask_a.shape} vs {mask_b.shape}"
        )
    a_any = bool(mask_a.any())
    b_any = bool(mask_b.any())
    if not a_any and not b_any:
        return 1.0
    if not a_any or not b_any:
        return 0.0
    inter = np.count_nonzero(mask_a & mask_b)
    union = np.count_nonzero(mask_a | mask_b)
    return float(inter) / float(union)


def depth_range_ratio(box: Aabb, view_axis: int | str) -> float:
    """Extent along the viewing axis over the larger in-plane extent.

    Flat reliefs score low; blobby reconstructions score high.  The
    ratio is invariant to uniform scaling of the box.
    """
    if isinstance(view_axis, str):
        view_axis = _AXIS_INDEX[view_axis.lstrip("+-")]
    if view_axis not in (0, 1, 2):
        raise ValueError(f"view_axis must name one of three axes, got {view_axis!r}")
    extents = box.extents
    inplane = [extents[i] for i in range(3) if i != view_axis]
    denom = max(inplane)
    if denom <= 0.0:
        raise DegenerateBox("box has no in-plane extent; depth ratio undefined")
    return float(extents[view_axis]) / float(denom)


@dataclass(frozen=True)
class MetricRecord:
    """All metrics for one (figure, method) pair."""

    figure_id: str
    method_id: str
    silhouette_iou: float
    lpips: float
    clip_similarity: float
    depth_range_ratio: float
    is_watertight: bool
    orientation_index: int
    orientation_label: str


@dataclass(frozen=True)
class AggregateRow:
    """Per-method means over every figure the method reconstructed."""

    method_id: str
    figure_count: int
    mean_silhouette_iou: float
    mean_lpips: float
    mean_clip_similarity: float
    mean_depth_range_ratio: float
    watertight_pct: float


def evaluate_figure(
    mesh: TriangleMesh,
    reference: ReferenceImage,
    config: RenderConfig | None = None,
    scorer: PerceptualScorer | None = None,
) -> MetricRecord:
    """Orient the mesh against its reference and score every metric."""
    from .orient import detect_orientation

    config = config or RenderConfig()
    if scorer is None:
        from .scorer import StubScorer

        scorer = StubScorer()

    result = detect_orientation(mesh, reference, config, scorer)
    winner = result.winner

    out = render(mesh, winner.as_transform, config)
    framed = frame_reference(reference, config)
    iou = silhouette_iou(out.depth_mask, alpha_mask(framed))

    render_png = encode_png(out.shaded)
    ref_png = encode_png(composite_on_gray(framed, config))
    lpips_value = scorer.lpips(render_png, ref_png)
    clip_value = scorer.clip_similarity(render_png, ref_png)

    ratio = depth_range_ratio(compute_aabb(mesh), winner.axis)
    topo = analyze_topology(mesh)

    return MetricRecord(
        figure_id=mesh.figure_id,
        method_id=mesh.method_id,
        silhouette_iou=iou,
        lpips=lpips_value,
        clip_similarity=clip_value,
        depth_range_ratio=ratio,
        is_watertight=topo.is_watertight,
        orientation_index=winner.index,
        orientation_label=winner.label,
    )


def aggregate(records: list[MetricRecord]) -> list[AggregateRow]:
    """Reduce per-figure records to one row per method.

    Rows come back sorted by method id.  Means are accumulated in
    sorted figure order so the result is independent of input order
    down to the last bit.
    """
    if not records:
        raise EmptyInput("no metric records to aggregate")
    by_method: dict[str, list[MetricRecord]] = {}
    for rec in records:
        by_method.setdefault(rec.method_id, []).append(rec)

    rows = []
    for method_id in sorted(by_method):
        group = sorted(
            by_method[method_id],
            key=lambda r: (r.figure_id, r.silhouette_iou, r.lpips, r.clip_similarity),
        )
        n = len(group)
        rows.append(
            AggregateRow(
                method_id=method_id,
                figure_count=n,
                mean_silhouette_iou=sum(r.silhouette_iou for r in group) / n,
                mean_lpips=sum(r.lpips for r in group) / n,
                mean_clip_similarity=sum(r.clip_similarity for r in group) / n,
                mean_depth_range_ratio=sum(r.depth_range_ratio for r in group) / n,
                watertight_pct=100.0 * sum(r.is_watertight for r in group) / n,
            )
        )
    return rows
