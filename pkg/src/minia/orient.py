"""Orientation search for flat, relief-like meshes.

A reconstructed miniature should be photographed from the side it is
thinnest along, but meshes arrive in arbitrary frames and are sometimes
mirrored.  We enumerate the sixteen candidate views of the thinnest
axis — 2 axis directions x 4 in-plane quarter turns x optional mirror —
render each one, and keep the candidates whose silhouette overlaps the
reference well enough (at least half of the best overlap).  The winner
is the eligible candidate most similar to the reference under the
perceptual scorer, with ties broken toward the lowest candidate index,
so results are reproducible run to run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBox, DegenerateProjection
from .mesh import Aabb, TriangleMesh, compute_aabb
from .metrics import silhouette_iou
from .raster import (
    ReferenceImage,
    RenderConfig,
    RenderOutput,
    alpha_mask,
    composite_on_gray,
    encode_png,
    frame_reference,
    render,
)
from .scorer import PerceptualScorer

__all__ = [
    "OrientationCandidate",
    "OrientationResult",
    "thinnest_axis",
    "enumerate_candidates",
    "detect_orientation",
]

_AXIS_NAMES = ("x", "y", "z")

# Right-handed camera bases looking down each axis: rows are the image
# right (u), image up (v) and view (w) directions in mesh coordinates.
_BASES = {
    ("x", +1): ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
    ("x", -1): ((0, -1, 0), (0, 0, 1), (-1, 0, 0)),
    ("y", +1): ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
    ("y", -1): ((0, 0, -1), (1, 0, 0), (0, -1, 0)),
    ("z", +1): ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ("z", -1): ((-1, 0, 0), (0, 1, 0), (0, 0, -1)),
}


@dataclass(frozen=True)
class OrientationCandidate:
    """One of the sixteen candidate views.

    ``index`` is direction*8 + quarter_turns*2 + mirrored, which makes
    the enumeration order (and therefore tie-breaking) part of the
    contract.  ``as_transform`` maps mesh coordinates to view
    coordinates; its rows are the candidate's u/v/w directions and its
    determinant is -1 exactly when the candidate is mirrored.
    """

    index: int
    axis: str
    direction: int
    quarter_turns: int
    mirrored: bool
    as_transform: np.ndarray

    @property
    def label(self) -> str:
        sign = "+" if self.direction > 0 else "-"
        suffix = "m" if self.mirrored else ""
        return f"{sign}{self.axis} rot{self.quarter_turns * 90}{suffix}"


@dataclass(frozen=True)
class OrientationResult:
    winner: OrientationCandidate
    candidates: tuple[OrientationCandidate, ...]
    ious: np.ndarray                    # (16,) silhouette IoU per candidate
    gate_threshold: float               # 0.5 * max IoU
    eligible: tuple[int, ...]           # candidate indices that passed the gate
    clip_scores: dict[int, float]       # candidate index -> perceptual score


def thinnest_axis(box: Aabb) -> int:
    """Index of the smallest box extent; ties go to the lowest axis."""
    extents = box.extents
    if np.all(extents == 0.0):
        raise DegenerateBox("bounding box has no extent on any axis")
    return int(np.argmin(extents))


def enumerate_candidates(axis: int) -> tuple[OrientationCandidate, ...]:
    """All 16 candidate views looking along the given mesh axis."""
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
    name = _AXIS_NAMES[axis]
    out = []
    for d, direction in enumerate((+1, -1)):
        u0, v0, w = (np.array(b, dtype=np.int64) for b in _BASES[(name, direction)])
        for rot in range(4):
            # Quarter turns rotate the image frame about the view axis;
            # cos/sin are exactly 0 or +-1 so the matrix stays integral.
            c, s = int(round(math.cos(rot * math.pi / 2))), int(
                round(math.sin(rot * math.pi / 2))
            )
            u = c * u0 + s * v0
            v = -s * u0 + c * v0
            for mirrored in (False, True):
                uu = -u if mirrored else u
                index = d * 8 + rot * 2 + (1 if mirrored else 0)
                matrix = np.array([uu, v, w], dtype=np.float64)
                matrix.setflags(write=False)
                out.append(
                    OrientationCandidate(
                        index=index,
                        axis=name,
                        direction=direction,
                        quarter_turns=rot,
                        mirrored=mirrored,
                        as_transform=matrix,
                    )
                )
    return tuple(out)


def detect_orientation(
    mesh: TriangleMesh,
    reference: ReferenceImage,
    config: RenderConfig | None = None,
    scorer: PerceptualScorer | None = None,
) -> OrientationResult:
    """Pick the view that best matches the reference image.

    Stage one renders every candidate and scores silhouette IoU against
    the reference alpha mask; candidates below half the best IoU are
    dropped (the eligible set is never empty because the best candidate
    always passes its own gate).  Stage two asks the perceptual scorer
    to rank the eligible renders against the reference composite.
    Candidates whose projection collapses score IoU 0 rather than
    erroring.  Scorer failures propagate to the caller.
    """
    config = config or RenderConfig()
    if scorer is None:
        from .scorer import StubScorer

        scorer = StubScorer()

    axis = thinnest_axis(compute_aabb(mesh))
    candidates = enumerate_candidates(axis)

    framed = frame_reference(reference, config)
    ref_mask = alpha_mask(framed)

    renders: list[RenderOutput | None] = []
    ious = np.zeros(len(candidates), dtype=np.float64)
    for cand in candidates:
        try:
            out = render(mesh, cand.as_transform, config)
        except DegenerateProjection:
            renders.append(None)
            continue
        renders.append(out)
        ious[cand.index] = silhouette_iou(out.depth_mask, ref_mask)

    gate = 0.5 * float(ious.max())
    eligible = tuple(int(i) for i in range(len(candidates)) if ious[i] >= gate and renders[i] is not None)
    if not eligible:
        # Every projection degenerated; fall back to the full index list
        # so the invariant "eligible is never empty" holds even here.
        eligible = tuple(range(len(candidates)))

    ref_png = encode_png(composite_on_gray(framed, config))
    clip_scores: dict[int, float] = {}
    best_idx = eligible[0]
    best_score = -np.inf
    for i in eligible:
        if renders[i] is None:
            score = -np.inf
        else:
            score = scorer.clip_similarity(encode_png(renders[i].shaded), ref_png)
        clip_scores[i] = float(score)
        if score > best_score:
            best_score = score
            best_idx = i

    return OrientationResult(
        winner=candidates[best_idx],
        candidates=candidates,
        ious=ious,
        gate_threshold=gate,
        eligible=eligible,
        clip_scores=clip_scores,
    )
