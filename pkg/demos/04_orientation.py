"""Recovering how a reconstructed relief faces the camera.

A generator may hand back its mesh in any of 16 poses: viewed from
either side of the thinnest bounding-box axis, rotated by a quarter
turn, possibly mirrored.  Detection renders all 16, gates them on
silhouette overlap with the reference, and lets the perceptual scorer
pick among the survivors.
"""

import numpy as np

import minia
from minia import primitives

config = minia.RenderConfig(resolution=256)
mesh = primitives.l_plate(0.4)

axis = minia.thinnest_axis(minia.compute_aabb(mesh))
candidates = minia.enumerate_candidates(axis)
print(f"thinnest axis: {'xyz'[axis]}; {len(candidates)} candidate views")

# The "reference" is a render of the original pose, so detection on a
# scrambled copy should find its way back.
reference_pose = candidates[0]
out = minia.render(mesh, reference_pose.as_transform, config)
alpha = np.where(out.depth_mask, 255, 0).astype(np.uint8)
reference = minia.ReferenceImage(rgba=np.dstack([out.shaded, alpha]))

scrambler = candidates[13]   # -axis view, quarter turn, mirrored
scrambled = minia.apply_transform(mesh, scrambler.as_transform)
print(f"mesh scrambled with candidate 13 ({scrambler.label})")

result = minia.detect_orientation(scrambled, reference, config, minia.StubScorer())

print(f"\n{'idx':>3s}  {'label':12s} {'IoU':>6s}  {'CLIP':>6s}")
for cand in result.candidates:
    iou = result.ious[cand.index]
    clip = result.clip_scores.get(cand.index)
    clip_cell = f"{clip:6.3f}" if clip is not None else " below"
    marker = "  <- winner" if cand.index == result.winner.index else ""
    print(f"{cand.index:3d}  {cand.label:12s} {iou:6.3f}  {clip_cell}{marker}")

print(f"\nIoU gate at {result.gate_threshold:.3f} "
      f"left {len(result.eligible)} of 16 candidates for the scorer")
winner_iou = result.ious[result.winner.index]
print(f"winner IoU {winner_iou:.4f} (maximal: {winner_iou == max(result.ious)})")

# Flat geometry has a symmetry: viewing the back mirrored looks exactly
# like the front, so two candidates can tie at IoU 1.0.  Ties resolve
# to the lowest index, which is why the winner need not be literally
# the inverse of the scrambling transform.
