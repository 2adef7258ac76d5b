"""Watertightness and topology classification on constructed meshes.

Every edge of a mesh is classified by how many faces share it and
whether the two sides traverse it in opposite directions.  A mesh is
watertight when every edge is interior and consistently oriented.
"""

import minia
from minia import primitives

CASES = [
    ("closed tetrahedron", primitives.tetrahedron()),
    ("closed box", primitives.box((1, 1, 1))),
    ("icosphere (1 subdivision)", primitives.icosphere(1)),
    ("torus", primitives.torus(1.0, 0.35, 24, 12)),
    ("box with one face removed", primitives.open_box()),
    ("fin (three faces on one edge)", primitives.fin()),
    ("sphere with flipped faces", primitives.flipped_face_sphere()),
    ("two disjoint tetrahedra", primitives.two_tetrahedra()),
    ("flat disk", primitives.disk(16)),
    ("single square", primitives.unit_square()),
    ("extruded L plate", primitives.l_plate(0.4)),
]

print(f"{'mesh':32s} {'edges':>6s} {'bdry':>5s} {'nonmf':>5s} {'flip':>5s} {'comp':>5s}  watertight")
for name, mesh in CASES:
    r = minia.analyze_topology(mesh)
    print(
        f"{name:32s} {r.edge_count:6d} {r.boundary_edge_count:5d} "
        f"{r.nonmanifold_edge_count:5d} {r.inconsistent_orientation_edge_count:5d} "
        f"{r.connected_component_count:5d}  {r.is_watertight}"
    )

print()
print("Euler characteristic V - E + F:")
for name, mesh in [("icosphere", primitives.icosphere(2)),
                   ("torus", primitives.torus(1.0, 0.3, 24, 12)),
                   ("disk", primitives.disk(16))]:
    print(f"  {name}: {minia.euler_characteristic(mesh)}")

# Reconstruction output often has hairline cracks; a weld tolerance
# merges vertices closer than the given distance before analysis.
import numpy as np

gap = 1e-9
cracked = minia.mesh_from_arrays(
    np.array([
        [0, 0, 0], [1, 0, 0], [0, 1, 0],               # first triangle
        [1 + gap, 0, 0], [gap, 1, 0], [1, 1, 0],       # second, offset by the gap
    ], dtype=float),
    np.array([[0, 1, 2], [3, 5, 4]]),
)
loose = minia.analyze_topology(cracked)
welded = minia.analyze_topology(cracked, weld_tolerance=1e-6)
print(f"\ncracked quad: {loose.connected_component_count} components unwelded, "
      f"{welded.connected_component_count} after welding at 1e-6")

reports = [minia.analyze_topology(m) for _, m in CASES]
fraction = minia.watertight_percentage(reports)
print(f"watertight fraction over the suite: {fraction:.3f} "
      f"({fraction * 100:.0f}% of {len(reports)} meshes)")
