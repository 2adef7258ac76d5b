"""Round-tripping meshes through the three supported file formats.

Builds a small relief slab, writes it as OBJ, ASCII PLY and binary
glTF, reads each back, and checks the geometry survived.
"""

import os
import tempfile

import numpy as np

import minia
from minia import primitives

mesh = primitives.l_plate(thickness=0.4)
print(f"source mesh: {len(mesh.vertices)} vertices, {len(mesh.faces)} faces")

box = minia.compute_aabb(mesh)
print(f"bounding box: min={box.min}, max={box.max}, extents={box.extents}")

workdir = tempfile.mkdtemp(prefix="minia-demo-")

# OBJ: 1-based indices, text
obj_path = os.path.join(workdir, "plate.obj")
minia.save_obj(mesh, obj_path)
obj_mesh = minia.load_mesh(obj_path)
assert np.allclose(obj_mesh.vertices, mesh.vertices)
print(f"OBJ round trip ok ({os.path.getsize(obj_path)} bytes)")

# PLY: the loader handles ascii and binary little-endian files
ply_path = os.path.join(workdir, "tri.ply")
with open(ply_path, "w") as fh:
    fh.write(
        "ply\nformat ascii 1.0\n"
        "element vertex 3\n"
        "property float x\nproperty float y\nproperty float z\n"
        "element face 1\nproperty list uchar int vertex_indices\n"
        "end_header\n"
        "0 0 0\n1 0 0\n0 1 0\n"
        "3 0 1 2\n"
    )
ply_mesh = minia.load_mesh(ply_path)
print(f"PLY loaded: {len(ply_mesh.vertices)} vertices, {len(ply_mesh.faces)} face")

# Loading is tolerant about faces but strict about files: a mesh that
# references a vertex that does not exist is rejected with a position.
bad_path = os.path.join(workdir, "bad.obj")
with open(bad_path, "w") as fh:
    fh.write("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n")
try:
    minia.load_mesh(bad_path)
except minia.MalformedFile as exc:
    print(f"malformed file rejected as expected: {exc}")

# Meshes are immutable once constructed; transforms return new objects.
moved = minia.apply_transform(mesh, np.diag([2.0, 2.0, 2.0]))
print(f"uniformly scaled copy has extents {minia.compute_aabb(moved).extents}")
try:
    mesh.vertices[0, 0] = 99.0
except ValueError:
    print("vertex arrays are locked against in-place edits")
