"""Triangle meshes, bounding boxes, and exact rigid/mirror transforms.

Meshes are immutable after construction (the backing arrays are locked) so
they can be shared freely across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMesh

__all__ = [
    "TriangleMesh",
    "Aabb",
    "mesh_from_arrays",
    "compute_aabb",
    "apply_transform",
    "save_obj",
]


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle geometry plus provenance.

    Attributes
    ----------
    vertices : (n, 3) float64 array
        Vertex positions in model units.
    faces : (m, 3) int64 array
        Vertex-index triples.
    source_format : str
        One of ``obj``, ``ply``, ``glb`` (or ``constructed`` for test
        geometry built in code).
    method_id, figure_id : str
        Which reconstruction method produced the mesh and for which figure.
    degenerate_faces_dropped : int
        Number of faces removed at load because they repeated a vertex index.
    """

    vertices: np.ndarray
    faces: np.ndarray
    source_format: str = "constructed"
    method_id: str = ""
    figure_id: str = ""
    degenerate_faces_dropped: int = 0

    @property
    def vertex_count(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def face_count(self) -> int:
        return int(self.faces.shape[0])


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box: componentwise min/max of all vertices."""

    min: np.ndarray
    max: np.ndarray

    @property
    def extents(self) -> np.ndarray:
        """Per-axis lengths, ``max - min`` (non-negative)."""
        return self.max - self.min

    @property
    def center(self) -> np.ndarray:
        return (self.min + self.max) / 2.0


def mesh_from_arrays(
    vertices,
    faces,
    source_format: str = "constructed",
    method_id: str = "",
    figure_id: str = "",
) -> TriangleMesh:
    """Build a validated, immutable TriangleMesh from raw arrays.

    Faces that repeat a vertex index are dropped and counted.  Raises
    ``EmptyMesh`` if nothing survives, ``ValueError`` on out-of-range
    indices or non-finite coordinates.
    """
    verts = np.ascontiguousarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[1] != 3:
        raise ValueError(f"vertices must be (n, 3), got {verts.shape}")
    if not np.isfinite(verts).all():
        raise ValueError("vertex coordinates must be finite")

    tris = np.ascontiguousarray(faces, dtype=np.int64)
    if tris.size == 0:
        tris = tris.reshape(0, 3)
    if tris.ndim != 2 or tris.shape[1] != 3:
        raise ValueError(f"faces must be (m, 3), got {tris.shape}")
    if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
        raise ValueError("face index out of range")

    # Drop faces with a repeated vertex index (zero-area by construction).
    ok = (
        (tris[:, 0] != tris[:, 1])
        & (tris[:, 1] != tris[:, 2])
        & (tris[:, 0] != tris[:, 2])
    )
    dropped = int((~ok).sum())
    tris = tris[ok]
    if len(tris) == 0:
        raise EmptyMesh("mesh has zero faces after cleanup")

    verts.setflags(write=False)
    tris.setflags(write=False)
    return TriangleMesh(
        vertices=verts,
        faces=tris,
        source_format=source_format,
        method_id=method_id,
        figure_id=figure_id,
        degenerate_faces_dropped=dropped,
    )


def compute_aabb(mesh: TriangleMesh) -> Aabb:
    """Exact componentwise vertex extrema."""
    if mesh.vertex_count == 0:
        raise EmptyMesh("cannot bound an empty mesh")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    lo.setflags(write=False)
    hi.setflags(write=False)
    return Aabb(min=lo, max=hi)


def apply_transform(mesh: TriangleMesh, matrix, translation=None) -> TriangleMesh:
    """Map every vertex through ``matrix @ v + translation``.

    The matrix is expected to be orthogonal up to sign (rotations, axis
    swaps, single-axis mirrors; determinant +/-1).  Faces are left
    untouched: rendering is double-sided, so a mirrored winding does not
    need repair.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError("transform matrix must be 3x3")
    out = mesh.vertices @ m.T
    if translation is not None:
        out = out + np.asarray(translation, dtype=np.float64)
    out = np.ascontiguousarray(out)
    out.setflags(write=False)
    return TriangleMesh(
        vertices=out,
        faces=mesh.faces,
        source_format=mesh.source_format,
        method_id=mesh.method_id,
        figure_id=mesh.figure_id,
        degenerate_faces_dropped=mesh.degenerate_faces_dropped,
    )


def save_obj(mesh: TriangleMesh, path) -> None:
    """Write the mesh as ASCII OBJ (positions and faces only)."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.8f} {v[1]:.8f} {v[2]:.8f}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
