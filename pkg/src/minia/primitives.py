"""Constructed test geometry.

Small meshes with known topology and known silhouettes, used by the test
suite and the demo scripts.  Everything is built with exact (or at least
reproducible) coordinates and consistent outward winding unless a function
says otherwise.
"""

from __future__ import annotations

import math

import numpy as np

from .mesh import TriangleMesh, mesh_from_arrays

__all__ = [
    "tetrahedron",
    "box",
    "icosphere",
    "torus",
    "open_box",
    "fin",
    "flipped_face_sphere",
    "two_tetrahedra",
    "disk",
    "unit_square",
    "l_plate",
    "thin_l_stroke",
]


def tetrahedron(scale: float = 1.0, offset=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Closed tetrahedron with consistent outward winding."""
    v = np.array(
        [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=np.float64
    ) * scale + np.asarray(offset, dtype=np.float64)
    f = [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)]
    return mesh_from_arrays(v, f)


_BOX_FACES = [
    (0, 2, 1), (1, 2, 3),   # z = min
    (4, 5, 6), (5, 7, 6),   # z = max
    (0, 1, 5), (0, 5, 4),   # y = min
    (2, 7, 3), (2, 6, 7),   # y = max
    (0, 4, 6), (0, 6, 2),   # x = min
    (1, 7, 5), (1, 3, 7),   # x = max
]


def box(extents=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Closed axis-aligned box, 12 triangles."""
    e = np.asarray(extents, dtype=np.float64)
    o = np.asarray(origin, dtype=np.float64)
    corners = np.array(
        [[x, y, z] for z in (0, 1) for y in (0, 1) for x in (0, 1)],
        dtype=np.float64,
    )
    return mesh_from_arrays(corners * e + o, _BOX_FACES)


def icosphere(subdivisions: int = 1) -> TriangleMesh:
    """Unit sphere from a subdivided icosahedron (closed, genus 0)."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=np.float64) for v in verts]
    verts = [v / np.linalg.norm(v) for v in verts]

    for _ in range(subdivisions):
        midpoint_cache: dict = {}
        new_faces = []

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint_cache:
                m = (verts[a] + verts[b]) / 2.0
                verts.append(m / np.linalg.norm(m))
                midpoint_cache[key] = len(verts) - 1
            return midpoint_cache[key]

        for (a, b, c) in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces

    return mesh_from_arrays(np.array(verts), faces)


def torus(
    major_radius: float = 1.0,
    minor_radius: float = 0.35,
    major_segments: int = 24,
    minor_segments: int = 12,
) -> TriangleMesh:
    """Closed torus (genus 1)."""
    verts = []
    for i in range(major_segments):
        theta = 2.0 * math.pi * i / major_segments
        for j in range(minor_segments):
            phi = 2.0 * math.pi * j / minor_segments
            rho = major_radius + minor_radius * math.cos(phi)
            verts.append(
                (rho * math.cos(theta), rho * math.sin(theta),
                 minor_radius * math.sin(phi))
            )
    faces = []
    for i in range(major_segments):
        for j in range(minor_segments):
            a = i * minor_segments + j
            b = ((i + 1) % major_segments) * minor_segments + j
            c = ((i + 1) % major_segments) * minor_segments + (j + 1) % minor_segments
            d = i * minor_segments + (j + 1) % minor_segments
            faces += [(a, b, c), (a, c, d)]
    return mesh_from_arrays(np.array(verts), faces)


def open_box() -> TriangleMesh:
    """Unit box with its top removed: a 4-edge boundary loop."""
    corners = np.array(
        [[x, y, z] for z in (0, 1) for y in (0, 1) for x in (0, 1)],
        dtype=np.float64,
    )
    faces = [f for f in _BOX_FACES if f not in ((4, 5, 6), (5, 7, 6))]
    return mesh_from_arrays(corners, faces)


def fin() -> TriangleMesh:
    """Three triangles sharing one edge: a single non-manifold edge."""
    v = [
        (0, 0, 0), (0, 0, 1),          # the shared edge
        (1, 0, 0.5), (-1, 0, 0.5), (0, 1, 0.5),
    ]
    f = [(0, 1, 2), (0, 1, 3), (0, 1, 4)]
    return mesh_from_arrays(np.array(v, dtype=np.float64), f)


def flipped_face_sphere() -> TriangleMesh:
    """Icosahedron with one face wound backwards (3 inconsistent edges)."""
    base = icosphere(0)
    faces = np.array(base.faces)
    faces[0] = faces[0][::-1]
    return mesh_from_arrays(base.vertices, faces)


def two_tetrahedra() -> TriangleMesh:
    """Two disjoint closed tetrahedra: watertight, 2 components."""
    a = tetrahedron()
    b = tetrahedron(offset=(10.0, 0.0, 0.0))
    verts = np.vstack([a.vertices, b.vertices])
    faces = np.vstack([a.faces, b.faces + a.vertex_count])
    return mesh_from_arrays(verts, faces)


def disk(segments: int = 16) -> TriangleMesh:
    """Flat triangle fan: open, rotationally symmetric silhouette."""
    verts = [(0.0, 0.0, 0.0)]
    for i in range(segments):
        theta = 2.0 * math.pi * i / segments
        verts.append((math.cos(theta), math.sin(theta), 0.0))
    faces = [(0, 1 + i, 1 + (i + 1) % segments) for i in range(segments)]
    return mesh_from_arrays(np.array(verts, dtype=np.float64), faces)


def unit_square() -> TriangleMesh:
    """Two coplanar triangles covering [0,1]^2 at z = 0."""
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=np.float64)
    return mesh_from_arrays(v, [(0, 1, 2), (0, 2, 3)])


def _extruded_l(outline, thickness: float) -> TriangleMesh:
    """Extrude a star-shaped-from-vertex-0 CCW polygon along +z (closed)."""
    n = len(outline)
    bottom = [(x, y, 0.0) for (x, y) in outline]
    top = [(x, y, thickness) for (x, y) in outline]
    verts = np.array(bottom + top, dtype=np.float64)
    faces = []
    for k in range(1, n - 1):  # caps: fan from vertex 0
        faces.append((0, k + 1, k))                    # bottom, -z
        faces.append((n, n + k, n + k + 1))            # top, +z
    for i in range(n):  # side walls, outward
        j = (i + 1) % n
        faces.append((i, j, n + j))
        faces.append((i, n + j, n + i))
    return mesh_from_arrays(verts, faces)


def l_plate(thickness: float = 0.4) -> TriangleMesh:
    """Thin extruded L: chiral silhouette, thinnest axis = z.

    The footprint is the union of a 3 x 1 bar and a 1 x 4 bar sharing the
    corner at the origin, so every one of the 16 view hypotheses produces
    a distinct-or-mirror-twin silhouette.
    """
    outline = [(0, 0), (3, 0), (3, 1), (1, 1), (1, 4), (0, 4)]
    return _extruded_l(outline, thickness)


def thin_l_stroke(width: float = 0.45, thickness: float = 0.2) -> TriangleMesh:
    """L drawn with thin strokes: rotated views overlap it very little."""
    w = width
    outline = [(0, 0), (3, 0), (3, w), (w, w), (w, 4), (0, 4)]
    return _extruded_l(outline, thickness)
