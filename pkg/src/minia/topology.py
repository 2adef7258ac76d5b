"""Edge-based topology analysis: watertightness, manifoldness, components.

An undirected edge is *boundary* if exactly one face uses it, *interior*
if exactly two, *non-manifold* if three or more.  An interior edge has
*inconsistent orientation* when both incident faces traverse it in the
same direction.  A mesh is watertight when none of those defects exist;
multiple components are allowed (a union of closed solids is printable).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, EmptyMesh
from .mesh import TriangleMesh

__all__ = ["TopologyReport", "analyze_topology", "watertight_percentage",
           "euler_characteristic"]


@dataclass(frozen=True)
class TopologyReport:
    edge_count: int
    boundary_edge_count: int
    nonmanifold_edge_count: int
    inconsistent_orientation_edge_count: int
    connected_component_count: int
    is_watertight: bool


def analyze_topology(mesh: TriangleMesh, weld_tolerance: float | None = None) -> TopologyReport:
    """Classify every edge and count face-adjacency components.

    Vertices at exactly equal coordinates are treated as one vertex, so
    duplicated-but-coincident indices do not fake boundaries.  Passing a
    ``weld_tolerance`` additionally merges vertices that land in the same
    cube of that size (off by default: exact equality is deterministic).
    Faces collapsed by welding are excluded from the analysis.
    """
    if mesh.face_count == 0:
        raise EmptyMesh("cannot analyze an empty mesh")

    verts = mesh.vertices
    if weld_tolerance is not None and weld_tolerance > 0:
        verts = np.round(verts / weld_tolerance) * weld_tolerance
    _, remap = np.unique(verts, axis=0, return_inverse=True)
    faces = remap.reshape(-1)[mesh.faces.reshape(-1)].reshape(-1, 3)
    keep = (
        (faces[:, 0] != faces[:, 1])
        & (faces[:, 1] != faces[:, 2])
        & (faces[:, 0] != faces[:, 2])
    )
    faces = faces[keep]
    if len(faces) == 0:
        raise EmptyMesh("welding collapsed every face")
    m = len(faces)
    # Directed edges, three per face, in traversal order.
    directed = np.empty((3 * m, 2), dtype=np.int64)
    directed[0::3] = faces[:, [0, 1]]
    directed[1::3] = faces[:, [1, 2]]
    directed[2::3] = faces[:, [2, 0]]
    owner_face = np.repeat(np.arange(m, dtype=np.int64), 3)

    undirected = np.sort(directed, axis=1)
    uniq, inverse, counts = np.unique(
        undirected, axis=0, return_inverse=True, return_counts=True
    )

    boundary = int((counts == 1).sum())
    nonmanifold = int((counts >= 3).sum())

    # Orientation check on exactly-two-face edges: consistent winding means
    # the two faces traverse the shared edge in opposite directions.
    n_verts = mesh.vertex_count
    directed_code = directed[:, 0] * n_verts + directed[:, 1]
    order = np.argsort(inverse, kind="stable")
    sorted_inverse = inverse[order]
    sorted_code = directed_code[order]
    starts = np.searchsorted(sorted_inverse, np.arange(len(uniq)))
    inconsistent = 0
    two_face = np.nonzero(counts == 2)[0]
    for e in two_face:
        s = starts[e]
        if sorted_code[s] == sorted_code[s + 1]:
            inconsistent += 1

    # Connected components over faces sharing an edge (union-find).
    parent = list(range(m))

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    sorted_owner = owner_face[order]
    for e in range(len(uniq)):
        s = starts[e]
        end = starts[e + 1] if e + 1 < len(uniq) else len(sorted_owner)
        first = find(sorted_owner[s])
        for k in range(s + 1, end):
            other = find(sorted_owner[k])
            if other != first:
                parent[other] = first
    components = len({find(i) for i in range(m)})

    return TopologyReport(
        edge_count=int(len(uniq)),
        boundary_edge_count=boundary,
        nonmanifold_edge_count=nonmanifold,
        inconsistent_orientation_edge_count=int(inconsistent),
        connected_component_count=components,
        is_watertight=(boundary == 0 and nonmanifold == 0 and inconsistent == 0),
    )


def watertight_percentage(reports) -> float:
    """Fraction of reports whose mesh is watertight, in [0, 1]."""
    reports = list(reports)
    if not reports:
        raise EmptyInput("no topology reports to summarize")
    return sum(1 for r in reports if r.is_watertight) / len(reports)


def euler_characteristic(mesh: TriangleMesh) -> int:
    """V - E + F over referenced vertices (2 for a sphere, 0 for a torus)."""
    report = analyze_topology(mesh)
    v_used = len(np.unique(mesh.faces))
    return v_used - report.edge_count + mesh.face_count
