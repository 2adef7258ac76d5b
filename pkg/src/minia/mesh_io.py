"""Mesh loading from OBJ, PLY (ascii / binary little-endian), and GLB.

Only geometry is consumed: vertex positions and face indices.  Materials,
textures, normals and UVs are ignored.  Polygons are triangulated by fan.
Parse failures raise ``MalformedFile`` carrying the byte offset of the
offending record.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import MalformedFile, UnsupportedFormat
from .mesh import TriangleMesh, mesh_from_arrays

__all__ = ["load_mesh"]

_GLB_MAGIC = 0x46546C67  # "glTF"
_CHUNK_JSON = 0x4E4F534A
_CHUNK_BIN = 0x004E4942


def load_mesh(path, method_id: str = "", figure_id: str = "") -> TriangleMesh:
    """Load and validate a triangle mesh.

    Parameters
    ----------
    path : str or Path
        File to read.  Format is sniffed from magic bytes (PLY, GLB) or
        the ``.obj`` extension.
    method_id, figure_id : str
        Provenance carried on the returned mesh.

    Returns
    -------
    TriangleMesh
        With degenerate (repeated-index) faces dropped and counted.
    """
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) >= 4 and struct.unpack("<I", data[:4])[0] == _GLB_MAGIC:
        verts, faces = _parse_glb(data)
        fmt = "glb"
    elif data[:3] == b"ply":
        verts, faces = _parse_ply(data)
        fmt = "ply"
    elif path.lower().endswith(".obj"):
        verts, faces = _parse_obj(data)
        fmt = "obj"
    elif path.lower().endswith((".ply", ".glb")):
        raise MalformedFile("missing format magic", 0)
    else:
        raise UnsupportedFormat(f"cannot identify mesh format of {path!r}")

    return mesh_from_arrays(
        verts, faces, source_format=fmt, method_id=method_id, figure_id=figure_id
    )


# ---------------------------------------------------------------- OBJ


def _parse_obj(data: bytes):
    verts = []
    faces = []
    offset = 0
    for raw_line in data.split(b"\n"):
        line_offset = offset
        offset += len(raw_line) + 1
        line = raw_line.strip()
        if not line or line.startswith(b"#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == b"v":
            if len(parts) < 4:
                raise MalformedFile("vertex record needs 3 coordinates", line_offset)
            try:
                verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError:
                raise MalformedFile("bad vertex coordinate", line_offset) from None
        elif tag == b"f":
            if len(parts) < 4:
                raise MalformedFile("face record needs >= 3 vertices", line_offset)
            idx = []
            for token in parts[1:]:
                head = token.split(b"/")[0]
                try:
                    i = int(head)
                except ValueError:
                    raise MalformedFile("bad face index", line_offset) from None
                if i > 0:
                    i -= 1
                elif i < 0:
                    i += len(verts)
                else:
                    raise MalformedFile("face index 0 is not valid", line_offset)
                if not 0 <= i < len(verts):
                    raise MalformedFile("face index out of range", line_offset)
                idx.append(i)
            for k in range(1, len(idx) - 1):  # fan triangulation
                faces.append((idx[0], idx[k], idx[k + 1]))
        # everything else (vn, vt, o, g, s, usemtl, mtllib, ...) is ignored
    return np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(
        faces, dtype=np.int64
    ).reshape(-1, 3)


# ---------------------------------------------------------------- PLY

_PLY_SCALARS = {
    b"char": ("b", 1), b"int8": ("b", 1),
    b"uchar": ("B", 1), b"uint8": ("B", 1),
    b"short": ("h", 2), b"int16": ("h", 2),
    b"ushort": ("H", 2), b"uint16": ("H", 2),
    b"int": ("i", 4), b"int32": ("i", 4),
    b"uint": ("I", 4), b"uint32": ("I", 4),
    b"float": ("f", 4), b"float32": ("f", 4),
    b"double": ("d", 8), b"float64": ("d", 8),
}


def _parse_ply(data: bytes):
    end = data.find(b"end_header")
    if end < 0:
        raise MalformedFile("PLY header has no end_header", len(data))
    nl = data.find(b"\n", end)
    if nl < 0:
        raise MalformedFile("end_header line not terminated", end)
    body_start = nl + 1

    fmt = None
    elements = []  # (name, count, [properties]) in declaration order
    offset = 0
    for raw_line in data[:body_start].split(b"\n"):
        line_offset = offset
        offset += len(raw_line) + 1
        line = raw_line.strip()
        if not line or line == b"ply" or line.startswith(b"comment"):
            continue
        parts = line.split()
        if parts[0] == b"format":
            if parts[1] == b"ascii":
                fmt = "ascii"
            elif parts[1] == b"binary_little_endian":
                fmt = "binary"
            elif parts[1] == b"binary_big_endian":
                raise UnsupportedFormat("big-endian PLY is not supported")
            else:
                raise MalformedFile("unknown PLY format", line_offset)
        elif parts[0] == b"element":
            if len(parts) != 3:
                raise MalformedFile("bad element declaration", line_offset)
            try:
                elements.append([parts[1].decode(), int(parts[2]), []])
            except ValueError:
                raise MalformedFile("bad element count", line_offset) from None
        elif parts[0] == b"property":
            if not elements:
                raise MalformedFile("property before any element", line_offset)
            if parts[1] == b"list":
                if len(parts) != 5:
                    raise MalformedFile("bad list property", line_offset)
                elements[-1][2].append(("list", parts[2], parts[3], parts[4].decode()))
            else:
                if len(parts) != 3:
                    raise MalformedFile("bad scalar property", line_offset)
                elements[-1][2].append(("scalar", parts[1], parts[2].decode()))
        elif parts[0] == b"end_header":
            break
    if fmt is None:
        raise MalformedFile("PLY header missing format line", 0)

    if fmt == "ascii":
        return _ply_body_ascii(data, body_start, elements)
    return _ply_body_binary(data, body_start, elements)


def _ply_body_ascii(data: bytes, body_start: int, elements):
    verts, faces = [], []
    offset = body_start
    lines = data[body_start:].split(b"\n")
    line_no = 0

    def next_line():
        nonlocal line_no, offset
        while line_no < len(lines):
            line_offset = offset
            raw = lines[line_no]
            line_no += 1
            offset += len(raw) + 1
            stripped = raw.strip()
            if stripped:
                return stripped, line_offset
        raise MalformedFile("unexpected end of PLY body", len(data))

    for name, count, props in elements:
        for _ in range(count):
            line, line_offset = next_line()
            fields = line.split()
            cursor = 0
            values = {}
            for prop in props:
                if prop[0] == "scalar":
                    if cursor >= len(fields):
                        raise MalformedFile("short PLY record", line_offset)
                    try:
                        values[prop[2]] = float(fields[cursor])
                    except ValueError:
                        raise MalformedFile("bad PLY scalar", line_offset) from None
                    cursor += 1
                else:
                    if cursor >= len(fields):
                        raise MalformedFile("short PLY record", line_offset)
                    try:
                        n = int(fields[cursor])
                        lst = [int(x) for x in fields[cursor + 1 : cursor + 1 + n]]
                    except ValueError:
                        raise MalformedFile("bad PLY list", line_offset) from None
                    if len(lst) != n:
                        raise MalformedFile("short PLY list", line_offset)
                    cursor += 1 + n
                    values[prop[3]] = lst
            _ply_collect(name, values, verts, faces, line_offset)
    return (
        np.array(verts, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )


def _ply_body_binary(data: bytes, body_start: int, elements):
    verts, faces = [], []
    pos = body_start
    for name, count, props in elements:
        for _ in range(count):
            rec_offset = pos
            values = {}
            for prop in props:
                if prop[0] == "scalar":
                    code, size = _ply_scalar(prop[1], rec_offset)
                    if pos + size > len(data):
                        raise MalformedFile("truncated PLY body", pos)
                    values[prop[2]] = struct.unpack_from("<" + code, data, pos)[0]
                    pos += size
                else:
                    ccode, csize = _ply_scalar(prop[1], rec_offset)
                    icode, isize = _ply_scalar(prop[2], rec_offset)
                    if pos + csize > len(data):
                        raise MalformedFile("truncated PLY body", pos)
                    n = struct.unpack_from("<" + ccode, data, pos)[0]
                    pos += csize
                    if pos + n * isize > len(data):
                        raise MalformedFile("truncated PLY list", pos)
                    values[prop[3]] = list(
                        struct.unpack_from(f"<{n}{icode}", data, pos)
                    )
                    pos += n * isize
            _ply_collect(name, values, verts, faces, rec_offset)
    return (
        np.array(verts, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )


def _ply_scalar(type_token: bytes, offset: int):
    try:
        return _PLY_SCALARS[type_token]
    except KeyError:
        raise MalformedFile(
            f"unknown PLY scalar type {type_token!r}", offset
        ) from None


def _ply_collect(element_name, values, verts, faces, offset):
    if element_name == "vertex":
        try:
            verts.append((values["x"], values["y"], values["z"]))
        except KeyError:
            raise MalformedFile("vertex element lacks x/y/z", offset) from None
    elif element_name == "face":
        lst = values.get("vertex_indices", values.get("vertex_index"))
        if lst is None:
            raise MalformedFile("face element lacks vertex_indices", offset)
        idx = [int(i) for i in lst]
        if len(idx) < 3:
            raise MalformedFile("face with fewer than 3 vertices", offset)
        for k in range(1, len(idx) - 1):
            faces.append((idx[0], idx[k], idx[k + 1]))
    # other elements (edge, material, ...) are skipped


# ---------------------------------------------------------------- GLB

_COMPONENT_DTYPES = {
    5120: np.int8,
    5121: np.uint8,
    5122: np.int16,
    5123: np.uint16,
    5125: np.uint32,
    5126: np.float32,
}
_TYPE_WIDTH = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4}


def _parse_glb(data: bytes):
    if len(data) < 12:
        raise MalformedFile("GLB shorter than its header", 0)
    magic, version, total = struct.unpack_from("<III", data, 0)
    if magic != _GLB_MAGIC:
        raise MalformedFile("bad GLB magic", 0)
    if version != 2:
        raise UnsupportedFormat(f"GLB version {version} not supported")

    json_doc = None
    bin_chunk = b""
    pos = 12
    while pos + 8 <= min(total, len(data)):
        length, ctype = struct.unpack_from("<II", data, pos)
        start = pos + 8
        if start + length > len(data):
            raise MalformedFile("truncated GLB chunk", pos)
        payload = data[start : start + length]
        if ctype == _CHUNK_JSON:
            try:
                json_doc = json.loads(payload)
            except json.JSONDecodeError as exc:
                raise MalformedFile(f"bad GLB JSON: {exc}", start) from None
        elif ctype == _CHUNK_BIN:
            bin_chunk = payload
        pos = start + length
    if json_doc is None:
        raise MalformedFile("GLB has no JSON chunk", 12)

    accessors = json_doc.get("accessors", [])
    views = json_doc.get("bufferViews", [])
    meshes = json_doc.get("meshes", [])
    nodes = json_doc.get("nodes", [])

    def read_accessor(index):
        acc = accessors[index]
        dtype = _COMPONENT_DTYPES.get(acc["componentType"])
        if dtype is None:
            raise MalformedFile(
                f"unsupported accessor componentType {acc['componentType']}", 12
            )
        width = _TYPE_WIDTH[acc["type"]]
        count = acc["count"]
        view = views[acc["bufferView"]]
        base = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
        itemsize = np.dtype(dtype).itemsize * width
        stride = view.get("byteStride", itemsize)
        if stride == itemsize:
            flat = np.frombuffer(bin_chunk, dtype=dtype, count=count * width, offset=base)
            arr = flat.reshape(count, width)
        else:  # interleaved: gather row by row
            rows = np.empty((count, width), dtype=dtype)
            for i in range(count):
                rows[i] = np.frombuffer(
                    bin_chunk, dtype=dtype, count=width, offset=base + i * stride
                )
            arr = rows
        return arr

    # Walk every node, baking the transform chain down to each primitive.
    all_verts = []
    all_faces = []
    vert_base = 0

    def node_matrix(node):
        if "matrix" in node:
            return np.array(node["matrix"], dtype=np.float64).reshape(4, 4).T
        m = np.eye(4)
        if "scale" in node:
            m = m @ np.diag(list(node["scale"]) + [1.0])
        if "rotation" in node:
            x, y, z, w = node["rotation"]
            r = np.array(
                [
                    [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                    [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                    [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
                ]
            )
            rm = np.eye(4)
            rm[:3, :3] = r
            m = rm @ m
        if "translation" in node:
            tm = np.eye(4)
            tm[:3, 3] = node["translation"]
            m = tm @ m
        return m

    def emit_mesh(mesh_index, world):
        nonlocal vert_base
        for prim in meshes[mesh_index].get("primitives", []):
            if prim.get("mode", 4) != 4:
                continue  # only plain triangles
            attrs = prim.get("attributes", {})
            if "POSITION" not in attrs:
                continue
            pos = read_accessor(attrs["POSITION"]).astype(np.float64)
            if "indices" in prim:
                idx = read_accessor(prim["indices"]).reshape(-1).astype(np.int64)
            else:
                idx = np.arange(len(pos), dtype=np.int64)
            if len(idx) % 3 != 0:
                raise MalformedFile("triangle index count not divisible by 3", 12)
            hom = np.concatenate([pos, np.ones((len(pos), 1))], axis=1)
            world_pos = (hom @ world.T)[:, :3]
            all_verts.append(world_pos)
            all_faces.append(idx.reshape(-1, 3) + vert_base)
            vert_base += len(pos)

    def walk(node_index, parent):
        node = nodes[node_index]
        world = parent @ node_matrix(node)
        if "mesh" in node:
            emit_mesh(node["mesh"], world)
        for child in node.get("children", []):
            walk(child, world)

    scenes = json_doc.get("scenes")
    if scenes:
        roots = []
        for scene in scenes:
            roots.extend(scene.get("nodes", []))
    else:
        roots = list(range(len(nodes)))
    if nodes:
        seen_as_child = {c for n in nodes for c in n.get("children", [])}
        if not scenes:
            roots = [i for i in range(len(nodes)) if i not in seen_as_child]
        for r in roots:
            walk(r, np.eye(4))
    else:
        # No node tree: take the meshes as they are.
        for mi in range(len(meshes)):
            emit_mesh(mi, np.eye(4))

    if not all_verts:
        raise MalformedFile("GLB contains no triangle geometry", 12)
    return (
        np.concatenate(all_verts, axis=0),
        np.concatenate(all_faces, axis=0),
    )
