"""Mesh file formats: OBJ and PLY in, OBJ/PLY/binary STL out.

Output is byte-deterministic for a given mesh. PLY is binary little-endian
with float32 positions; attribute channels are stored as float32 scalars.
STL is the 80-byte-header binary layout and carries geometry only.
"""

from __future__ import annotations

import struct
import warnings

import numpy as np

from .errors import MeshError, MeshFormatError
from .mesh import Mesh

__all__ = ["load_mesh", "save_mesh", "load_mesh_path", "save_mesh_path"]

_FORMATS_LOAD = ("obj", "ply")
_FORMATS_SAVE = ("obj", "ply", "stl")

_STL_HEADER = b"binary STL written by woundfill".ljust(80, b"\x00")


def load_mesh(data: bytes, fmt: str) -> Mesh:
    """Parse mesh bytes in the declared format ("obj" or "ply")."""
    fmt = fmt.lower().lstrip(".")
    if fmt == "obj":
        return _load_obj(data)
    if fmt == "ply":
        return _load_ply(data)
    raise MeshFormatError(f"unsupported load format {fmt!r}; expected one of {_FORMATS_LOAD}")


def save_mesh(mesh: Mesh, fmt: str) -> bytes:
    """Serialize a mesh to bytes ("obj", "ply" or "stl")."""
    fmt = fmt.lower().lstrip(".")
    if fmt == "obj":
        return _save_obj(mesh)
    if fmt == "ply":
        return _save_ply(mesh)
    if fmt == "stl":
        return _save_stl(mesh)
    raise MeshFormatError(f"unsupported save format {fmt!r}; expected one of {_FORMATS_SAVE}")


def load_mesh_path(path) -> Mesh:
    path = str(path)
    with open(path, "rb") as fh:
        return load_mesh(fh.read(), path.rsplit(".", 1)[-1])


def save_mesh_path(mesh: Mesh, path) -> None:
    path = str(path)
    with open(path, "wb") as fh:
        fh.write(save_mesh(mesh, path.rsplit(".", 1)[-1]))


# --- OBJ ---------------------------------------------------------------


def _load_obj(data: bytes) -> Mesh:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MeshFormatError(f"OBJ is not valid UTF-8: {exc}") from None
    positions = []
    faces = []
    ignored: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshFormatError("vertex line needs 3 coordinates", line=lineno)
            try:
                positions.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise MeshFormatError(f"bad vertex coordinate: {exc}", line=lineno) from None
        elif tag == "f":
            if len(parts) != 4:
                raise MeshFormatError(
                    f"face line needs exactly 3 vertices, got {len(parts) - 1}", line=lineno
                )
            idx = []
            for token in parts[1:]:
                head = token.split("/", 1)[0]
                try:
                    i = int(head)
                except ValueError:
                    raise MeshFormatError(f"bad face index {token!r}", line=lineno) from None
                if i < 1:
                    raise MeshFormatError(f"face index {i} must be 1-based positive", line=lineno)
                if i > len(positions):
                    raise MeshFormatError(
                        f"face index {i} out of range: only {len(positions)} vertices so far",
                        line=lineno,
                    )
                idx.append(i - 1)
            faces.append(idx)
        else:
            ignored.add(tag)
    if ignored:
        warnings.warn(f"OBJ: ignored directives {sorted(ignored)}", stacklevel=3)
    if not positions:
        raise MeshFormatError("OBJ contains no vertices")
    return Mesh(np.array(positions), np.array(faces, dtype=np.int64).reshape(-1, 3))


def _save_obj(mesh: Mesh) -> bytes:
    if mesh.attributes:
        warnings.warn("OBJ carries no attribute channels; dropping "
                      f"{sorted(mesh.attributes)}", stacklevel=3)
    lines = []
    for x, y, z in mesh.positions:
        lines.append(f"v {x:.9g} {y:.9g} {z:.9g}")
    for a, b, c in mesh.faces:
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    return ("\n".join(lines) + "\n").encode("utf-8")


# --- PLY ---------------------------------------------------------------

_PLY_SCALARS = {
    "float": ("<f4", np.float32),
    "float32": ("<f4", np.float32),
    "double": ("<f8", np.float64),
    "float64": ("<f8", np.float64),
}
_PLY_LIST_COUNTS = {"uchar": "<u1", "uint8": "<u1"}
_PLY_LIST_ITEMS = {"int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4"}


def _load_ply(data: bytes) -> Mesh:
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise MeshFormatError("not a PLY file (missing 'ply'/'end_header')")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]

    elements: list[tuple[str, int, list]] = []  # (name, count, [properties])
    fmt_seen = False
    for lineno, line in enumerate(header[1:], start=2):
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1] != "binary_little_endian":
                raise MeshFormatError(f"unsupported PLY format {parts[1]!r}", line=lineno)
            fmt_seen = True
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshFormatError("property before any element", line=lineno)
            elements[-1][2].append(parts[1:])
        else:
            raise MeshFormatError(f"unsupported header line {line!r}", line=lineno)
    if not fmt_seen:
        raise MeshFormatError("PLY header missing format line")

    positions = None
    attributes: dict[str, np.ndarray] = {}
    faces = np.zeros((0, 3), dtype=np.int64)
    offset = 0
    for name, count, props in elements:
        if name == "vertex":
            fields = []
            for p in props:
                if len(p) != 2 or p[0] not in _PLY_SCALARS:
                    raise MeshFormatError(f"unsupported vertex property {' '.join(p)!r}")
                fields.append((p[1], _PLY_SCALARS[p[0]][0]))
            dtype = np.dtype(fields)
            raw = np.frombuffer(body, dtype=dtype, count=count, offset=offset)
            offset += dtype.itemsize * count
            names = [f[0] for f in fields]
            if not {"x", "y", "z"} <= set(names):
                raise MeshFormatError("vertex element must provide x, y, z")
            positions = np.column_stack([raw["x"], raw["y"], raw["z"]]).astype(np.float64)
            for n in names:
                if n not in ("x", "y", "z"):
                    attributes[n] = raw[n].astype(np.float64)
        elif name == "face":
            if len(props) != 1 or props[0][0] != "list":
                raise MeshFormatError("face element must be a single list property")
            _, cnt_t, item_t, _pname = props[0]
            if cnt_t not in _PLY_LIST_COUNTS or item_t not in _PLY_LIST_ITEMS:
                raise MeshFormatError(f"unsupported face list types {cnt_t}/{item_t}")
            item = np.dtype(_PLY_LIST_ITEMS[item_t])
            rows = []
            for i in range(count):
                (k,) = struct.unpack_from("<B", body, offset)
                offset += 1
                if k != 3:
                    raise MeshFormatError(f"face {i} has {k} vertices; only triangles supported")
                rows.append(np.frombuffer(body, dtype=item, count=3, offset=offset))
                offset += 3 * item.itemsize
            faces = np.array(rows, dtype=np.int64).reshape(-1, 3)
        else:
            raise MeshFormatError(f"unsupported PLY element {name!r}")
    if positions is None:
        raise MeshFormatError("PLY has no vertex element")
    return Mesh(positions, faces, attributes)


def _save_ply(mesh: Mesh) -> bytes:
    attr_names = sorted(mesh.attributes)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {mesh.n_vertices}"]
    header += ["property float x", "property float y", "property float z"]
    header += [f"property float {name}" for name in attr_names]
    header += [
        f"element face {mesh.n_faces}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    out = bytearray(("\n".join(header) + "\n").encode("ascii"))

    vert = np.empty((mesh.n_vertices, 3 + len(attr_names)), dtype="<f4")
    vert[:, :3] = mesh.positions
    for j, name in enumerate(attr_names):
        vert[:, 3 + j] = mesh.attributes[name]
    out += vert.tobytes()

    face = np.empty(mesh.n_faces, dtype=np.dtype([("n", "<u1"), ("idx", "<i4", (3,))]))
    face["n"] = 3
    face["idx"] = mesh.faces
    out += face.tobytes()
    return bytes(out)


# --- STL ---------------------------------------------------------------


def _save_stl(mesh: Mesh) -> bytes:
    if mesh.attributes:
        raise MeshError(
            f"STL carries no attributes; mesh has {sorted(mesh.attributes)}"
        )
    p = mesh.positions
    f = mesh.faces
    normals = np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]])
    lens = np.linalg.norm(normals, axis=1)
    nz = lens > 0
    normals[nz] /= lens[nz, None]
    normals[~nz] = 0.0

    record = np.zeros(mesh.n_faces, dtype=np.dtype([("n", "<f4", (3,)),
                                                    ("v", "<f4", (3, 3)),
                                                    ("attr", "<u2")]))
    record["n"] = normals
    record["v"] = p[f]
    return _STL_HEADER + struct.pack("<I", mesh.n_faces) + record.tobytes()
