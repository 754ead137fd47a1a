"""Indexed triangle meshes and the topology queries the rest of the package builds on.

A :class:`Mesh` is immutable: positions, faces and attribute channels are
frozen numpy arrays, so meshes can be shared freely across workers. Every
operation here is a pure function returning new meshes or plain arrays.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError, NonManifoldError

__all__ = [
    "Mesh",
    "boundary_loops",
    "euler_characteristic",
    "fill_holes",
    "is_watertight",
    "k_ring",
    "keep_largest_component",
    "mean_edge_length",
    "signed_volume",
    "unique_edges",
    "vertex_adjacency",
    "vertex_normals",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Mesh:
    """Indexed triangle surface with optional named per-vertex scalar channels.

    positions: (n, 3) float64 coordinates in model units.
    faces: (m, 3) int64 vertex-index triples; all indices valid, no face
        repeats a vertex.
    attributes: mapping of channel name to (n,) float64 values.
    """

    positions: np.ndarray
    faces: np.ndarray
    attributes: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        fac = np.asarray(self.faces, dtype=np.int64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise MeshError(f"positions must be (n, 3), got {pos.shape}")
        if fac.size == 0:
            fac = fac.reshape(0, 3)
        if fac.ndim != 2 or fac.shape[1] != 3:
            raise MeshError(f"faces must be (m, 3), got {fac.shape}")
        if not np.all(np.isfinite(pos)):
            raise MeshError("positions contain non-finite values")
        if fac.size:
            out_of_range = (fac < 0) | (fac >= len(pos))
            if out_of_range.any():
                bad = int(np.flatnonzero(out_of_range.any(axis=1))[0])
                raise MeshError(
                    f"face index out of range: face {bad} references a vertex "
                    f"outside [0, {len(pos)})"
                )
            degen = (
                (fac[:, 0] == fac[:, 1])
                | (fac[:, 1] == fac[:, 2])
                | (fac[:, 2] == fac[:, 0])
            )
            if degen.any():
                raise MeshError(f"degenerate face {int(np.flatnonzero(degen)[0])}: repeated vertex index")
        attrs = {}
        for name, vals in self.attributes.items():
            vals = np.asarray(vals, dtype=np.float64)
            if vals.shape != (len(pos),):
                raise MeshError(
                    f"attribute {name!r} must have shape ({len(pos)},), got {vals.shape}"
                )
            attrs[name] = _frozen(vals)
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "faces", _frozen(fac))
        object.__setattr__(self, "attributes", attrs)

    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def with_positions(self, positions: np.ndarray) -> "Mesh":
        """Same topology and attributes, new coordinates."""
        return Mesh(positions, self.faces, dict(self.attributes))

    def with_attribute(self, name: str, values: np.ndarray) -> "Mesh":
        attrs = dict(self.attributes)
        attrs[name] = values
        return Mesh(self.positions, self.faces, attrs)


def unique_edges(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Undirected edges and their face-incidence counts.

    Returns (edges, counts) where edges is (e, 2) with edges[i, 0] < edges[i, 1],
    sorted lexicographically.
    """
    f = mesh.faces
    raw = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    raw = np.sort(raw, axis=1)
    edges, counts = np.unique(raw, axis=0, return_counts=True)
    return edges, counts


def vertex_adjacency(mesh: Mesh) -> list[np.ndarray]:
    """Per-vertex sorted neighbor lists over the edge graph."""
    edges, _ = unique_edges(mesh)
    return adjacency_from_edges(mesh.n_vertices, edges)


def adjacency_from_edges(n: int, edges: np.ndarray) -> list[np.ndarray]:
    """Sorted neighbor lists for an undirected edge array."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(int(b))
        adj[b].append(int(a))
    return [np.array(sorted(nb), dtype=np.int64) for nb in adj]


def is_watertight(mesh: Mesh) -> bool:
    """True iff every edge is shared by exactly two faces."""
    if mesh.n_faces == 0:
        return False
    _, counts = unique_edges(mesh)
    return bool(np.all(counts == 2))


def euler_characteristic(mesh: Mesh) -> int:
    """V - E + F over the whole mesh."""
    edges, _ = unique_edges(mesh)
    return mesh.n_vertices - len(edges) + mesh.n_faces


def _check_manifold(mesh: Mesh) -> None:
    edges, counts = unique_edges(mesh)
    bad = np.flatnonzero(counts > 2)
    if bad.size:
        e = edges[bad[0]]
        raise NonManifoldError(e, int(counts[bad[0]]))


def boundary_loops(mesh: Mesh) -> list[np.ndarray]:
    """Closed vertex cycles along hole rims, in face-winding order.

    A boundary edge belongs to exactly one face; the loops follow the winding
    of that face. Empty for watertight input. Raises NonManifoldError for
    edges with more than two incident faces and MeshError when the boundary
    pinches (a vertex shared by two rims), since such loops are not simple.
    """
    _check_manifold(mesh)
    f = mesh.faces
    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    boundary = counts[inverse] == 1
    nxt: dict[int, int] = {}
    for a, b in directed[boundary]:
        a, b = int(a), int(b)
        if a in nxt:
            raise MeshError(f"non-simple boundary: vertex {a} lies on more than one rim edge pair")
        nxt[a] = b
    loops = []
    seen: set[int] = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        v = nxt[start]
        while v != start:
            if v in seen or v not in nxt:
                raise MeshError(f"boundary does not close into a simple loop near vertex {v}")
            loop.append(v)
            seen.add(v)
            v = nxt[v]
        loops.append(np.array(loop, dtype=np.int64))
    return loops


def fill_holes(mesh: Mesh) -> Mesh:
    """Cap every hole with a centroid fan.

    Each rim loop of length L gains one vertex at the arithmetic mean of the
    loop and L triangles wound opposite to the adjacent faces, so the result
    has no boundary edges. Attribute channels extend with the loop mean.
    """
    loops = boundary_loops(mesh)
    if not loops:
        return mesh
    positions = [mesh.positions]
    attrs = {name: [vals] for name, vals in mesh.attributes.items()}
    new_faces = [mesh.faces]
    next_index = mesh.n_vertices
    for loop in loops:
        centroid = mesh.positions[loop].mean(axis=0)
        positions.append(centroid[None, :])
        for name, chunks in attrs.items():
            chunks.append(np.array([mesh.attributes[name][loop].mean()]))
        ln = len(loop)
        fan = np.empty((ln, 3), dtype=np.int64)
        # rim edge (a, b) follows the adjacent face winding; the cap triangle
        # must traverse it as (b, a) to keep orientation consistent
        fan[:, 0] = np.roll(loop, -1)
        fan[:, 1] = loop
        fan[:, 2] = next_index
        new_faces.append(fan)
        next_index += 1
    return Mesh(
        np.concatenate(positions),
        np.concatenate(new_faces),
        {name: np.concatenate(chunks) for name, chunks in attrs.items()},
    )


def keep_largest_component(mesh: Mesh) -> tuple[Mesh, np.ndarray]:
    """Drop everything but the connected component with the most vertices.

    Ties go to the component containing the smallest vertex index. Returns
    the re-indexed mesh and an array mapping new vertex index -> old index.
    """
    if mesh.n_vertices == 0:
        raise MeshError("empty mesh")
    adj = vertex_adjacency(mesh)
    label = np.full(mesh.n_vertices, -1, dtype=np.int64)
    sizes = []
    for v in range(mesh.n_vertices):
        if label[v] >= 0:
            continue
        comp = len(sizes)
        queue = deque([v])
        label[v] = comp
        count = 0
        while queue:
            u = queue.popleft()
            count += 1
            for w in adj[u]:
                if label[w] < 0:
                    label[w] = comp
                    queue.append(w)
        sizes.append(count)
    best = int(np.argmax(sizes))  # argmax takes the first maximum: smallest-index tie-break
    keep = np.flatnonzero(label == best)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    face_keep = np.all(label[mesh.faces] == best, axis=1)
    out = Mesh(
        mesh.positions[keep],
        remap[mesh.faces[face_keep]],
        {name: vals[keep] for name, vals in mesh.attributes.items()},
    )
    return out, keep


def k_ring(mesh: Mesh, center: int, k: int) -> np.ndarray:
    """Sorted vertex indices with edge-graph distance <= k from center."""
    if not 0 <= center < mesh.n_vertices:
        raise MeshError(f"center {center} out of range [0, {mesh.n_vertices})")
    if k < 0:
        raise MeshError("k must be >= 0")
    dist = bfs_hops(vertex_adjacency(mesh), center)
    return np.flatnonzero(dist <= k)


def bfs_hops(adj: list[np.ndarray], source: int) -> np.ndarray:
    """Hop distances from source; unreachable vertices get a large sentinel."""
    n = len(adj)
    dist = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if dist[w] > dist[u] + 1:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def vertex_normals(mesh: Mesh) -> np.ndarray:
    """Area-weighted vertex normals, unit length where defined."""
    p = mesh.positions
    f = mesh.faces
    fn = np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]])
    vn = np.zeros_like(p)
    for c in range(3):
        np.add.at(vn, f[:, c], fn)
    norms = np.linalg.norm(vn, axis=1)
    ok = norms > 0
    vn[ok] /= norms[ok, None]
    return vn


def mean_edge_length(mesh: Mesh) -> float:
    edges, _ = unique_edges(mesh)
    if len(edges) == 0:
        raise MeshError("mesh has no edges")
    d = mesh.positions[edges[:, 0]] - mesh.positions[edges[:, 1]]
    return float(np.linalg.norm(d, axis=1).mean())


def signed_volume(mesh: Mesh) -> float:
    """Signed enclosed volume by the divergence theorem; meaningful for closed meshes."""
    p = mesh.positions
    f = mesh.faces
    a, b, c = p[f[:, 0]], p[f[:, 1]], p[f[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)
