"""Multi-resolution vertex hierarchy and per-layer neighborhood topology.

Coarser levels are chosen by a deterministic greedy covering of the level
graph: repeatedly select the lowest-index uncovered vertex and mark its
k-ring covered, growing k until the selection fits the target size, then
pad with the lowest-index unselected vertices. Every fine vertex is then
assigned to its nearest selected vertex (hop distance, lowest coarse index
on ties), which yields the pooling partition; convolution neighborhoods are
those cells dilated by one ring so they overlap but still cover the level.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import MeshError
from .mesh import Mesh, unique_edges

__all__ = ["ConvTopology", "MeshHierarchy", "build_hierarchy", "transpose_topology"]

M_CLAMP_DEFAULT = (4, 17)


@dataclass(frozen=True)
class ConvTopology:
    """Per-output-vertex neighborhoods in CSR form.

    Output vertex i draws from input vertices indices[indptr[i]:indptr[i+1]],
    stored ascending. basis_count is the layer's kernel-basis size M.
    """

    n_in: int
    n_out: int
    indptr: np.ndarray  # (n_out + 1,) int64
    indices: np.ndarray  # (edge_count,) int64
    basis_count: int

    def __post_init__(self):
        indptr = np.array(self.indptr, dtype=np.int64)
        indices = np.array(self.indices, dtype=np.int64)
        if indptr.shape != (self.n_out + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise MeshError("malformed CSR indptr")
        sizes = np.diff(indptr)
        if (sizes <= 0).any():
            raise MeshError(f"empty neighborhood for output vertex {int(np.argmin(sizes))}")
        if len(indices) and (indices.min() < 0 or indices.max() >= self.n_in):
            raise MeshError("neighbor index out of range")
        covered = np.zeros(self.n_in, dtype=bool)
        covered[indices] = True
        if not covered.all():
            raise MeshError(
                f"neighborhoods do not cover input vertex {int(np.flatnonzero(~covered)[0])}"
            )
        if self.basis_count < 1:
            raise MeshError("basis_count must be >= 1")
        for a in (indptr, indices):
            a.flags.writeable = False
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @property
    def edge_count(self) -> int:
        return len(self.indices)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def rows(self) -> np.ndarray:
        """Output-vertex index of every CSR edge."""
        return np.repeat(np.arange(self.n_out), self.sizes)


def _csr_from_lists(n_in: int, neighborhoods: list[np.ndarray], m_clamp) -> ConvTopology:
    indptr = np.zeros(len(neighborhoods) + 1, dtype=np.int64)
    np.cumsum([len(nb) for nb in neighborhoods], out=indptr[1:])
    indices = (
        np.concatenate(neighborhoods) if neighborhoods else np.zeros(0, dtype=np.int64)
    )
    mean_size = indptr[-1] / max(len(neighborhoods), 1)
    m = int(np.floor(mean_size + 0.5))
    m = min(max(m, m_clamp[0]), m_clamp[1])
    return ConvTopology(n_in, len(neighborhoods), indptr, indices, m)


def transpose_topology(topology: ConvTopology) -> ConvTopology:
    """Exact edge transpose: j in N'(i) iff i in N(j). basis_count carries over."""
    rows = topology.rows()
    cols = topology.indices
    order = np.lexsort((rows, cols))
    new_rows = cols[order]
    new_indices = rows[order]
    indptr = np.zeros(topology.n_in + 1, dtype=np.int64)
    np.cumsum(np.bincount(new_rows, minlength=topology.n_in), out=indptr[1:])
    return ConvTopology(
        n_in=topology.n_out,
        n_out=topology.n_in,
        indptr=indptr,
        indices=new_indices,
        basis_count=topology.basis_count,
    )


@dataclass(frozen=True)
class MeshHierarchy:
    """Nested vertex levels plus the down/up topologies between them.

    levels[l] holds mesh-level vertex ids; level 0 is the full mesh. The
    transition arrays all have length len(levels) - 1 and are indexed by the
    finer level.
    """

    levels: tuple[np.ndarray, ...]
    parents: tuple[np.ndarray, ...]  # per fine vertex: owning coarse (local) index
    conv_down: tuple[ConvTopology, ...]
    pool_down: tuple[ConvTopology, ...]
    conv_up: tuple[ConvTopology, ...]
    pool_up: tuple[ConvTopology, ...]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level_sizes(self) -> list[int]:
        return [len(lv) for lv in self.levels]


def _greedy_cover(adj: list[np.ndarray], target: int) -> np.ndarray:
    """Lowest-index greedy k-ring cover, k grown until the selection fits target,
    padded with the lowest-index unselected vertices to exactly target."""
    n = len(adj)
    target = min(target, n)
    selection: list[int] = []
    for k in range(1, n + 2):
        covered = np.zeros(n, dtype=bool)
        selection = []
        for v in range(n):
            if covered[v]:
                continue
            selection.append(v)
            ring = {v}
            frontier = [v]
            for _ in range(k):
                nxt = []
                for u in frontier:
                    for w in adj[u]:
                        if w not in ring:
                            ring.add(int(w))
                            nxt.append(int(w))
                frontier = nxt
            covered[list(ring)] = True
        if len(selection) <= target:
            break
    chosen = np.zeros(n, dtype=bool)
    chosen[selection] = True
    for v in range(n):
        if len(selection) >= target:
            break
        if not chosen[v]:
            chosen[v] = True
            selection.append(v)
    return np.array(sorted(selection), dtype=np.int64)


def _nearest_assignment(adj: list[np.ndarray], sources: np.ndarray) -> np.ndarray:
    """Owner of every vertex: nearest source by hop count, lowest source rank on ties.

    Level-synchronous multi-source BFS; within each distance ring a vertex
    takes the minimum owner over all claiming parents, which provably equals
    the lowest-index equidistant source.
    """
    n = len(adj)
    owner = np.full(n, -1, dtype=np.int64)
    owner[sources] = np.arange(len(sources))
    frontier = list(sources)
    while frontier:
        claims: dict[int, int] = {}
        for u in frontier:
            for w in adj[u]:
                if owner[w] < 0:
                    prev = claims.get(w)
                    if prev is None or owner[u] < prev:
                        claims[w] = int(owner[u])
        for w, o in claims.items():
            owner[w] = o
        frontier = sorted(claims)
    if (owner < 0).any():
        raise MeshError("hierarchy level graph is disconnected")
    return owner


def _quotient_adjacency(adj: list[np.ndarray], owner: np.ndarray, n_coarse: int) -> list[np.ndarray]:
    """Coarse graph: cells are adjacent when any of their fine vertices are."""
    neigh: list[set[int]] = [set() for _ in range(n_coarse)]
    for u, nbrs in enumerate(adj):
        ou = int(owner[u])
        for w in nbrs:
            ow = int(owner[w])
            if ou != ow:
                neigh[ou].add(ow)
                neigh[ow].add(ou)
    return [np.array(sorted(s), dtype=np.int64) for s in neigh]


def build_hierarchy(
    mesh: Mesh,
    ratios: tuple[float, ...],
    m_clamp: tuple[int, int] = M_CLAMP_DEFAULT,
) -> MeshHierarchy:
    """Deterministic hierarchy for a connected watertight mesh.

    ratios are level sizes as fractions of the full vertex count, starting
    at 1.0 and strictly decreasing; level l has floor(n * ratios[l]) vertices.
    """
    ratios = tuple(float(r) for r in ratios)
    if not ratios or ratios[0] != 1.0:
        raise MeshError(f"ratios must start at 1.0, got {ratios}")
    for a, b in zip(ratios, ratios[1:]):
        if not (0.0 < b < a <= 1.0):
            raise MeshError(f"ratios must be strictly decreasing in (0, 1], got {ratios}")
    n = mesh.n_vertices
    edges, counts = unique_edges(mesh)
    if (counts != 2).any():
        raise MeshError("build_hierarchy requires a watertight mesh")

    buckets: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        buckets[a].append(int(b))
        buckets[b].append(int(a))
    adj = [np.array(sorted(bs), dtype=np.int64) for bs in buckets]
    if not _connected(adj):
        raise MeshError("build_hierarchy requires a connected mesh")

    levels = [np.arange(n, dtype=np.int64)]
    parents, conv_down, pool_down = [], [], []
    level_adj = adj
    for ratio in ratios[1:]:
        target = int(np.floor(n * ratio))
        if target < 4:
            raise MeshError(f"ratio {ratio} yields {target} vertices; need at least 4")
        n_fine = len(levels[-1])
        selected = _greedy_cover(level_adj, target)
        owner = _nearest_assignment(level_adj, selected)
        cells = [np.flatnonzero(owner == i) for i in range(len(selected))]
        dilated = []
        for cell in cells:
            ring = set(cell.tolist())
            for u in cell:
                ring.update(int(w) for w in level_adj[u])
            dilated.append(np.array(sorted(ring), dtype=np.int64))
        pool_down.append(_csr_from_lists(n_fine, cells, m_clamp))
        conv_down.append(_csr_from_lists(n_fine, dilated, m_clamp))
        parents.append(owner)
        levels.append(levels[-1][selected])
        level_adj = _quotient_adjacency(level_adj, owner, len(selected))

    conv_up = [transpose_topology(t) for t in conv_down]
    pool_up = [transpose_topology(t) for t in pool_down]
    return MeshHierarchy(
        levels=tuple(levels),
        parents=tuple(parents),
        conv_down=tuple(conv_down),
        pool_down=tuple(pool_down),
        conv_up=tuple(conv_up),
        pool_up=tuple(pool_up),
    )


def _connected(adj: list[np.ndarray]) -> bool:
    n = len(adj)
    if n == 0:
        return False
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if not seen[w]:
                seen[w] = True
                queue.append(w)
    return bool(seen.all())
