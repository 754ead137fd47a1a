"""Seeded synthesis of concave facial scars and of the synthetic head dataset.

A scar is a radially symmetric inward dent: pick a focal vertex, gather its
neighborhood out to a hop radius, and push vertices in along their normals
with a quadratic falloff so the focal point is deepest. Heads are deformed
icospheres, so everything here runs at desk scale and is reproducible from
a single integer seed.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, MeshError
from .mesh import Mesh, bfs_hops, is_watertight, mean_edge_length, vertex_adjacency, vertex_normals
from .meshio import save_mesh_path

__all__ = [
    "DatasetManifest",
    "ManifestEntry",
    "ScarMask",
    "ScarRanges",
    "ScarSpec",
    "generate_scar",
    "icosahedron",
    "icosphere",
    "load_manifest",
    "make_dataset",
    "sample_scar_spec",
    "synth_head",
]

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ScarSpec:
    """Parameters of one synthetic scar; identical specs give identical scars."""

    center: int
    radius: int  # hop count
    max_depth: float  # model units
    profile: str = "quadratic"
    seed: int = 0

    def validate(self):
        if self.radius <= 0:
            raise DataError(f"scar radius must be > 0, got {self.radius}")
        if self.max_depth <= 0:
            raise DataError(f"scar max_depth must be > 0, got {self.max_depth}")
        if self.profile != "quadratic":
            raise DataError(f"unknown scar profile {self.profile!r}")

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "radius": self.radius,
            "max_depth": self.max_depth,
            "profile": self.profile,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScarSpec":
        return cls(int(d["center"]), int(d["radius"]), float(d["max_depth"]),
                   str(d["profile"]), int(d["seed"]))


@dataclass(frozen=True)
class ScarMask:
    """Ground truth of which vertices moved and by how much."""

    affected: np.ndarray  # sorted vertex indices with displacement > 0
    displacement: np.ndarray  # (n,) magnitudes, zero off the affected set


@dataclass(frozen=True)
class ScarRanges:
    """Sampling ranges: hop radius (inclusive) and depth in mean-edge-length units."""

    radius: tuple[int, int] = (3, 8)
    depth: tuple[float, float] = (0.5, 2.0)

    def validate(self):
        if self.radius[0] > self.radius[1] or self.radius[0] < 1:
            raise DataError(f"bad radius range {self.radius}")
        if self.depth[0] > self.depth[1] or self.depth[0] <= 0:
            raise DataError(f"bad depth range {self.depth}")


def generate_scar(mesh: Mesh, spec: ScarSpec) -> tuple[Mesh, ScarMask]:
    """Dent the mesh around spec.center; returns the wounded mesh and its mask.

    Displacement is max_depth * (1 - (r/R)^2) inward along the vertex normal,
    with r the hop distance, so it peaks at the center and reaches zero at the
    rim. Vertices outside the dent keep bit-identical coordinates.
    """
    spec.validate()
    if not 0 <= spec.center < mesh.n_vertices:
        raise DataError(f"scar center {spec.center} outside mesh of {mesh.n_vertices} vertices")
    if not is_watertight(mesh):
        raise MeshError("generate_scar requires a watertight mesh")
    hops = bfs_hops(vertex_adjacency(mesh), spec.center)
    reachable = hops[hops < np.iinfo(np.int64).max]
    radius = spec.radius
    eccentricity = int(reachable.max())
    if radius > eccentricity:
        warnings.warn(
            f"scar radius {radius} exceeds component eccentricity {eccentricity}; clamping",
            stacklevel=2,
        )
        radius = eccentricity
    r = hops.astype(np.float64)
    falloff = 1.0 - (r / radius) ** 2
    displacement = np.where(hops < radius, spec.max_depth * falloff, 0.0)
    affected = np.flatnonzero(displacement > 0)
    normals = vertex_normals(mesh)
    positions = np.array(mesh.positions)
    positions[affected] -= displacement[affected, None] * normals[affected]
    wounded = Mesh(positions, mesh.faces, dict(mesh.attributes))
    return wounded, ScarMask(affected, displacement)


def sample_scar_spec(
    rng: np.random.Generator,
    n_vertices: int,
    mean_edge: float,
    ranges: ScarRanges = ScarRanges(),
) -> ScarSpec:
    """Draw a uniform ScarSpec; advances rng by exactly four draws."""
    ranges.validate()
    center = int(rng.integers(0, n_vertices))
    radius = int(rng.integers(ranges.radius[0], ranges.radius[1] + 1))
    depth = float(rng.uniform(ranges.depth[0], ranges.depth[1])) * mean_edge
    seed = int(rng.integers(0, 2**63))
    return ScarSpec(center=center, radius=radius, max_depth=depth, seed=seed)


# --- synthetic heads ----------------------------------------------------


def icosahedron() -> Mesh:
    """Unit icosahedron (12 vertices, 20 faces), outward winding."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return Mesh(verts, faces)


def icosphere(subdivisions: int) -> Mesh:
    """Icosahedron subdivided `subdivisions` times and reprojected to the unit sphere.

    Vertex count is 10 * 4**s + 2.
    """
    mesh = icosahedron()
    verts = [list(p) for p in mesh.positions]
    faces = mesh.faces
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                p = (np.array(verts[a]) + np.array(verts[b])) / 2.0
                p /= np.linalg.norm(p)
                midpoint[key] = len(verts)
                verts.append(list(p))
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new_faces, dtype=np.int64)
    return Mesh(np.array(verts), faces)


def synth_head(seed: int, subdivisions: int = 2) -> Mesh:
    """Watertight genus-0 stand-in head: icosphere with seeded smooth bumps.

    All heads with the same subdivision count share topology; the seed only
    moves vertices (low-frequency radial lobes plus a mild axis scaling).
    """
    if subdivisions < 1:
        raise DataError("subdivisions must be >= 1")
    base = icosphere(subdivisions)
    rng = np.random.default_rng(seed)
    axes = rng.uniform(0.85, 1.15, size=3)
    n_lobes = 6
    dirs = rng.normal(size=(n_lobes, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    amps = rng.uniform(-0.12, 0.12, size=n_lobes)
    widths = rng.uniform(0.15, 0.5, size=n_lobes)
    d = base.positions  # already unit length
    factor = 1.0 + sum(
        amps[i] * np.exp((d @ dirs[i] - 1.0) / widths[i]) for i in range(n_lobes)
    )
    return Mesh(d * factor[:, None] * axes[None, :], base.faces)


# --- dataset ------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    head: int
    scar: int
    gt_file: str
    wounded_file: str
    split: str
    spec: ScarSpec

    def to_dict(self) -> dict:
        return {
            "head": self.head,
            "scar": self.scar,
            "gt": self.gt_file,
            "wounded": self.wounded_file,
            "split": self.split,
            "spec": self.spec.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        return cls(int(d["head"]), int(d["scar"]), d["gt"], d["wounded"], d["split"],
                   ScarSpec.from_dict(d["spec"]))


@dataclass(frozen=True)
class DatasetManifest:
    seed: int
    count: int
    scars_per_mesh: int
    subdivisions: int
    split_ratios: tuple[float, float, float]
    ranges: ScarRanges
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def split_entries(self, split: str) -> list[ManifestEntry]:
        if split not in SPLITS:
            raise DataError(f"unknown split {split!r}; expected one of {SPLITS}")
        return [e for e in self.entries if e.split == split]

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "count": self.count,
            "scars_per_mesh": self.scars_per_mesh,
            "subdivisions": self.subdivisions,
            "split_ratios": list(self.split_ratios),
            "ranges": {"radius": list(self.ranges.radius), "depth": list(self.ranges.depth)},
            "entries": [e.to_dict() for e in self.entries],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        ranges = ScarRanges(tuple(doc["ranges"]["radius"]), tuple(doc["ranges"]["depth"]))
        return cls(
            seed=int(doc["seed"]),
            count=int(doc["count"]),
            scars_per_mesh=int(doc["scars_per_mesh"]),
            subdivisions=int(doc["subdivisions"]),
            split_ratios=tuple(doc["split_ratios"]),
            ranges=ranges,
            entries=tuple(ManifestEntry.from_dict(e) for e in doc["entries"]),
        )


def load_manifest(path) -> DatasetManifest:
    return DatasetManifest.from_json(Path(path).read_text())


def _split_assignment(count: int, ratios: tuple[float, float, float], seed: int) -> list[str]:
    """Seeded shuffle of head ids, then contiguous train/val/test slices."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"split ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise DataError(f"split ratios must be non-negative, got {ratios}")
    order = np.random.default_rng([seed, 1]).permutation(count)
    n_train = int(np.floor(ratios[0] * count))
    n_val = int(np.floor(ratios[1] * count))
    split = [""] * count
    for pos, head in enumerate(order):
        if pos < n_train:
            split[head] = "train"
        elif pos < n_train + n_val:
            split[head] = "val"
        else:
            split[head] = "test"
    return split


def make_dataset(
    out_dir,
    count: int,
    scars_per_mesh: int = 10,
    seed: int = 0,
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    subdivisions: int = 2,
    ranges: ScarRanges = ScarRanges(),
) -> DatasetManifest:
    """Write `count` ground-truth heads, their wounded variants, and manifest.json.

    Every head draws from its own rng stream derived from (seed, head index),
    so results do not depend on generation order. All variants of one head
    land in the same split, which keeps ground truths from leaking across
    splits.
    """
    if count < 1 or scars_per_mesh < 1:
        raise DataError("count and scars_per_mesh must be >= 1")
    ranges.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    splits = _split_assignment(count, split_ratios, seed)
    entries = []
    for head in range(count):
        rng = np.random.default_rng([seed, 0, head])
        gt = synth_head(int(rng.integers(0, 2**63)), subdivisions)
        gt_file = f"{head:04d}_gt.ply"
        save_mesh_path(gt, out / gt_file)
        edge = mean_edge_length(gt)
        for scar in range(scars_per_mesh):
            spec = sample_scar_spec(rng, gt.n_vertices, edge, ranges)
            wounded, _ = generate_scar(gt, spec)
            wounded_file = f"{head:04d}_{scar:02d}.ply"
            save_mesh_path(wounded, out / wounded_file)
            entries.append(ManifestEntry(head, scar, gt_file, wounded_file, splits[head], spec))
    manifest = DatasetManifest(
        seed=seed,
        count=count,
        scars_per_mesh=scars_per_mesh,
        subdivisions=subdivisions,
        split_ratios=tuple(split_ratios),
        ranges=ranges,
        entries=tuple(entries),
    )
    (out / "manifest.json").write_text(manifest.to_json())
    return manifest
