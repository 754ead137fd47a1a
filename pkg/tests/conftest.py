import numpy as np
import pytest

from woundfill import Mesh, icosahedron, icosphere
from woundfill.hierarchy import ConvTopology


@pytest.fixture
def ico():
    return icosahedron()


@pytest.fixture
def sphere2():
    return icosphere(2)


@pytest.fixture
def cube():
    """Unit cube triangulated into 12 faces with outward winding."""
    return make_cube()


def make_cube() -> Mesh:
    pos = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=float,
    )
    quads = [
        (0, 3, 2, 1),  # bottom (z=0), outward -z
        (4, 5, 6, 7),  # top (z=1), outward +z
        (0, 1, 5, 4),  # y=0
        (1, 2, 6, 5),  # x=1
        (2, 3, 7, 6),  # y=1
        (3, 0, 4, 7),  # x=0
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append([a, b, c])
        faces.append([a, c, d])
    return Mesh(pos, np.array(faces))


def random_topology(rng: np.random.Generator, n_in: int, n_out: int,
                    max_degree: int = 4) -> ConvTopology:
    """Random covering topology with ascending neighbor lists."""
    neigh = []
    for _ in range(n_out):
        k = int(rng.integers(1, max_degree + 1))
        neigh.append(np.sort(rng.choice(n_in, size=min(k, n_in), replace=False)))
    covered = np.unique(np.concatenate(neigh))
    for j, v in enumerate(np.setdiff1d(np.arange(n_in), covered)):
        neigh[j % n_out] = np.unique(np.append(neigh[j % n_out], v))
    indptr = np.zeros(n_out + 1, dtype=np.int64)
    np.cumsum([len(x) for x in neigh], out=indptr[1:])
    return ConvTopology(n_in, n_out, indptr, np.concatenate(neigh), basis_count=3)


def finite_difference(fn, arrays, grads, h=1e-5, rng=None, samples=None):
    """Worst relative error between analytic grads and central differences.

    Perturbs every entry unless `samples` caps the count per array (chosen
    with `rng`). Arrays are modified in place and restored.
    """
    worst = 0.0
    for arr, g in zip(arrays, grads):
        flat = arr.ravel()
        gf = np.asarray(g).ravel()
        idx = range(flat.size)
        if samples is not None and flat.size > samples:
            idx = rng.choice(flat.size, size=samples, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = fn()
            flat[i] = orig - h
            fm = fn()
            flat[i] = orig
            fd = (fp - fm) / (2 * h)
            rel = abs(fd - gf[i]) / max(abs(fd), abs(gf[i]), 1e-6)
            worst = max(worst, rel)
    return worst
