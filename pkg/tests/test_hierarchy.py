import numpy as np
import pytest

from woundfill import Mesh, build_hierarchy, icosphere, synth_head, transpose_topology
from woundfill.errors import MeshError
from woundfill.hierarchy import ConvTopology


def test_single_level_identity(sphere2):
    h = build_hierarchy(sphere2, (1.0,))
    assert h.n_levels == 1
    assert h.level_sizes() == [162]
    assert h.conv_down == ()


def test_level_sizes_from_ratios(sphere2):
    h = build_hierarchy(sphere2, (1.0, 0.25))
    assert h.level_sizes() == [162, 40]


def test_three_levels(sphere2):
    h = build_hierarchy(sphere2, (1.0, 0.25, 0.05))
    assert h.level_sizes() == [162, 40, 8]
    assert len(h.conv_down) == 2
    assert len(h.parents) == 2


def test_pool_topology_partitions_fine_level(sphere2):
    h = build_hierarchy(sphere2, (1.0, 0.25))
    pool = h.pool_down[0]
    seen = np.concatenate([pool.neighbors(i) for i in range(pool.n_out)])
    assert len(seen) == 162  # each fine vertex in exactly one cell
    assert set(seen.tolist()) == set(range(162))
    assert np.array_equal(np.sort(seen), np.unique(seen))


def test_conv_topology_covers_and_overlaps(sphere2):
    h = build_hierarchy(sphere2, (1.0, 0.25))
    conv = h.conv_down[0]
    seen = np.concatenate([conv.neighbors(i) for i in range(conv.n_out)])
    assert set(seen.tolist()) == set(range(162))
    assert len(seen) > 162  # one-ring dilation makes neighborhoods overlap


def test_parents_agree_with_pool_cells(sphere2):
    h = build_hierarchy(sphere2, (1.0, 0.25))
    pool = h.pool_down[0]
    parents = h.parents[0]
    for i in range(pool.n_out):
        assert np.array_equal(pool.neighbors(i), np.flatnonzero(parents == i))


def test_selected_vertices_own_their_cell(sphere2):
    h = build_hierarchy(sphere2, (1.0, 0.25))
    fine_ids = h.levels[0]
    coarse_ids = h.levels[1]
    parents = h.parents[0]
    for rank, vid in enumerate(coarse_ids):
        local = int(np.flatnonzero(fine_ids == vid)[0])
        assert parents[local] == rank


def test_m_is_mean_neighborhood_size_clamped(sphere2):
    h = build_hierarchy(sphere2, (1.0, 0.25))
    conv = h.conv_down[0]
    expected = int(np.floor(conv.edge_count / conv.n_out + 0.5))
    assert conv.basis_count == min(max(expected, 4), 17)
    pool = h.pool_down[0]
    assert pool.basis_count >= 4  # 162/40 rounds to 4 after the clamp


def test_hierarchy_deterministic(sphere2):
    a = build_hierarchy(sphere2, (1.0, 0.25, 0.08))
    b = build_hierarchy(sphere2, (1.0, 0.25, 0.08))
    for ta, tb in zip(a.conv_down + a.pool_down, b.conv_down + b.pool_down):
        assert np.array_equal(ta.indptr, tb.indptr)
        assert np.array_equal(ta.indices, tb.indices)
        assert ta.basis_count == tb.basis_count
    for la, lb in zip(a.levels, b.levels):
        assert np.array_equal(la, lb)


def test_transpose_is_involution(sphere2):
    h = build_hierarchy(sphere2, (1.0, 0.25))
    for t in (h.conv_down[0], h.pool_down[0]):
        tt = transpose_topology(transpose_topology(t))
        assert np.array_equal(t.indptr, tt.indptr)
        assert np.array_equal(t.indices, tt.indices)
        assert t.basis_count == tt.basis_count


def test_transpose_identity_topology():
    n = 5
    ident = ConvTopology(n, n, np.arange(n + 1), np.arange(n), basis_count=2)
    t = transpose_topology(ident)
    assert np.array_equal(t.indptr, ident.indptr)
    assert np.array_equal(t.indices, ident.indices)
    assert t.basis_count == 2


def test_transpose_preserves_edge_count_and_edges(sphere2):
    h = build_hierarchy(sphere2, (1.0, 0.25))
    t = h.conv_down[0]
    tr = transpose_topology(t)
    assert tr.edge_count == t.edge_count
    fwd = {(i, int(j)) for i in range(t.n_out) for j in t.neighbors(i)}
    bwd = {(int(j), i) for i in range(tr.n_out) for j in tr.neighbors(i)}
    assert fwd == bwd


def test_ratio_too_small_rejected(sphere2):
    with pytest.raises(MeshError, match="at least 4"):
        build_hierarchy(sphere2, (1.0, 0.01))


def test_bad_ratio_order_rejected(sphere2):
    with pytest.raises(MeshError):
        build_hierarchy(sphere2, (1.0, 0.5, 0.5))
    with pytest.raises(MeshError, match="start at 1.0"):
        build_hierarchy(sphere2, (0.5, 0.25))


def test_disconnected_mesh_rejected(ico):
    two = Mesh(
        np.concatenate([ico.positions, ico.positions + 5.0]),
        np.concatenate([ico.faces, ico.faces + ico.n_vertices]),
    )
    with pytest.raises(MeshError, match="connected"):
        build_hierarchy(two, (1.0, 0.5))


def test_open_mesh_rejected(ico):
    holed = Mesh(ico.positions, ico.faces[1:])
    with pytest.raises(MeshError, match="watertight"):
        build_hierarchy(holed, (1.0, 0.5))


def test_topology_validates_coverage():
    with pytest.raises(MeshError, match="cover"):
        ConvTopology(3, 1, np.array([0, 2]), np.array([0, 1]), basis_count=1)


def test_topology_rejects_empty_neighborhood():
    with pytest.raises(MeshError, match="empty neighborhood"):
        ConvTopology(2, 2, np.array([0, 0, 2]), np.array([0, 1]), basis_count=1)


def test_hierarchy_works_on_synth_heads():
    h = build_hierarchy(synth_head(3, 3), (1.0, 0.25, 0.0625))
    assert h.level_sizes() == [642, 160, 40]
