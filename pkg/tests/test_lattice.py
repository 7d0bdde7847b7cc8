import numpy as np
import pytest

import ionphonon as ip
from ionphonon.lattice import NN_DISTANCE, coupling_block, neighbor_pairs


def nn_counts(lat):
    pairs = neighbor_pairs(lat)
    counts = np.zeros(lat.n_sites, dtype=int)
    np.add.at(counts, pairs[:, 0], 1)
    return counts


def test_minimal_torus_has_three_nn_images():
    lat = ip.build_lattice("torus", 1, 1)
    assert lat.n_sites == 2
    assert np.all(nn_counts(lat) == 3)


@pytest.mark.parametrize("orientation", ["zigzag", "armchair"])
def test_torus_every_site_three_neighbors(orientation):
    lat = ip.build_lattice("torus", 4, 3, orientation)
    assert lat.n_sites == 24
    assert np.all(nn_counts(lat) == 3)
    assert not lat.is_boundary.any()


def test_plane_384_sites_boundary_flagged():
    lat = ip.build_lattice("plane", 16, 12)
    assert lat.n_sites == 384
    counts = nn_counts(lat)
    assert np.all(counts <= 3)
    np.testing.assert_array_equal(lat.is_boundary, counts < 3)
    assert lat.is_boundary.sum() > 0


def test_cylinder_400_sites_two_boundary_rows():
    lat = ip.build_lattice("cylinder", 20, 10)
    assert lat.n_sites == 400
    rows = {tuple(c) for c in lat.cells[lat.is_boundary][:, 1:].tolist()}
    assert rows == {(0,), (9,)}


def test_sublattices_alternate():
    lat = ip.build_lattice("torus", 3, 3)
    for i, j in neighbor_pairs(lat):
        assert lat.sublattices[i] != lat.sublattices[j]


def test_positions_distinct():
    lat = ip.build_lattice("plane", 4, 4)
    d = np.linalg.norm(
        lat.positions[:, None, :] - lat.positions[None, :, :], axis=-1
    )
    np.fill_diagonal(d, 1.0)
    assert d.min() > 1e-9


def test_invalid_sizes_rejected():
    with pytest.raises(ip.lattice.LatticeError):
        ip.build_lattice("torus", 0, 3)
    with pytest.raises(ip.lattice.LatticeError):
        ip.build_lattice("plane", 200, 200)


def test_coupling_block_axis_pair():
    # sites separated by R along x: U_xx = -2/R^3, U_yy = +1/R^3, U_xy = 0
    for R in (0.5, 1.0, 2.5):
        blk = coupling_block(np.array([[R, 0.0]]))[0]
        assert blk[0, 0] == pytest.approx(-2.0 / R**3)
        assert blk[1, 1] == pytest.approx(1.0 / R**3)
        assert blk[0, 1] == 0.0 and blk[1, 0] == 0.0


def test_nn_only_three_partners(torus11):
    lat, _ = torus11
    u = ip.coulomb_coupling(lat, 12.0, nn_only=True)
    for i in range(lat.n_sites):
        assert np.count_nonzero(u.i_index == i) == 3
    assert np.allclose(np.linalg.norm(u.displacements, axis=1), NN_DISTANCE)


def test_nn_only_is_cutoff_restriction(torus11):
    lat, u_full = torus11
    u_nn = ip.coulomb_coupling(lat, 12.0, nn_only=True)
    d = np.linalg.norm(u_full.displacements, axis=1)
    sel = np.abs(d - NN_DISTANCE) < 1e-9
    full_sorted = np.lexsort((u_full.displacements[sel, 1],
                              u_full.displacements[sel, 0],
                              u_full.j_index[sel], u_full.i_index[sel]))
    nn_sorted = np.lexsort((u_nn.displacements[:, 1], u_nn.displacements[:, 0],
                            u_nn.j_index, u_nn.i_index))
    np.testing.assert_allclose(
        u_full.blocks[sel][full_sorted], u_nn.blocks[nn_sorted]
    )


def test_coupling_symmetry(small_plane):
    # U^{i,j}_{ab} = U^{j,i}_{ba}
    _, u = small_plane
    dense = u.dense_blocks()
    np.testing.assert_allclose(
        dense, dense.transpose(1, 0, 3, 2), atol=1e-14
    )


def test_third_shell_sum_c3_invariant(torus11):
    lat, u = torus11
    d = np.linalg.norm(u.displacements, axis=1)
    shells = np.unique(np.round(d, 9))
    third = shells[2]
    sel = (u.i_index == 0) & (np.abs(d - third) < 1e-9)
    M = u.blocks[sel].sum(axis=0)
    c, s = np.cos(2 * np.pi / 3), np.sin(2 * np.pi / 3)
    R = np.array([[c, -s], [s, c]])
    np.testing.assert_allclose(R.T @ M @ R, M, atol=1e-12)


def test_cutoff_truncation_error():
    # tail of the 1/R^3 sum: cutoff 8 vs the brute-force 30-cutoff reference
    lat = ip.build_lattice("torus", 4, 4)
    u8 = ip.coulomb_coupling(lat, 8.0).dense_blocks()
    u30 = ip.coulomb_coupling(lat, 30.0).dense_blocks()
    rel = np.linalg.norm(u8 - u30) / np.linalg.norm(u30)
    assert rel < 1e-2


def test_onsite_blocks_match_negative_row_sum(torus11):
    lat, u = torus11
    for i in range(lat.n_sites):
        expect = -u.blocks[u.i_index == i].sum(axis=0)
        np.testing.assert_allclose(u.onsite_blocks[i], expect, atol=1e-12)


def test_cutoff_below_bond_length_rejected(torus11):
    lat, _ = torus11
    with pytest.raises(ip.lattice.LatticeError):
        ip.coulomb_coupling(lat, 0.5)


@pytest.mark.parametrize("orientation", ["zigzag", "armchair"])
def test_boundary_shell_layers(orientation):
    lat = ip.build_lattice("plane", 6, 6, orientation)
    shell1 = ip.boundary_shell(lat, 1)
    shell2 = ip.boundary_shell(lat, 2)
    np.testing.assert_array_equal(shell1, np.nonzero(lat.is_boundary)[0])
    assert set(shell1) < set(shell2)
    assert len(shell2) < lat.n_sites


def test_lattice_json_roundtrip():
    import json

    lat = ip.build_lattice("plane", 3, 3)
    doc = json.loads(lat.to_json())
    assert len(doc["sites"]) == lat.n_sites
    assert doc["sites"][0]["sublattice"] == "A"
    assert doc["geometry"] == "plane"
