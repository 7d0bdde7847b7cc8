import numpy as np
import pytest

import ionphonon as ip


@pytest.fixture(scope="module")
def plane_spectrum(plane_384_armchair):
    lat, u = plane_384_armchair
    p = ip.ModelParams(0.04, -0.1)
    spec = ip.eigensolve(ip.assemble_real_space(lat, p, u))
    return lat, u, p, spec


def test_bulk_windows_two_gaps(torus11):
    lat, u = torus11
    wins = ip.bulk_gap_windows(ip.ModelParams(0.02, -0.1), u)
    assert len(wins) == 2
    widths = [hi - lo for lo, hi in wins]
    assert widths[0] > widths[1] > 0


def test_bulk_windows_beta_zero_width(torus11):
    lat, u = torus11
    wins = ip.bulk_gap_windows(ip.ModelParams(0.0, -0.1), u, margin=0.0)
    assert len(wins) == 1
    lo, hi = wins[0]
    assert hi - lo == pytest.approx(0.2, abs=1e-12)


def test_bulk_windows_margin_shrinks(torus11):
    lat, u = torus11
    p = ip.ModelParams(0.02, -0.1)
    raw = ip.bulk_gap_windows(p, u, margin=0.0)
    shaved = ip.bulk_gap_windows(p, u, margin=0.02)
    for (a0, b0), (a1, b1) in zip(raw, shaved):
        assert a1 > a0 and b1 < b0
        assert (b1 - a1) == pytest.approx(0.96 * (b0 - a0), rel=1e-9)


def test_bulk_windows_grid_convergence(torus11):
    lat, u = torus11
    p = ip.ModelParams(0.02, -0.1)
    w40 = ip.bulk_gap_windows(p, u, grid_n=40)
    w80 = ip.bulk_gap_windows(p, u, grid_n=80)
    for (a0, b0), (a1, b1) in zip(w40, w80):
        assert abs(a0 - a1) < 1e-3 and abs(b0 - b1) < 1e-3


def test_edge_modes_in_both_gaps(plane_spectrum, torus11_armchair):
    lat, u, p, spec = plane_spectrum
    _, ut = torus11_armchair
    wins = ip.bulk_gap_windows(p, ut)
    sets = ip.find_edge_modes(spec, wins)
    assert all(len(s.modes) >= 1 for s in sets)
    for s in sets:
        lo, hi = s.gap_window
        for m in s.modes:
            assert lo < m.energy < hi
            assert 0.5 <= m.edge_weight <= 1.0


def test_edge_bulk_anchor_energies(plane_spectrum):
    # the mode nearest 0.7 is edge-localized, the one nearest 0.9 is not
    lat, u, p, spec = plane_spectrum
    shell = ip.boundary_shell(lat, 2)
    flat = np.concatenate([2 * shell, 2 * shell + 1])
    weights = (np.abs(spec.modes[flat, :]) ** 2).sum(axis=0)
    near07 = int(np.argmin(np.abs(spec.energies - 0.7)))
    near09 = int(np.argmin(np.abs(spec.energies - 0.9)))
    assert weights[near07] >= 0.6
    assert weights[near09] < 0.5


def test_edge_weight_phase_invariance(plane_spectrum):
    lat, u, p, spec = plane_spectrum
    wins = [(0.62, 0.76)]
    sets_a = ip.find_edge_modes(spec, wins)
    rotated = ip.Spectrum(
        energies=spec.energies,
        modes=spec.modes * np.exp(0.731j),
        source=spec.source,
        lattice=spec.lattice,
    )
    sets_b = ip.find_edge_modes(rotated, wins)
    wa = [m.edge_weight for m in sets_a[0].modes]
    wb = [m.edge_weight for m in sets_b[0].modes]
    np.testing.assert_allclose(wa, wb, atol=1e-12)


def test_localization_profile_normalized(plane_spectrum):
    lat, u, p, spec = plane_spectrum
    prof = ip.localization_profile(spec, 100)
    assert prof.dens_x.sum() + prof.dens_y.sum() == pytest.approx(1.0, abs=1e-10)
    assert prof.positions.shape == (lat.n_sites, 2)


def test_localization_profile_edge_mode_boundary_weight(plane_spectrum,
                                                        torus11_armchair):
    lat, u, p, spec = plane_spectrum
    _, ut = torus11_armchair
    wins = ip.bulk_gap_windows(p, ut)
    near07 = int(np.argmin(np.abs(spec.energies - 0.7)))
    assert wins[0][0] < spec.energies[near07] < wins[0][1]
    prof = ip.localization_profile(spec, near07)
    shell = ip.boundary_shell(lat, 2)
    frac = prof.dens_x[shell].sum() + prof.dens_y[shell].sum()
    assert frac >= 0.6


def test_profile_csv(tmp_path, plane_spectrum):
    lat, u, p, spec = plane_spectrum
    prof = ip.localization_profile(spec, 10)
    path = tmp_path / "prof.csv"
    prof.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "site_index,x,y,dens_x,dens_y"


def test_edge_velocity_counter_propagating(cylinder_400, torus11_armchair):
    lat, u = cylinder_400
    _, ut = torus11_armchair
    p = ip.ModelParams(0.02, -0.2)
    wins = ip.bulk_gap_windows(p, ut)
    bands = ip.band_structure(lat, p, u, grid_n=200)
    crossings = ip.edge_velocity(bands, wins[0])
    assert len(crossings) == 2
    assert ip.counter_propagating_pairs(crossings) == 1
    with pytest.raises(ip.NumericalError):
        ip.edge_velocity(bands, wins[1])


def test_edge_velocity_slope_grid_convergence(cylinder_400, torus11_armchair):
    lat, u = cylinder_400
    _, ut = torus11_armchair
    p = ip.ModelParams(0.04, -0.1)
    win = ip.bulk_gap_windows(p, ut)[0]
    s200 = sorted(c.slope for c in
                  ip.edge_velocity(ip.band_structure(lat, p, u, 200), win))
    s400 = sorted(c.slope for c in
                  ip.edge_velocity(ip.band_structure(lat, p, u, 400), win))
    np.testing.assert_allclose(s200, s400, rtol=0.05)


def test_edge_mode_count_matches_chern(cylinder_400, torus11_armchair):
    # |cumulative C| = 1 below the gap -> one branch per boundary, so two
    # center crossings on the cylinder
    lat, u = cylinder_400
    lat_t, ut = torus11_armchair
    p = ip.ModelParams(0.04, -0.1)
    res = ip.band_chern_numbers(lat_t, p, ut, grid_n=24)
    wins = ip.bulk_gap_windows(p, ut)
    bands = ip.band_structure(lat, p, u, grid_n=200)
    for gi, win in enumerate(wins):
        cum = abs(res.cumulative_int[gi])
        crossings = ip.edge_velocity(bands, win)
        assert len(crossings) == 2 * cum


def test_disorder_robustness_zero_width(small_plane):
    lat, u = small_plane
    p = ip.ModelParams(0.04, -0.1)
    tor = ip.build_lattice("torus", 1, 1)
    ut = ip.coulomb_coupling(tor, 12.0)
    wins = ip.bulk_gap_windows(p, ut)
    spec = ip.DisorderSpec((abs(p.v_b), abs(p.v_b)), (1.0, 1.0), seed=0)
    rep = ip.disorder_robustness(p, u, spec, trials=3, windows=wins[:1])
    assert rep.persistence_rate == 1.0
    counts = {t.edge_mode_count for t in rep.per_trial}
    assert len(counts) == 1          # trials identical to the clean system


def test_disorder_robustness_threads_deterministic(small_plane):
    lat, u = small_plane
    p = ip.ModelParams(0.04, -0.1)
    tor = ip.build_lattice("torus", 1, 1)
    ut = ip.coulomb_coupling(tor, 12.0)
    wins = ip.bulk_gap_windows(p, ut)
    spec = ip.DisorderSpec((0.05, 0.15), (0.95, 1.05), seed=9)
    a = ip.disorder_robustness(p, u, spec, 4, wins[:1])
    b = ip.disorder_robustness(p, u, spec, 4, wins[:1], threads=4)
    assert [t.max_edge_weight for t in a.per_trial] == \
        [t.max_edge_weight for t in b.per_trial]


def test_disorder_robustness_requires_plane(torus11):
    lat, u = torus11
    spec = ip.DisorderSpec((0.05, 0.15), (0.95, 1.05), seed=0)
    with pytest.raises(ip.NumericalError):
        ip.disorder_robustness(ip.ModelParams(0.04, -0.1), u, spec, 1,
                               [(0.6, 0.7)])


def test_robustness_report_json(small_plane):
    import json

    lat, u = small_plane
    p = ip.ModelParams(0.04, -0.1)
    tor = ip.build_lattice("torus", 1, 1)
    ut = ip.coulomb_coupling(tor, 12.0)
    wins = ip.bulk_gap_windows(p, ut)
    spec = ip.DisorderSpec((0.05, 0.15), (0.95, 1.05), seed=1)
    rep = ip.disorder_robustness(p, u, spec, 2, wins[:1])
    doc = json.loads(rep.to_json())
    assert doc["trials"] == 2
    assert len(doc["per_trial"]) == 2
    assert doc["per_trial"][0]["seed"] == 1
