import numpy as np
import pytest

import ionphonon as ip


@pytest.fixture(scope="module")
def driven_plane():
    lat = ip.build_lattice("plane", 4, 3, "armchair")
    u = ip.coulomb_coupling(lat, 12.0)
    p = ip.ModelParams(0.04, -0.1)
    h = ip.assemble_real_space(lat, p, u)
    return lat, h, ip.eigensolve(h)


def test_zero_time_zero_density(driven_plane):
    lat, h, spec = driven_plane
    rho = ip.drive_response(spec, ip.DriveSpec(omega_d=0.7, t_f=0.0)).rho
    np.testing.assert_allclose(rho, 0.0, atol=1e-30)


def test_density_positive(driven_plane):
    lat, h, spec = driven_plane
    rho = ip.drive_response(spec, ip.DriveSpec(omega_d=0.8, t_f=300.0)).rho
    assert rho.min() >= 0


def test_linearity_in_amplitude(driven_plane):
    lat, h, spec = driven_plane
    d1 = ip.DriveSpec(omega_d=0.9, t_f=200.0, amplitude=1.0)
    d3 = ip.DriveSpec(omega_d=0.9, t_f=200.0, amplitude=3.0)
    r1 = ip.drive_response(spec, d1).rho
    r3 = ip.drive_response(spec, d3).rho
    np.testing.assert_allclose(r3, 9.0 * r1, rtol=1e-10)


def test_zero_amplitude_zero_density(driven_plane):
    lat, h, spec = driven_plane
    rho = ip.drive_response(spec, ip.DriveSpec(omega_d=0.7, t_f=50.0,
                                               amplitude=0.0)).rho
    np.testing.assert_allclose(rho, 0.0, atol=1e-30)


def test_per_site_profile(driven_plane):
    lat, h, spec = driven_plane
    prof = np.zeros(lat.n_sites)
    prof[0] = 1.0
    d = ip.DriveSpec(omega_d=0.8, t_f=100.0, profile=prof)
    rho = ip.drive_response(spec, d).rho
    assert rho.sum() > 0
    with pytest.raises(ValueError):
        ip.DriveSpec(omega_d=0.8, profile=np.ones(3)).amplitudes(lat.n_sites)


def test_normalized_density(driven_plane):
    lat, h, spec = driven_plane
    shell = ip.boundary_shell(lat, 2)
    d = ip.DriveSpec(omega_d=0.8, t_f=200.0)
    f = ip.normalized_density(ip.drive_response(spec, d), shell)
    assert f.rho_bar.sum() == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= f.boundary_fraction <= 1.0


def test_normalized_uniform_case(driven_plane):
    lat, _, _ = driven_plane
    f = ip.DensityField(rho=np.ones(lat.n_sites), lattice=lat)
    out = ip.normalized_density(f, np.array([0, 1, 2]))
    np.testing.assert_allclose(out.rho_bar, 1.0 / lat.n_sites)
    assert out.boundary_fraction == pytest.approx(3.0 / lat.n_sites)


def test_normalized_zero_density_rejected(driven_plane):
    lat, _, _ = driven_plane
    f = ip.DensityField(rho=np.zeros(lat.n_sites), lattice=lat)
    with pytest.raises(ip.NumericalError):
        ip.normalized_density(f, np.array([0]))


def test_resonance_limit_continuity(driven_plane):
    # sample the drive frequency at E_l and at E_l +- 1e-6
    lat, h, spec = driven_plane
    E = float(spec.energies[3])
    vals = []
    for wd in (E - 1e-6, E, E + 1e-6):
        vals.append(ip.drive_response(spec, ip.DriveSpec(omega_d=wd, t_f=500.0)).rho.sum())
    assert vals[0] == pytest.approx(vals[2], rel=1e-2)
    assert min(vals[0], vals[2]) <= vals[1] * (1 + 1e-2)
    assert vals[1] == pytest.approx(vals[0], rel=1e-2)


def test_ode_matches_closed_form_two_sites():
    lat = ip.build_lattice("plane", 1, 1)
    u = ip.coulomb_coupling(lat, 12.0)
    h = ip.assemble_real_space(lat, ip.ModelParams(0.05, -0.2), u)
    spec = ip.eigensolve(h)
    d = ip.DriveSpec(omega_d=0.9, t_f=50.0)
    closed = ip.drive_response(spec, d).rho
    ode = ip.drive_response_ode(h, d, dt=1e-3).rho
    assert np.abs(closed - ode).max() / closed.max() < 1e-8


def test_ode_halved_step_converged(driven_plane):
    lat, h, spec = driven_plane
    d = ip.DriveSpec(omega_d=0.8, t_f=50.0)
    a = ip.drive_response_ode(h, d, dt=1e-3).rho
    b = ip.drive_response_ode(h, d, dt=5e-4).rho
    assert np.abs(a - b).max() / a.max() < 1e-7


def test_ode_matches_closed_form_near_resonance(driven_plane):
    lat, h, spec = driven_plane
    E = float(spec.energies[5])
    d = ip.DriveSpec(omega_d=E + 1e-7, t_f=100.0)
    closed = ip.drive_response(spec, d).rho
    ode = ip.drive_response_ode(h, d, dt=1e-3).rho
    assert np.abs(closed - ode).max() / closed.max() < 1e-6


def test_drive_spec_validation():
    with pytest.raises(ValueError):
        ip.DriveSpec(omega_d=0.0)
    with pytest.raises(ValueError):
        ip.DriveSpec(omega_d=1.0, t_f=-1.0)


def test_density_csv(tmp_path, driven_plane):
    lat, h, spec = driven_plane
    shell = ip.boundary_shell(lat, 2)
    d = ip.DriveSpec(omega_d=0.8, t_f=100.0)
    f = ip.normalized_density(ip.drive_response(spec, d), shell)
    path = tmp_path / "density.csv"
    f.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "site_index,x,y,rho,rho_bar,is_boundary"
    assert len(rows) == 1 + lat.n_sites
