import numpy as np
import pytest

import ionphonon as ip
from conftest import PARAM_POINTS

# Reference per-group Chern numbers at the four parameter points.
EXPECTED = {
    (0.02, -0.1): [-1, 0, 1],
    (0.02, -0.2): [-1, 1, 0],
    (0.04, -0.1): [-1, 0, 1],
    (0.04, -0.2): [-1, 0, 1],
}


def test_time_reversal_symmetric_all_zero(torus11):
    # v_b = 0 closes every gap at the zone corners: the bands form a single
    # group of total Chern number zero, and raw curvature sums vanish
    lat, u = torus11
    p = ip.ModelParams(0.03, 0.0)
    assert ip.chern_fhs(lat, p, u, 2, 20) == 0
    assert abs(ip.chern_tknn(lat, p, u, 2, 24)) < 1e-9
    res = ip.band_chern_numbers(lat, p, u, grid_n=40)
    assert res.groups == [(0, 3)]
    assert res.per_group == [0]


@pytest.mark.parametrize("beta,vb", PARAM_POINTS)
def test_paper_points_per_group(torus11, beta, vb):
    lat, u = torus11
    res = ip.band_chern_numbers(lat, ip.ModelParams(beta, vb), u, grid_n=24)
    assert res.per_group == EXPECTED[(beta, vb)]
    assert res.method_agreement
    assert sum(res.per_group) == 0


def test_residuals_small_at_grid_40(torus11):
    lat, u = torus11
    res = ip.band_chern_numbers(lat, ip.ModelParams(0.02, -0.1), u, grid_n=40)
    assert res.grid_n == 40            # no refinement needed
    assert max(res.residuals) < 0.05


def test_grid_refinement_stable(torus11):
    lat, u = torus11
    p = ip.ModelParams(0.04, -0.1)
    a = ip.band_chern_numbers(lat, p, u, grid_n=40)
    b = ip.band_chern_numbers(lat, p, u, grid_n=80)
    assert a.per_group == b.per_group


def test_grid_offset_invariance(torus11, rng):
    lat, u = torus11
    p = ip.ModelParams(0.02, -0.2)
    base = round(ip.chern_tknn(lat, p, u, 1, 40))
    for _ in range(3):
        off = rng.uniform(0, 1)
        assert round(ip.chern_tknn(lat, p, u, 1, 40, offset=off)) == base


def test_orientation_invariance(torus11, torus11_armchair):
    lat_z, u_z = torus11
    lat_a, u_a = torus11_armchair
    p = ip.ModelParams(0.02, -0.2)
    res_z = ip.band_chern_numbers(lat_z, p, u_z, grid_n=24)
    res_a = ip.band_chern_numbers(lat_a, p, u_a, grid_n=24)
    assert res_z.per_group == res_a.per_group


def test_conjugation_negates(torus11):
    lat, u = torus11
    a = ip.band_chern_numbers(lat, ip.ModelParams(0.02, -0.15), u, grid_n=24)
    b = ip.band_chern_numbers(lat, ip.ModelParams(0.02, +0.15), u, grid_n=24)
    assert b.per_group == [-c for c in a.per_group]


def test_cumulative_relation(torus11):
    # per-group values are successive differences of the cumulative integers
    lat, u = torus11
    res = ip.band_chern_numbers(lat, ip.ModelParams(0.04, -0.1), u, grid_n=24)
    acc = np.cumsum(res.per_group[:-1]).tolist()
    assert acc == res.cumulative_int


def test_gap_closed_error(torus11):
    lat, u = torus11
    # bands 3 and 4 touch for beta = 0: occupied set {1,2,3} is ill-defined
    with pytest.raises(ip.GapClosedError):
        ip.chern_tknn(lat, ip.ModelParams(0.0, -0.1), u, 3, 12)
    with pytest.raises(ip.GapClosedError):
        ip.chern_fhs(lat, ip.ModelParams(0.0, -0.1), u, 1, 12)


def test_invalid_occupation_rejected(torus11):
    lat, u = torus11
    with pytest.raises(ValueError):
        ip.chern_tknn(lat, ip.ModelParams(0.02, -0.1), u, 4, 12)


def test_fhs_agrees_with_tknn_random_points(torus11, rng):
    lat, u = torus11
    checked = 0
    while checked < 5:
        beta = rng.uniform(0.01, 0.05)
        vb = -rng.uniform(0.05, 0.3)
        p = ip.ModelParams(beta, vb)
        try:
            raw = ip.chern_tknn(lat, p, u, 1, 24)
            integer = ip.chern_fhs(lat, p, u, 1, 24)
        except ip.GapClosedError:
            continue
        if abs(raw - round(raw)) > 0.05:
            continue
        assert round(raw) == integer
        checked += 1


def test_chern_json(torus11):
    import json

    lat, u = torus11
    p = ip.ModelParams(0.02, -0.1)
    res = ip.band_chern_numbers(lat, p, u, grid_n=24)
    doc = json.loads(res.to_json(p))
    assert doc["per_group"] == EXPECTED[(0.02, -0.1)]
    assert doc["method_agreement"] is True
    assert doc["params"]["beta_x"] == 0.02
    assert len(doc["cumulative_raw"]) == len(doc["residuals"])
