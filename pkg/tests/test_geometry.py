import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from hardylab import geometry as g
from oracles import brute_distance, winding_inside


def test_koch_dimension_against_bisection():
    r = g.koch_ratio(math.pi / 3)
    assert r == pytest.approx(1 / 3, abs=1e-15)
    d = g.moran_dimension([r] * 4)
    assert abs(d - math.log(4) / math.log(3)) <= 1e-10
    assert abs(d - brentq(lambda x: 4 * r**x - 1, 0.5, 2, xtol=1e-15)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.5))
def test_moran_equation_holds(theta):
    r = g.koch_ratio(theta)
    d = g.moran_dimension([r] * 4)
    assert abs(4 * r**d - 1) < 1e-12
    assert 1 < d < 2


@pytest.mark.parametrize("theta", [0.0, math.pi / 2, -0.1])
def test_bad_bend_angle(theta):
    with pytest.raises(ValueError):
        g.build_koch_family(theta, 2)


def test_cloud_is_word_ordered():
    a = g.build_koch_family(math.pi / 3, 4)
    b = g.build_koch_family(math.pi / 3, 5)
    np.testing.assert_array_equal(b.points[::4], a.points)
    assert len(b.points) == 4**5
    assert b.total_mass == pytest.approx(1.0, rel=1e-12)
    assert b.moran_residual() < 1e-12


def test_snowflake_mass_and_orientation(snowflake6):
    S = snowflake6.boundary
    assert S.total_mass == pytest.approx(3.0, rel=1e-12)
    assert snowflake6.inside(np.zeros((1, 2)))[0]
    assert not snowflake6.inside(np.array([[0.0, 1.0]]))[0]
    # the bumps point outward: the domain is larger than the triangle
    q = np.random.default_rng(0).uniform(-0.7, 0.7, (3000, 2))
    np.testing.assert_array_equal(snowflake6.inside(q), winding_inside(snowflake6.vertices, q))


def test_sup_distance_matches_scan(koch6, rng):
    q = rng.uniform(-0.5, 1.5, (200, 2))
    np.testing.assert_allclose(g.sup_distance(q, koch6), brute_distance(koch6.points, q), atol=1e-15)
    assert g.sup_distance(np.array([0.5, 2.0]), koch6) == pytest.approx(2.0 - koch6.points[:, 1].max())


def test_distance_refines_within_gap():
    a = g.build_koch_family(math.pi / 3, 5)
    b = g.build_koch_family(math.pi / 3, 6)
    q = np.random.default_rng(3).uniform(-0.2, 1.2, (500, 2))
    assert np.max(np.abs(a.distance(q) - b.distance(q))) <= (1 / 3) ** 5 + 1e-12


def test_segment_regularity_bracket():
    S = g.build_segment(10)
    res = g.check_regularity(S, 50, [0.25], seed=1)
    interior = np.abs(S.points[:, 0] - 0.5) < 0.25
    assert interior.any()
    assert 1.0 <= res.c_low and res.c_high <= 2.0 + 2 * 2.0**-10 / 0.25
    with_end = g.check_regularity(S, 50, [0.25], seed=1, extra=[0])
    assert with_end.c_low == pytest.approx(1.0, abs=2 * 2.0**-10 / 0.25)


def test_regularity_saturates_for_large_radius(koch6):
    res = g.check_regularity(koch6, 1, [2.0, 4.0, 8.0], seed=0)
    col = res.ratios[:, 0]
    np.testing.assert_allclose(col, koch6.total_mass / np.array([2.0, 4.0, 8.0]) ** koch6.dimension_d)
    assert np.all(np.diff(col) < 0)


def test_regularity_flags_unreliable(koch6):
    res = g.check_regularity(koch6, 10, [0.25, koch6.resolution], seed=0)
    assert res.unreliable.tolist() == [False, True]
    with pytest.raises(ValueError):
        g.check_regularity(koch6, 10**6, [0.1])


def test_porosity_single_point_and_dense_grid():
    P = g.build_point_set([[0.0, 0.0]])
    assert g.check_porosity(P, 40, seed=0).kappa <= 3.0 + 1e-9
    t = np.linspace(-2, 2, 201)
    gx, gy = np.meshgrid(t, t)
    dense = g.build_point_set(np.stack([gx.ravel(), gy.ravel()], 1), dimension_d=2.0, resolution=0.0)
    res = g.check_porosity(dense, 20, seed=0, r_range=(0.5, 1.0), kappa_cap=20.0)
    assert not res.porous


def test_config_roundtrip_and_cloud_cache(tmp_path):
    cfg = g.FractalConfig("koch", math.pi / 3, 4, seed=7)
    assert g.FractalConfig.from_json(cfg.to_json()) == cfg
    a = g.build_from_config(cfg, tmp_path)
    files = list((tmp_path / "clouds").glob("*.bin"))
    assert [f.name for f in files] == [f"{cfg.content_hash()}.bin"]
    pts, w = g.load_cloud(files[0])
    np.testing.assert_array_equal(pts, a.points)
    np.testing.assert_array_equal(w, a.weights)
    b = g.build_from_config(cfg, tmp_path)
    np.testing.assert_array_equal(b.points, a.points)
    with pytest.raises(ValueError):
        g.build_from_config(g.FractalConfig("sierpinski"))
