import math

import numpy as np
import pytest

from hardylab import dyadic as dy
from hardylab import geometry as g
from oracles import brute_distance, whitney_point_oracle

BOX = (-2.0, 2.0, -2.0, 2.0)


@pytest.fixture(scope="module")
def origin():
    return g.build_point_set([[0.0, 0.0]])


@pytest.fixture(scope="module")
def koch_w():
    S = g.build_koch_family(math.pi / 3, 6)
    return S, dy.whitney(S, BOX, 7)


def test_point_whitney_matches_recursion(origin):
    W = dy.whitney(origin, BOX, 6)
    got = sorted(zip(W.levels.tolist(), W.ix.tolist(), W.iy.tolist()))
    assert got == whitney_point_oracle(BOX, 6)
    # fringe: the four level-6 cubes touching the origin, plus their ring
    assert len(W.fringe_ix) > 0 and np.all(W.fringe_dist < 2 * 2.0**-6)


def test_cover_is_disjoint_and_fills_box(koch_w):
    S, W = koch_w
    area = np.sum(W.side**2) + W.fringe_volume
    assert area == pytest.approx(16.0, rel=1e-12)
    x = np.random.default_rng(0).uniform(-2, 2, (20000, 2))
    home = W.locate(x)
    assert np.all(home != -1)
    hit = home >= 0
    c = W.centers[home[hit]]
    assert np.all(np.max(np.abs(x[hit] - c), axis=1) <= W.half_side[home[hit]] + 1e-15)


def test_whitney_property_against_scan(koch_w):
    S, W = koch_w
    dc = brute_distance(S.points, W.centers)
    np.testing.assert_allclose(W.dist_center, dc, atol=1e-15)
    dq = np.maximum(dc - W.half_side, 0)
    assert W.whitney_ok(dq).all()


def test_touching_is_symmetric_and_complete(koch_w):
    _, W = koch_w
    off, nb = W.touching()
    pairs = {(a, int(b)) for a in range(len(W)) for b in nb[off[a] : off[a + 1]]}
    assert all((b, a) in pairs for a, b in pairs)
    # check completeness for a sample of cells by brute force
    lo = W.centers - W.half_side[:, None]
    hi = W.centers + W.half_side[:, None]
    for a in np.random.default_rng(1).choice(len(W), 200, replace=False):
        touch = np.all((lo <= hi[a] + 1e-15) & (hi >= lo[a] - 1e-15), axis=1)
        touch[a] = False
        assert set(np.nonzero(touch)[0].tolist()) == set(nb[off[a] : off[a + 1]].tolist())


def test_partition_of_unity(koch_w):
    S, W = koch_w
    P = dy.PartitionOfUnity(W)
    x = np.random.default_rng(2).uniform(-2, 2, (20000, 2))
    s = P.sum(x, on_fringe="skip")
    ok = ~np.isnan(s)
    np.testing.assert_allclose(s[ok], 1.0, atol=1e-13)
    rows, cells, phi, _ = P.weights(x[ok][:5000])
    d = np.max(np.abs(x[ok][:5000][rows] - W.centers[cells]), axis=1)
    assert np.all(d <= 9 / 8 * W.half_side[cells] * (1 + 1e-12))
    with pytest.raises(dy.UnresolvedRegionError):
        P.weights(S.points[5:6])


def test_partition_eval_single_cube(koch_w):
    _, W = koch_w
    P = dy.PartitionOfUnity(W)
    Q = W.cells()[0]
    # phi_Q is 1 at the centre: no neighbour's (9/8)-dilate reaches it
    assert dy.partition_eval(P, Q, Q.center) == pytest.approx(1.0)
    with pytest.raises(KeyError):
        dy.partition_eval(P, dy.DyadicCube(30, 0, 0), Q.center)


def test_smooth_step_and_bump():
    u = np.linspace(-1, 2, 301)
    s = dy.smooth_step(u)
    assert np.all(s[u <= 0] == 1) and np.all(s[u >= 1] == 0)
    assert np.all(np.diff(s) <= 0)
    assert dy.smooth_step(0.5) == pytest.approx(0.5)
    c = np.zeros(2)
    assert dy.bump(np.array([[0.99, 0.0]]), c, 1.0)[0] == 1.0
    assert dy.bump(np.array([[1.125, 0.0]]), c, 1.0)[0] == 0.0


def test_serialization_roundtrip(koch_w, tmp_path):
    S, W = koch_w
    V = dy.WhitneyDecomposition.from_bytes(W.to_bytes())
    for name in ("levels", "ix", "iy", "dist_center", "fringe_ix", "fringe_iy"):
        np.testing.assert_array_equal(getattr(V, name), getattr(W, name))
    a = dy.whitney(S, BOX, 7, cache_dir=tmp_path, cache_key="k6")
    b = dy.whitney(S, BOX, 7, cache_dir=tmp_path, cache_key="k6")
    assert a.cache_file == b.cache_file and (tmp_path / "whitney" / a.cache_file).exists()
    np.testing.assert_array_equal(a.levels, b.levels)


def test_bad_levels(origin):
    with pytest.raises(ValueError):
        dy.whitney(origin, BOX, -1)


def test_near_boundary_family_monotone_in_gamma(koch_w):
    S, _ = koch_w
    a = set(zip(*(x.tolist() for x in dy.near_boundary_family(S, 2.0, 6))))
    b = set(zip(*(x.tolist() for x in dy.near_boundary_family(S, 5.0, 6))))
    assert a <= b and len(a) < len(b)
    for j, i, k in list(a)[:200]:
        side = 2.0**-j
        c = np.array([[(i + 0.5) * side, (k + 0.5) * side]])
        assert S.distance(c)[0] <= 2.0 * side and side <= 1
    with pytest.raises(ValueError):
        dy.near_boundary_family(S, 0.5, 4)


def test_porous_subcube_point_and_line(origin):
    W = dy.whitney(origin, BOX, 10)
    for i in range(1, 7):
        Q = dy.porous_subcube(np.zeros(2), i, 3.0, origin, W)
        r = 2.0 ** -(i + 1)
        assert r / 15 <= Q.diam <= r
        assert np.max(np.abs(Q.center)) + Q.half_side <= 2 * r
    t = np.linspace(-2, 2, 4097)
    line = g.build_point_set(np.stack([t, np.zeros_like(t)], 1), dimension_d=1.0, resolution=1e-3)
    WL = dy.whitney(line, BOX, 9)
    for i in range(1, 5):
        with pytest.raises(dy.PorousSearchError):
            dy.porous_subcube(np.zeros(2), i, 1.0, line, WL)


def test_associated_cubes(koch_w):
    S, W = koch_w
    A = dy.associated_cubes(W, S)
    assert len(A) == len(W)
    np.testing.assert_allclose(A.half_side, W.half_side / 2)
    d = np.max(np.abs(A.anchors - W.centers), axis=1)
    np.testing.assert_allclose(d, W.dist_center, atol=1e-15)
    a, h = dy.associated_cube(W.cells()[0], S)
    np.testing.assert_array_equal(a, A.anchors[0])
