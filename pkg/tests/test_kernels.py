import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_nearest, winding_inside


def test_nearest_matches_scan(backend, rng):
    pts = rng.uniform(-1, 1, (500, 2))
    q = rng.uniform(-1.5, 1.5, (300, 2))
    d, i = backend.PointTree(pts).nearest(q)
    d0, i0 = brute_nearest(pts, q)
    np.testing.assert_allclose(d, d0, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(i, i0)


def test_nearest_tie_breaks_lexicographically(backend):
    pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    d, i = backend.PointTree(pts).nearest(np.zeros((1, 2)))
    assert d[0] == 1.0 and i[0] == 1


def test_box_sum_and_query(backend, rng):
    pts = rng.uniform(0, 1, (2000, 2))
    w = rng.uniform(0.5, 2, 2000)
    c = rng.uniform(0, 1, (50, 2))
    T = backend.PointTree(pts)
    got = T.box_sum(c, 0.1, w)
    inside = np.max(np.abs(pts[None] - c[:, None]), axis=2) <= 0.1
    np.testing.assert_allclose(got, inside @ w, rtol=1e-12)
    two = T.box_sum(c, 0.1, np.stack([w, 2 * w], 1))
    np.testing.assert_allclose(two[:, 1], 2 * got, rtol=1e-12)
    off, idx = T.box_query(c, 0.1)
    for j in range(len(c)):
        assert sorted(idx[off[j] : off[j + 1]]) == sorted(np.nonzero(inside[j])[0])


def test_riesz_sum_matches_scan(backend, rng):
    pts = rng.uniform(0, 1, (800, 2))
    w = rng.uniform(0.5, 2, 800)
    q = np.vstack([rng.uniform(0, 1, (40, 2)), pts[:3]])
    sums, hits = backend.PointTree(pts).riesz_sum(q, 0.2, 1.3, w)
    for j in range(len(q)):
        m = np.max(np.abs(pts - q[j]), axis=1) <= 0.2
        r = np.hypot(*(pts[m] - q[j]).T)
        nz = r > 0
        assert hits[j] == np.sum(~nz)
        np.testing.assert_allclose(sums[j], np.sum(w[m][nz] * r[nz] ** -1.3), rtol=1e-11)


def test_polygon_matches_winding_number(backend, snowflake6, rng):
    v = snowflake6.vertices
    q = rng.uniform(-0.8, 0.8, (4000, 2))
    np.testing.assert_array_equal(backend.PolygonIndex(v).contains(q), winding_inside(v, q))


def test_polygon_boundary_is_outside(backend):
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    P = backend.PolygonIndex(sq)
    q = np.array([[0.5, 0.5], [0.0, 0.5], [0.5, 1.0], [1.0, 1.0], [1.5, 0.5]])
    assert P.contains(q).tolist() == [True, False, False, False, False]


def test_bad_input_rejected(backend):
    with pytest.raises(ValueError):
        backend.PointTree(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        backend.PolygonIndex(np.zeros((2, 2)))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (30, 2), elements=st.floats(-4, 4)), arrays(np.float64, (5, 2), elements=st.floats(-5, 5)))
def test_backends_agree(pts, q):
    from hardylab.kernels import available_backends, load_backend

    res = [load_backend(b).PointTree(pts).nearest(q) for b in available_backends()]
    for d, i in res[1:]:
        np.testing.assert_array_equal(d, res[0][0])
        np.testing.assert_array_equal(i, res[0][1])
