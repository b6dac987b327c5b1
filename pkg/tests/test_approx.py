import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardylab import approx as ap
from hardylab import geometry as g
from hardylab.fields import Monomials, Sinusoid


def _poly(deg, rng):
    return Monomials({(a, b): rng.normal() for a in range(deg + 1) for b in range(deg + 1 - a)})


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("u", [1, 2, 3])
def test_polynomials_have_zero_error(k, u, rng):
    f = _poly(k - 1, rng)
    Q = (rng.uniform(-1, 1, 2), 0.3)
    val, _ = ap.best_approx(f, Q, k, u)
    scale = np.max(np.abs(f(Q[0] + Q[1] * ap.gauss_grid(8)[0])))
    assert val <= 1e-10 * scale


def test_linear_on_unit_square():
    f = Monomials({(1, 0): 1.0})
    val, P = ap.best_approx(f, ((0.5, 0.5), 0.5), 1, 2)
    assert abs(val - 1 / math.sqrt(12)) <= 1e-6
    assert P(np.array([[0.2, 0.9]]))[0] == pytest.approx(0.5)
    assert ap.best_approx(f, ((0.5, 0.5), 0.5), 1, 1)[0] == pytest.approx(0.25, abs=1e-6)
    assert ap.best_approx(f, ((0.5, 0.5), 0.5), 1, 3)[0] == pytest.approx((1 / 32) ** (1 / 3), abs=1e-6)


def test_constants_any_u():
    f = Monomials({(0, 0): 2.5})
    for u in (1, 1.5, 2, 4):
        assert ap.best_approx(f, ((0, 0), 1), 1, u)[0] == pytest.approx(0, abs=1e-12)


def test_monotone_on_nested_pairs():
    rng = np.random.default_rng(7)
    f = Sinusoid((2.0, -1.3), 0.4)
    bad = 0
    for _ in range(1000):
        k = int(rng.integers(1, 4))
        u = float(rng.choice([1.0, 2.0, 3.0]))
        r2 = 2.0 ** rng.uniform(-3, 0)
        c2 = rng.uniform(-1, 1, 2)
        r1 = r2 * 2.0 ** rng.uniform(-4, 0)
        c1 = c2 + (r2 - r1) * rng.uniform(-1, 1, 2)
        e1, _ = ap.best_approx(f, (c1, r1), k, u, ap.QuadSpec(8))
        e2, _ = ap.best_approx(f, (c2, r2), k, u, ap.QuadSpec(8))
        bad += e1 > (r2 / r1) ** (2 / u) * e2 * (1 + 1e-6) + 1e-14
    assert bad == 0


def test_monotone_in_k_and_u(rng):
    f = Sinusoid((3.0, 1.0))
    Q = ((0.1, 0.2), 0.5)
    grid = ap.QuadSpec(10)
    e = [ap.best_approx(f, Q, k, 2, grid)[0] for k in (1, 2, 3, 4)]
    assert all(b <= a + 1e-14 for a, b in zip(e, e[1:]))
    eu = [ap.best_approx(f, Q, 2, u, grid)[0] for u in (1, 1.5, 2, 3)]
    assert all(b >= a - 1e-9 for a, b in zip(eu, eu[1:]))


@settings(max_examples=25, deadline=None)
@given(st.integers(-4, 4), st.integers(-8, 8), st.integers(-8, 8), st.integers(1, 3))
def test_dyadic_rescaling_invariance(j, i, kk, k):
    f = Sinusoid((1.7, -0.6), 0.3)
    s = 2.0**j
    c = np.array([i + 0.5, kk + 0.5]) * 0.25

    def fa(x):
        return f(x * s)

    a, _ = ap.best_approx(f, (c * s, 0.125 * s), k, 2, ap.QuadSpec(8))
    b, _ = ap.best_approx(fa, (c, 0.125), k, 2, ap.QuadSpec(8))
    assert abs(a - b) <= 1e-9 * max(a, 1e-300) + 1e-15


def test_irls_nonconvergence_raises():
    vals = np.random.default_rng(0).normal(size=(1, 64))
    with pytest.raises(ap.ApproxConvergenceError) as err:
        ap.local_errors(vals, 2, 1.5, 8, max_iter=1, tol=1e-300)
    assert np.isfinite(err.value.value).all()


def test_rank_deficient_grid():
    with pytest.raises(ap.RankDeficientError):
        ap.local_errors(np.zeros((1, 4)), 4, 2, 2)


def test_polycoeffs_json_and_rebase(rng):
    P = ap.PolyCoeffs(2, (0.3, -0.2), 0.25, rng.normal(size=6))
    Q = ap.PolyCoeffs.from_json(P.to_json())
    x = rng.uniform(-1, 1, (50, 2))
    np.testing.assert_allclose(Q(x), P(x), rtol=1e-14)
    R = P.rebase(np.array([1.0, 1.0]), 2.0, degree=3)
    np.testing.assert_allclose(R(x), P(x), rtol=1e-10, atol=1e-12)
    with pytest.raises(ValueError):
        P.rebase((0, 0), 1.0, degree=1)


def test_near_best_projector(rng):
    f = Sinusoid((2.0, 1.0))
    Q = ((0.0, 0.0), 0.5)
    c = ap.near_best_constant(f, Q, 2, 2)
    assert c == pytest.approx(1.0, abs=1e-9)
    assert ap.near_best_constant(f, Q, 2, 1) >= 1.0 - 1e-9
    # linear map
    h = Monomials({(2, 1): 1.0})
    P1 = ap.near_best_projector(lambda x: 2 * f(x) + h(x), Q, 3)
    P2 = ap.near_best_projector(f, Q, 3)
    P3 = ap.near_best_projector(h, Q, 3)
    np.testing.assert_allclose(P1.coeffs, 2 * P2.coeffs + P3.coeffs, atol=1e-12)
    num, den = ap.projector_consistency(f, Q, ((0.1, 0.1), 0.125), 2)
    assert np.isfinite(num) and den > 0


# -- projectors against the boundary measure -----------------------------------


@pytest.fixture(scope="module")
def koch():
    return g.build_koch_family(math.pi / 3, 7)


def _normal_equations(g_vals, pts, w, center, half, deg):
    V = ap.basis_matrix((pts - center) / half, deg)
    return np.linalg.solve(V.T @ (w[:, None] * V), V.T @ (w * g_vals))


def test_measure_projector_matches_normal_equations(koch):
    c = koch.points[1000]
    h = 0.05
    _, idx = koch.tree.box_query(c[None], h)
    pts, w = koch.points[idx], koch.weights[idx]
    gx = pts[:, 0]
    P = ap.measure_projector(gx, pts, w, c, h, 1)
    np.testing.assert_allclose(P.coeffs, _normal_equations(gx, pts, w, c, h, 1), rtol=1e-7, atol=1e-10)
    np.testing.assert_allclose(P(pts), gx, atol=1e-10)


def test_measure_projector_identities(koch, rng):
    c = koch.points[3000]
    h = 0.08
    _, idx = koch.tree.box_query(c[None], h)
    pts, w = koch.points[idx], koch.weights[idx]
    one = ap.measure_projector(np.ones(len(pts)), pts, w, c, h, 2)
    np.testing.assert_allclose(one(pts), 1.0, atol=1e-10)
    a, b = rng.normal(size=len(pts)), rng.normal(size=len(pts))
    Pa = ap.measure_projector(a, pts, w, c, h, 1)
    Pb = ap.measure_projector(b, pts, w, c, h, 1)
    Pab = ap.measure_projector(3 * a + b, pts, w, c, h, 1)
    np.testing.assert_allclose(Pab.coeffs, 3 * Pa.coeffs + Pb.coeffs, rtol=1e-9, atol=1e-12)
    again = ap.measure_projector(Pa(pts), pts, w, c, h, 1)
    np.testing.assert_allclose(again.coeffs, Pa.coeffs, rtol=1e-10, atol=1e-12)


def test_measure_projector_cutoff_and_errors(koch):
    c = koch.points[0]
    z = ap.measure_projector(np.ones(3), koch.points[:3], koch.weights[:3], c, 0.1, 1, parent_diam=5.0, delta=1.0)
    assert np.all(z.coeffs == 0) and z.provenance["cutoff"]
    with pytest.raises(ap.EmptySupportError):
        ap.measure_projector(np.zeros(0), np.zeros((0, 2)), np.zeros(0), c, 0.1, 1)


def test_degree_reduction_on_a_line():
    t = np.linspace(0, 1, 50)
    pts = np.stack([t, np.zeros_like(t)], 1)
    P = ap.measure_projector(t**2, pts, np.full(50, 0.02), (0.5, 0.0), 0.5, 2)
    assert P.provenance["degree"] < 2 and P.degree == 2


@pytest.mark.parametrize("deg", [0, 1, 2])
def test_batched_projectors_match_single(koch, deg):
    gvals = np.sin(3 * koch.points[:, 0]) + koch.points[:, 1]
    centers = koch.points[::2000]
    half = np.full(len(centers), 0.04)
    C, used, counts = ap.measure_projectors(koch, gvals, centers, half, deg)
    for b in range(len(centers)):
        _, idx = koch.tree.box_query(centers[b][None], half[b])
        one = ap.measure_projector(gvals[idx], koch.points[idx], koch.weights[idx], centers[b], half[b], deg)
        np.testing.assert_allclose(C[b], one.coeffs, rtol=1e-7, atol=1e-9)
        assert counts[b] == len(idx)


def test_remez_ratio(koch):
    one = ap.PolyCoeffs(0, (0, 0), 1.0, [1.0])
    c = koch.points[5000]
    assert ap.remez_ratio(one, (c, 0.2), (c, 0.1), koch) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        ap.remez_ratio(one, (c, 0.2), (c + 1e-3, 0.1), koch)
    with pytest.raises(ValueError):
        ap.remez_ratio(one, (c, 0.9), (c, 0.1), koch, R=4.0)
    with pytest.raises(ZeroDivisionError):
        ap.remez_ratio(lambda x: np.zeros(len(x)), (c, 0.2), (c, 0.1), koch)
