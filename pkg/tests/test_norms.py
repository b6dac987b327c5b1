import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hardylab import dyadic as dy
from hardylab import geometry as g
from hardylab import norms
from hardylab.fields import Constant, HalfPlane, Monomials, Sinusoid


def test_discrete_hardy_examples():
    assert norms.discrete_hardy_check([1, 0, 0], 1.0, 2) == pytest.approx(1.0)
    assert norms.discrete_hardy_check([0, 0, 1], 1.0, 1) == pytest.approx(7 / 4)
    a = 2.0 ** -np.arange(60)
    # tails are 2 a_j, so the ratio is 2^p
    assert norms.discrete_hardy_check(a, 1.0, 2) == pytest.approx(4.0, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=30).filter(lambda v: any(x > 0 for x in v)),
       st.floats(0.2, 3.0), st.floats(1.0, 4.0))
def test_discrete_hardy_bounded(a, sigma, p):
    ratio = norms.discrete_hardy_check(a, sigma, p)
    assert 1.0 - 1e-9 <= ratio <= norms.hardy_sum_bound(sigma, p) * (1 + 1e-9)


def test_discrete_hardy_batched_and_long(rng):
    A = rng.exponential(size=(20, 400))
    batched = norms.discrete_hardy_ratios(A, 2.0, 1.5)
    single = [norms.discrete_hardy_check(a, 2.0, 1.5) for a in A]
    np.testing.assert_allclose(batched, single, rtol=1e-12)
    assert np.all(np.isfinite(batched))


def test_discrete_hardy_errors():
    with pytest.raises(ZeroDivisionError):
        norms.discrete_hardy_check([0, 0], 1.0, 2)
    with pytest.raises(ValueError):
        norms.discrete_hardy_check([1, -1], 1.0, 2)


def test_reverse_holder_single_cube():
    assert norms.reverse_holder_check([3], [1], [2], [5.0], 2, 3) == pytest.approx(1.0)


def test_reverse_holder_matches_grid(rng):
    lv = rng.integers(0, 6, 40)
    ix = np.array([rng.integers(0, 2**j) for j in lv])
    iy = np.array([rng.integers(0, 2**j) for j in lv])
    # one coefficient per cube
    _, first = np.unique(np.stack([lv, ix, iy], 1), axis=0, return_index=True)
    lv, ix, iy = lv[first], ix[first], iy[first]
    a = rng.uniform(0.1, 3.0, len(lv))
    for p, q in ((2, 2), (3, 1.5), (1.5, 4)):
        exact = norms.reverse_holder_check(lv, ix, iy, a, p, q)
        grid = norms.reverse_holder_grid(lv, ix, iy, a, p, q, (0, 1, 0, 1), n=512)
        assert exact == pytest.approx(grid, rel=1e-10)


def test_reverse_holder_merges_repeated_cubes():
    args = ([2, 2, 1], [1, 1, 0], [0, 0, 0], [1.0, 2.0, 0.5])
    merged = ([2, 1], [1, 0], [0, 0], [3.0, 0.5])
    a = norms.reverse_holder_check(*args, 2, 3)
    assert a == pytest.approx(norms.reverse_holder_check(*merged, 2, 3))
    assert a == pytest.approx(norms.reverse_holder_grid(*args, 2, 3, (0, 1, 0, 1), n=64), rel=1e-12)


def test_reverse_holder_family_guard():
    fam = (np.array([1]), np.array([0]), np.array([0]))
    with pytest.raises(ValueError):
        norms.reverse_holder_check([1], [1], [1], [1.0], 2, 2, family=fam)


def _gagliardo_linear_oracle():
    # f(x) = x_1 on the unit square, s = 1/2, p = 2, after the change u = x - y
    val, _ = integrate.dblquad(lambda b, a: (1 - a) * (1 - b) * a * a / (a * a + b * b) ** 1.5,
                               0, 1, 0, 1, epsabs=1e-11, epsrel=1e-11)
    return 4 * val


def test_gagliardo_against_exact_integral():
    exact = _gagliardo_linear_oracle()
    v = norms.gagliardo_seminorm(Monomials({(1, 0): 1.0}), 0.5, 2, (0, 1, 0, 1))
    assert v.value**2 <= exact * (1 + 1e-3)
    assert v.value**2 + v.shell_bound == pytest.approx(exact, rel=1e-3)


def test_gagliardo_preconditions():
    with pytest.raises(ValueError):
        norms.gagliardo_seminorm(Monomials({(1, 0): 1.0}), 1.0, 2, (0, 1, 0, 1))
    with pytest.raises(ValueError):
        norms.gagliardo_seminorm(HalfPlane(), 0.5, 2, (0, 1, 0, 1))


def test_tl_norm_basic_properties():
    P = norms.SmoothnessParams(0.6, 2, 2)
    grid = norms.XGrid((-1, 1, -1, 1), 8, 2)
    f = Sinusoid((0.8, 0.3))
    h = Monomials({(2, 0): 1.0, (0, 1): -0.5})
    nf = norms.tl_norm(f, P, grid, 4)
    assert norms.tl_norm(lambda x: -3 * f(x), P, grid, 4).total == pytest.approx(3 * nf.total, rel=1e-12)
    both = norms.tl_norm(lambda x: f(x) + h(x), P, grid, 4).total
    assert both <= nf.total + norms.tl_norm(h, P, grid, 4).total + 1e-12
    c = norms.tl_norm(Constant(2.0), P, grid, 4)
    assert c.seminorm_part <= 1e-12 and c.lp_part == pytest.approx(4.0)
    assert nf.meta["dyadic_factor"] == pytest.approx(2 ** (0.6 + 1))


def test_smoothness_params():
    P = norms.SmoothnessParams(1.3, 3, 1)
    assert P.k == 2 and P.u == 1.0
    assert norms.SmoothnessParams(0.5, 2, 2).u == 2
    for bad in ((0, 2, 2), (0.5, 1, 2), (0.5, 2, 0.5)):
        with pytest.raises(ValueError):
            norms.SmoothnessParams(*bad)


def test_sharp_maximal_vanishes_on_polynomials():
    P = norms.SmoothnessParams(1.5, 2, 2)
    vals, meta = norms.sharp_maximal(Monomials({(1, 0): 2.0, (0, 1): 1.0}), P, [[0.1, 0.2]], j_max=5)
    assert vals[0] <= 1e-10 and meta["radii"] == 6


def test_trace_of_half_plane_indicator():
    r = norms.trace(HalfPlane(0.0), (0.3, 0.0), 2.0 ** -np.arange(2, 8))
    assert r.converged and r.value == pytest.approx(0.5, abs=1e-12)


def test_trace_extrapolates_continuous_field():
    f = Monomials({(0, 2): 1.0, (0, 0): 0.25})
    r = norms.trace(f, (0.0, 0.0), 2.0 ** -np.arange(1, 7))
    assert r.converged and r.value == pytest.approx(0.25, abs=1e-6)
    with pytest.raises(ValueError):
        norms.trace(f, (0.0, 0.0), [0.5, 0.25])


def test_hardy_lhs_around_a_point():
    # integral of |x|_inf^{-1} over the square minus the fringe square [-a, a]^2
    S = g.build_point_set([[0.0, 0.0]])
    W = dy.whitney(S, (-1, 1, -1, 1), 8)
    a = float(np.max(np.abs(W.fringe_centers))) + W.fringe_half_side
    h = norms.hardy_lhs(Constant(1.0), S, 0.5, 2, W, order=6)
    assert h.value**2 == pytest.approx(8 * (1 - a), rel=2e-3)
    assert h.per_level_total == pytest.approx(h.value**2)


def test_fit_power_law():
    x = 2.0 ** -np.arange(6)
    slope, icept, res = norms.fit_power_law(x, 3 * x**1.7)
    assert slope == pytest.approx(1.7) and 2**icept == pytest.approx(3) and res < 1e-12


@pytest.fixture(scope="module")
def koch8():
    return g.build_koch_family(math.pi / 3, 8)


def test_cluster_tree_matches_direct_sum(koch8):
    rng = np.random.default_rng(3)
    y = koch8.points[rng.integers(0, len(koch8.points), 40)] + rng.normal(0, 0.01, (40, 2))
    tree = norms.ClusterTree(koch8)
    t = 0.1
    direct, _ = koch8.tree.riesz_sum(y, t, 1.2, koch8.weights)
    approx = tree.sum(y, t, 1.2, theta=0.25)
    np.testing.assert_allclose(approx, direct, rtol=2e-2)


def test_riesz_energy_methods_agree(koch8):
    x = koch8.points[len(koch8.points) // 2]
    t = [2.0**-3, 2.0**-4]
    a = norms.riesz_energy(x, t, 0.9, 2.0, koch8, rel_depth=4, method="tree", theta=0.25)
    b = norms.riesz_energy(x, t, 0.9, 2.0, koch8, rel_depth=4, method="direct")
    np.testing.assert_allclose(a.values, b.values, rtol=2e-2)
    with pytest.raises(ValueError):
        norms.riesz_energy(x, t, 0.1, 2.0, koch8)
