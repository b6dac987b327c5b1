import numpy as np
import pytest

from hardylab import dyadic as dy
from hardylab import norms
from hardylab import operators as op
from hardylab.fields import Bump, Constant, DistancePower, Monomials, Sinusoid


@pytest.fixture(scope="module")
def setup(snowflake6):
    D = snowflake6
    W = dy.whitney(D.boundary, op.EXT_BOX, 7)
    return D, W, dy.PartitionOfUnity(W)


@pytest.fixture(scope="module")
def probe():
    return np.random.default_rng(4).uniform(-3.9, 3.9, (4000, 2))


def test_zero_extend(snowflake6, probe):
    f = Sinusoid((1.0, 2.0))
    z = op.zero_extend(f, snowflake6)(probe)
    inside = snowflake6.inside(probe)
    np.testing.assert_array_equal(z[inside], f(probe[inside]))
    assert np.all(z[~inside] == 0)


def test_boundary_extension_is_linear(setup, probe):
    D, W, P = setup
    S = D.boundary
    rng = np.random.default_rng(0)
    g1, g2 = rng.normal(size=len(S.points)), rng.normal(size=len(S.points))
    P2 = norms.SmoothnessParams(1.5, 2, 2)
    E = [op.ext_boundary(None, P2, S, W, P, trace_values=g) for g in (g1, g2, 2 * g1 - 3 * g2)]
    np.testing.assert_allclose(E[2](probe), 2 * E[0](probe) - 3 * E[1](probe), atol=1e-9)


def test_extension_sees_only_the_trace(setup, probe):
    D, W, P = setup
    params = norms.SmoothnessParams(0.6, 2, 2)
    f = Sinusoid((0.7, 0.4), 0.3)
    h = Monomials({(0, 0): 1.0}) * DistancePower(D.boundary, 1.0) * Bump((0, 0), 1.2, 1.8)
    a = op.ext_boundary(f, params, D.boundary, W, P)(probe)
    b = op.ext_boundary(f + h, params, D.boundary, W, P)(probe)
    np.testing.assert_array_equal(a, b)


def test_zero_trace_extension_is_zero_extension(setup, probe):
    D, W, P = setup
    params = norms.SmoothnessParams(0.6, 2, 2)
    f = DistancePower(D.boundary, 0.5) * Bump((0, 0), 1.2, 1.8)
    E = op.ext_domain(f, D, params, W, P)
    np.testing.assert_array_equal(E(probe), op.zero_extend(f, D)(probe))


@pytest.mark.parametrize("s, terms", [(0.6, {(0, 0): 0.7}), (1.2, {(0, 0): 0.3, (1, 0): -1.1, (0, 1): 0.4})])
def test_polynomials_are_reproduced(setup, probe, s, terms):
    D, W, P = setup
    f = Monomials(terms)
    E = op.ext_domain(f, D, norms.SmoothnessParams(s, 2, 2), W, P)
    np.testing.assert_allclose(E(probe), f(probe), atol=1e-9)


def test_missing_trace_is_an_error(snowflake6):
    with pytest.raises(op.TraceError):
        op.ext_boundary(lambda x: x[:, 0], norms.SmoothnessParams(0.6, 2, 2), snowflake6.boundary)


def test_check_zero_trace(snowflake6):
    S = snowflake6.boundary
    f = DistancePower(S, 0.4) * Bump((0, 0), 1.2, 1.8)
    assert len(op.check_zero_trace(f, S, samples=32, averages=True)) == 32
    with pytest.raises(op.TraceError) as err:
        op.check_zero_trace(Constant(1.0), S)
    assert len(err.value.points) > 0


def test_hardy_constant_guards(setup):
    D, W, _ = setup
    params = norms.SmoothnessParams(0.6, 2, 2)
    with pytest.raises(ValueError):
        op.hardy_constant({}, D.boundary, params, W)
    with pytest.raises(ValueError):
        op.hardy_constant({"one": Constant(1.0)}, D.boundary, params, W)
