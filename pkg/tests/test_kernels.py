import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpb import kernels as K
from gpb.kernels import (
    Matern,
    PoweredExponential,
    RadialPolynomial,
    SquaredExponential,
    Sum,
    gram,
    kernel_from_dict,
    scale_variance,
)

E = np.exp(1.0)


def all_kernels(d):
    base = [
        SquaredExponential(1.0, d),
        SquaredExponential(0.3, d),
        Matern(0.5, 0.7, d),
        Matern(1.5, 1.0, d),
        Matern(2.5, 0.5, d),
        PoweredExponential(2.0, (1.0,) * d, (1.5,) * d),
        scale_variance(SquaredExponential(1.0, d), RadialPolynomial((1.0, 1.0)), 1.0, 1.0 + d),
    ]
    return base + [Sum(base[0], base[2])]


def test_se_values():
    k = SquaredExponential()
    assert k(0.0, 0.0) == 1.0
    assert k(0.0, 1.0) == pytest.approx(np.exp(-1.0), abs=1e-15)
    assert (k + k)(0.0, 0.0) == 2.0


def test_se_lengthscale_convention():
    k = SquaredExponential(lengthscale=2.0)
    assert k(0.0, 2.0) == pytest.approx(np.exp(-1.0), rel=1e-15)


def test_gram_examples():
    k = SquaredExponential()
    np.testing.assert_array_equal(gram(k, [0.0]), [[1.0]])
    np.testing.assert_allclose(gram(k, [0.0, 1.0]), [[1, 1 / E], [1 / E, 1]], rtol=1e-15)
    np.testing.assert_allclose(gram(k, [0.0], [0.0, 1.0, 2.0]), [[1, 1 / E, E**-4]], rtol=1e-15)


def test_gram_empty_inputs():
    k = SquaredExponential(1.0, 2)
    assert gram(k, np.zeros((0, 2)), np.zeros((3, 2))).shape == (0, 3)
    assert gram(k, [], np.zeros((3, 2))).shape == (0, 3)


@pytest.mark.parametrize("d", [1, 2])
def test_dimension_mismatch(d):
    k = SquaredExponential(1.0, d)
    with pytest.raises(ValueError, match="dimension mismatch"):
        k.gram(np.zeros((3, d + 1)))
    with pytest.raises(ValueError, match="dimension mismatch"):
        k(np.zeros((1, d + 1)), np.zeros((1, d + 1)))


def test_scale_variance_examples(rng):
    base = SquaredExponential()
    one = scale_variance(base, lambda X: np.ones(len(X)), 1.0, 1.0)
    S, T = rng.uniform(-1, 1, 20), rng.uniform(-1, 1, 20)
    for s, t in zip(S, T):
        assert one(s, t) == base(s, t)
    two = scale_variance(base, lambda X: np.full(len(X), 2.0), 2.0, 2.0)
    assert two(0.0, 0.0) == 4.0
    quad = scale_variance(base, RadialPolynomial((1.0, 1.0)), 1.0, 2.0)
    assert quad(0.0, 1.0) == pytest.approx(2.0 * np.exp(-1.0), rel=1e-15)
    assert quad(0.0, 1.0) == pytest.approx(0.7357589, abs=1e-7)
    assert quad.bounds_hold(np.linspace(-1, 1, 41))
    assert not quad.bounds_hold([1.5])


@pytest.mark.parametrize("lower,upper", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (2.0, 1.0)])
def test_scale_variance_bad_bounds(lower, upper):
    with pytest.raises(ValueError):
        scale_variance(SquaredExponential(), RadialPolynomial(), lower, upper)


@pytest.mark.parametrize(
    "make",
    [
        lambda: SquaredExponential(0.0),
        lambda: SquaredExponential(-1.0),
        lambda: Matern(nu=1.0),
        lambda: PoweredExponential(1.0, (1.0,), (2.5,)),
        lambda: PoweredExponential(1.0, (1.0, 1.0), (2.0,)),
        lambda: Sum(SquaredExponential(1.0, 1), SquaredExponential(1.0, 2)),
    ],
)
def test_invalid_parameters(make):
    with pytest.raises(ValueError):
        make()


@pytest.mark.parametrize("d", [1, 2])
def test_symmetry(d, rng):
    for k in all_kernels(d):
        S, T = rng.uniform(-1, 1, (100, d)), rng.uniform(-1, 1, (100, d))
        for s, t in zip(S, T):
            assert abs(k(s, t) - k(t, s)) <= 1e-15


@pytest.mark.parametrize("d", [1, 2])
def test_gram_psd(d, rng):
    P = rng.uniform(-1, 1, (50, d))
    for k in all_kernels(d):
        G = k.gram(P)
        np.testing.assert_array_equal(G, G.T)
        assert np.linalg.eigvalsh(G).min() >= -1e-8, k


@pytest.mark.parametrize("d", [1, 2])
def test_diag_matches_gram(d, rng):
    P = rng.uniform(-1, 1, (7, d))
    for k in all_kernels(d):
        np.testing.assert_allclose(k.diag(P), np.diag(k.gram(P)), rtol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_se_holder_bound(s, t):
    k = SquaredExponential()
    dist2 = k(s, s) - 2 * k(s, t) + k(t, t)
    assert dist2 <= 2 * (s - t) ** 2 + 1e-15


def test_holder_metadata():
    assert SquaredExponential().holder_exponent == 2.0
    assert Matern(0.5).holder_exponent == 1.0
    assert PoweredExponential(1.0, (1.0, 1.0), (0.5, 1.5)).holder_exponent == 0.5


@pytest.mark.parametrize("d", [1, 2])
def test_json_round_trip(d, rng):
    P = rng.uniform(-1, 1, (5, d))
    for k in all_kernels(d):
        spec = json.loads(json.dumps(k.to_dict()))
        k2 = kernel_from_dict(spec)
        np.testing.assert_array_equal(k2.gram(P), k.gram(P))


def test_callable_sigma_not_serializable():
    k = scale_variance(SquaredExponential(), lambda X: np.ones(len(X)), 1.0, 1.0)
    with pytest.raises(TypeError):
        k.to_dict()


def test_unknown_family():
    with pytest.raises(ValueError):
        kernel_from_dict({"family": "rational_quadratic", "params": {}})
    with pytest.raises(ValueError):
        kernel_from_dict(["not", "a", "dict"])


def test_module_wrappers():
    k = SquaredExponential()
    assert K.eval_kernel(k, 0.0, 1.0) == k(0.0, 1.0)
