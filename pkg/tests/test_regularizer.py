import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from airreg import kernels
from airreg.errors import InvalidInputError
from airreg.regularizer import (
    RegConfig,
    group_activations,
    group_norm_value,
    label_activations,
    prox_all,
    prox_group,
    sample_groups,
)
from airreg.tensor import assemble_group_operator

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = st.integers(1, 16).flatmap(lambda d: arrays(np.float64, d, elements=finite))
alphas = st.floats(0, 1e3, allow_nan=False)


def test_group_norm_fixtures():
    assert group_norm_value([[3.0, 4.0]], 1.0) == 5.0
    assert group_norm_value([[3.0, 4.0], [0.0, 0.0]], [2.0, 1.0]) == 10.0


def test_prox_fixtures():
    np.testing.assert_allclose(prox_group([3.0, 4.0], 1.0), [2.4, 3.2], rtol=1e-15)
    assert np.all(prox_group([3.0, 4.0], 5.0) == 0)  # tie goes to zero
    np.testing.assert_array_equal(prox_group([3.0, 4.0], 0.0), [3.0, 4.0])
    with pytest.raises(InvalidInputError):
        prox_group([1.0], -1.0)


@settings(max_examples=300, deadline=None)
@given(vectors, alphas)
def test_prox_optimality(z, alpha):
    y = prox_group(z, alpha)
    r = z - y  # must be alpha times a subgradient of ||.|| at y
    ny = np.linalg.norm(y)
    scale = max(1.0, np.linalg.norm(z))
    if ny > 0:
        assert np.linalg.norm(r - alpha * y / ny) <= 1e-10 * scale
    else:
        assert np.linalg.norm(r) <= alpha + 1e-10 * scale


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 16).flatmap(
    lambda d: st.tuples(arrays(np.float64, d, elements=finite), arrays(np.float64, d, elements=finite))), alphas)
def test_prox_firmly_nonexpansive(pair, alpha):
    x, z = pair
    px, pz = prox_group(x, alpha), prox_group(z, alpha)
    d = px - pz
    assert d @ d <= d @ (x - z) + 1e-9 * max(1.0, (x - z) @ (x - z))


@settings(max_examples=100, deadline=None)
@given(vectors, st.floats(0.01, 100), st.floats(0, 10))
def test_prox_homogeneous(z, c, alpha):
    np.testing.assert_allclose(prox_group(c * z, c * alpha), c * prox_group(z, alpha), rtol=1e-12, atol=1e-12)


def test_prox_matches_numerical_minimizer(rng):
    pytest.importorskip("cvxpy")
    from oracles import ProxReference

    ref = ProxReference()
    for _ in range(60):
        d = int(rng.integers(1, 17))
        z = rng.normal(size=d) * rng.choice([0.1, 1.0, 10.0])
        alpha = rng.uniform(0, 2) * np.linalg.norm(z)
        assert np.abs(prox_group(z, alpha) - ref(z, alpha)).max() <= 1e-6


def test_prox_all_rows(backend, rng):
    Z = rng.normal(size=(500, 7))
    a = rng.uniform(0, 4, size=500)
    out = prox_all(Z, a, backend=backend)
    for k in range(0, 500, 37):
        np.testing.assert_allclose(out[k], prox_group(Z[k], a[k]), rtol=1e-14, atol=1e-15)


def test_prox_all_zero_alpha_is_identity(backend, rng):
    Z = rng.normal(size=(50, 3))
    np.testing.assert_array_equal(prox_all(Z, 0.0, backend=backend), Z)


def test_prox_all_threads(backend, rng):
    Z = rng.normal(size=(20000, 5))
    a = rng.uniform(0, 3, size=20000)
    assert np.array_equal(prox_all(Z, a, threads=1, backend=backend), prox_all(Z, a, threads=4, backend=backend))


@pytest.mark.skipif(len(kernels.available()) < 2, reason="compiled kernels not built")
def test_prox_backends_agree(rng):
    Z = rng.normal(size=(3000, 11))
    a = rng.uniform(0, 4, size=3000)
    outs = [prox_all(Z, a, backend=b) for b in kernels.available()]
    np.testing.assert_allclose(outs[0], outs[1], rtol=1e-14, atol=1e-15)


def test_sample_groups():
    g = sample_groups(1000, 0.1, seed=3)
    assert g.size == 100 and np.all(np.diff(g) > 0)
    assert np.array_equal(g, sample_groups(1000, 0.1, seed=3))
    assert sample_groups(5, 0.01, seed=0).size == 1
    assert np.array_equal(sample_groups(7, 1.0, seed=0), np.arange(7))
    with pytest.raises(InvalidInputError):
        sample_groups(10, 0.0, 0)


def test_reg_config_validation():
    with pytest.raises(InvalidInputError):
        RegConfig(lambda1=-1)
    with pytest.raises(InvalidInputError):
        RegConfig(lambda_g=0)
    with pytest.raises(InvalidInputError):
        RegConfig(lambda_g="median")
    with pytest.raises(InvalidInputError):
        RegConfig(subsample_fraction=1.5)
    with pytest.raises(InvalidInputError):
        RegConfig(group_subset=(99,)).active_groups(10)
    assert RegConfig().active_groups(10) is None
    assert RegConfig(subsample_fraction=0.5).active_groups(10).size == 5


def test_group_activations(backend):
    np.testing.assert_allclose(group_activations([[3.0, 4.0], [0.0, 0.0]], backend=backend), [5.0, 0.0])


def test_label_activations_with_subset():
    X = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 4.0]])
    op = assemble_group_operator(X, 2, groups=[0, 3, 4])
    v = op.forward(np.ones((2, 2)))
    act = label_activations(op, v, [0, 0, 0])
    assert act[0] == 1.0
    assert np.isnan(act[1])
    assert act[2] == 5.0


def test_subsample_weights_rescaled():
    cfg = RegConfig(lambda_g=0.05, subsample_fraction=0.1)
    active = cfg.active_groups(1000)
    assert cfg.group_weight(50, 1000, active) == pytest.approx(0.5)
    assert cfg.group_weight(50, 1000, None) == 0.05
    plain = RegConfig(subsample_fraction=0.1, rescale_subsample=False)
    assert plain.group_weight(50, 1000, active) == pytest.approx(0.2)
