import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dynrdpg.prior import (RwPriorSpec, difference_matrix, log_prior_density,
                           prior_precision_blocks)


def test_difference_examples():
    assert np.array_equal(difference_matrix(1, 3), [[-1, 1, 0], [0, -1, 1]])
    assert np.allclose(difference_matrix(1, 5) @ np.full(5, 3.0), 0)
    assert np.allclose(difference_matrix(2, 4) @ np.arange(1.0, 5.0), 0)
    assert np.array_equal(difference_matrix(2, 4)[0], [1, -2, 1, 0])
    with pytest.raises(ValueError):
        difference_matrix(3, 3)


def test_spec_validation():
    with pytest.raises(ValueError, match='r'):
        RwPriorSpec(r=3, d=1, m=5)
    with pytest.raises(ValueError):
        RwPriorSpec(r=2, d=1, m=2)
    with pytest.raises(ValueError):
        RwPriorSpec(r=1, d=1, m=3, sigma0=0)


def test_block_examples():
    K1, K2 = prior_precision_blocks(RwPriorSpec(r=1, d=1, m=3))
    assert np.array_equal(K1.to_dense(), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    _, K2 = prior_precision_blocks(RwPriorSpec(r=1, d=2, m=2, sigma0=1))
    assert np.array_equal(K2.to_dense(), np.diag([1, 1, 0, 0]))
    K1, K2 = prior_precision_blocks(RwPriorSpec(r=2, d=3, m=5))
    assert K1.bandwidth == 6 and K2.bandwidth == 0


@pytest.mark.parametrize('r, d, m, s0', [(1, 1, 4, 1.0), (1, 2, 5, 0.5),
                                          (2, 2, 6, 2.0), (2, 3, 3, 1.0)])
def test_blocks_match_kronecker(r, d, m, s0):
    K1, K2 = prior_precision_blocks(RwPriorSpec(r=r, d=d, m=m, sigma0=s0))
    D = difference_matrix(r, m)
    assert np.allclose(K1.to_dense(), np.kron(D.T @ D, np.eye(d)), atol=0)
    E = np.zeros((m, m))
    E[:r, :r] = np.eye(r)
    assert np.allclose(K2.to_dense(), np.kron(E, np.eye(d)) / s0 ** 2)


@pytest.mark.parametrize('r', [1, 2])
def test_kernel_invariance(rng, r):
    m, d = 7, 2
    K1, _ = prior_precision_blocks(RwPriorSpec(r=r, d=d, m=m))
    K = K1.to_dense()
    x = rng.standard_normal(m * d)
    t = np.arange(m)
    # constant for r=1, constant plus linear trend for r=2
    trend = (rng.standard_normal(d)[None, :]
             + (r == 2) * np.outer(t, rng.standard_normal(d))).ravel()
    assert np.isclose((x + trend) @ K @ (x + trend), x @ K @ x, rtol=1e-10)


def test_zero_trajectory_is_normalizer_only():
    spec = RwPriorSpec(r=1, d=2, m=4)
    sig = np.array([0.5, 2.0])
    val = log_prior_density(np.zeros((4, 2, 2)), sig, spec)
    norm = sum(-0.5 * 2 * np.log(2 * np.pi)
               - 0.5 * 3 * 2 * np.log(2 * np.pi * s ** 2) for s in sig)
    assert val == pytest.approx(norm, abs=1e-12)


def test_hand_example():
    spec = RwPriorSpec(r=1, d=1, m=2, sigma0=1.0)
    X = np.array([0.0, 1.0]).reshape(2, 1, 1)
    expect = 2 * (-0.5 * np.log(2 * np.pi)) - 0.5
    assert log_prior_density(X, np.array([1.0]), spec) == pytest.approx(expect, abs=1e-12)


def _product_oracle(X, sigmas, spec):
    """Initial Gaussians times the chain of conditional Gaussians."""
    m, n, d = X.shape
    r = spec.r
    total = 0.0
    for i in range(n):
        x = X[:, i]
        total += stats.norm.logpdf(x[:r], scale=spec.sigma0).sum()
        for t in range(r, m):
            mean = x[t - 1] if r == 1 else 2 * x[t - 1] - x[t - 2]
            total += stats.norm.logpdf(x[t], loc=mean, scale=sigmas[i]).sum()
    return total


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2), st.integers(1, 3), st.integers(3, 6),
       st.integers(1, 4), st.floats(0.2, 3.0), st.integers(0, 2**31))
def test_quadratic_form_equals_product(r, d, m, n, s0, seed):
    rng = np.random.default_rng(seed)
    spec = RwPriorSpec(r=r, d=d, m=m, sigma0=s0)
    X = rng.standard_normal((m, n, d))
    sig = rng.uniform(0.2, 3.0, size=n)
    assert log_prior_density(X, sig, spec) == pytest.approx(
        _product_oracle(X, sig, spec), abs=1e-10, rel=1e-12)
    c = 1.7
    assert log_prior_density(X, c * sig, spec) == pytest.approx(
        _product_oracle(X, c * sig, spec), abs=1e-10, rel=1e-12)


def test_nonpositive_sigma_raises():
    with pytest.raises(ValueError):
        log_prior_density(np.zeros((3, 1, 1)), np.array([0.0]),
                          RwPriorSpec(r=1, d=1, m=3))
