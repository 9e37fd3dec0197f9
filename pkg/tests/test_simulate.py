import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from dynrdpg.network import density
from dynrdpg.simulate import (SimulationSpec, bspline_trajectories,
                              bspline_weights_basis, matern_cov,
                              mean_edge_probability, sample_bernoulli_rdpg,
                              sample_gp_trajectories, simulate,
                              solve_density_scale, to_latent)


def bessel_matern(h, a, b, nu):
    # direct evaluation with the modified Bessel function of the second kind
    s = math.sqrt(2 * nu) * h / b
    return a ** 2 / (math.gamma(nu) * 2 ** (nu - 1)) * s ** nu * special.kv(nu, s)


def test_matern_zero_lag():
    assert matern_cov(3.0, 3.0, 2.0, 1.5, 2.5) == pytest.approx(4.0)


@pytest.mark.parametrize('h', [0.1, 0.7, 1.0, 3.0, 10.0])
def test_matern_half_integer_closed_forms(h):
    a, b = 1.7, 2.3
    half = a ** 2 * math.exp(-h / b)
    assert abs(matern_cov(0, h, a, b, 0.5) - half) <= 1e-10
    assert abs(bessel_matern(h, a, b, 0.5) - half) <= 1e-10
    s = math.sqrt(3) * h / b
    three = a ** 2 * (1 + s) * math.exp(-s)
    assert abs(matern_cov(0, h, a, b, 1.5) - three) <= 1e-10
    assert abs(bessel_matern(h, a, b, 1.5) - three) <= 1e-10


def test_spec_defaults():
    s = SimulationSpec(n=10, m=12)
    assert s.a == pytest.approx(math.sqrt(5)) and s.b == pytest.approx(4.0)
    assert s.nu == 2.5
    bs = SimulationSpec(n=10, m=20, family='bspline')
    assert bs.q == 10 and bs.ell == 5 and bs.total_times == 25


def test_spec_errors():
    with pytest.raises(ValueError):
        SimulationSpec(n=10, m=5, family='other')
    with pytest.raises(ValueError):
        SimulationSpec(n=10, m=5, density=1.0)
    with pytest.raises(ValueError):
        SimulationSpec(n=10, m=5, nu=0)
    with pytest.raises(ValueError):
        SimulationSpec(n=10, m=5, family='bspline', q=10)


def test_gp_single_time_variance():
    spec = SimulationSpec(n=20000, m=1, d=1, a=1.5)
    raw = sample_gp_trajectories(spec, np.random.default_rng(0))
    N = raw.size
    assert abs(raw.var() - 2.25) <= 5 * 2.25 * math.sqrt(2 / N)


def test_gp_lag_one_covariance():
    spec = SimulationSpec(n=20000, m=4, d=1)
    raw = sample_gp_trajectories(spec, np.random.default_rng(1))[:, :, 0]
    x, y = raw[0], raw[1]
    s12 = matern_cov(1, 2, spec.a, spec.b, spec.nu)
    s11 = s22 = spec.a ** 2
    se = math.sqrt((s11 * s22 + s12 ** 2) / x.size)
    assert abs(np.mean(x * y) - s12) <= 5 * se


def test_to_latent_cases(rng):
    d = 3
    assert np.allclose(to_latent(np.zeros((2, 4, d)), 0.8),
                       0.8 / (2 * math.sqrt(d)))
    assert np.all(to_latent(rng.standard_normal((2, 4, d)), 0.0) == 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.integers(1, 4), st.integers(0, 2**31))
def test_to_latent_constraint(rho, d, seed):
    raw = 10 * np.random.default_rng(seed).standard_normal((3, 5, d))
    X = to_latent(raw, rho)
    assert np.all(X >= 0)
    assert np.all(np.linalg.norm(X, axis=-1) <= rho + 1e-12)


def test_density_scale_closed_form(rng):
    base = to_latent(rng.standard_normal((5, 30, 2)), 1.0)
    p1 = mean_edge_probability(base)
    for target in (0.01, 0.1, 0.5 * p1):
        rho = solve_density_scale(base, target)
        assert abs(rho - math.sqrt(target / p1)) <= 1e-6
        assert abs(mean_edge_probability(rho * base) - target) <= 1e-4
    assert solve_density_scale(base, 0.0) == 0.0
    assert solve_density_scale(base, p1) == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(ValueError, match='maximum'):
        solve_density_scale(base, min(p1 * 1.5, 0.999))


def test_mean_edge_probability_brute(rng):
    X = rng.random((3, 6, 2)) / 2
    iu = np.triu_indices(6, 1)
    brute = np.mean([X[t][i] @ X[t][j] for t in range(3) for i, j in zip(*iu)])
    assert mean_edge_probability(X) == pytest.approx(brute, rel=1e-12)


def test_bspline_basis():
    B = bspline_weights_basis(10)
    assert B.shape == (10, 5)
    assert np.allclose(B.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(B >= 0)
    W = np.full(5, 0.2)
    assert np.allclose(B @ W, 0.2, atol=1e-12)


def test_bspline_trajectories_affine_tail():
    spec = SimulationSpec(n=30, m=25, d=2, family='bspline', density=0.0)
    coords, redraws = bspline_trajectories(spec, np.random.default_rng(4))
    nb = spec.m - spec.q
    assert coords.shape == (30, 30, 2)
    assert np.all((coords >= 0) & (coords <= 1))
    tail = coords[nb - 2:]
    assert np.max(np.abs(np.diff(tail, n=2, axis=0))) <= 1e-12
    assert redraws >= 0


def test_bspline_equal_weights_constant():
    class Eq:  # generator whose Dirichlet draws are all equal
        def dirichlet(self, alpha, size):
            return np.full((size, alpha.size), 1 / alpha.size)
    spec = SimulationSpec(n=3, m=25, d=2, family='bspline', density=0.0)
    coords, redraws = bspline_trajectories(spec, Eq())
    assert redraws == 0
    assert np.allclose(coords, 0.2, atol=1e-12)


def test_bspline_density_target_unattainable():
    spec = SimulationSpec(n=20, m=25, family='bspline', density=0.2)
    with pytest.raises(ValueError, match='unattainable'):
        simulate(spec)


def test_bernoulli_extremes():
    rng = np.random.default_rng(0)
    empty = sample_bernoulli_rdpg(np.zeros((3, 5, 2)), rng)
    assert empty.n_edges == 0
    full = sample_bernoulli_rdpg(np.full((3, 5, 1), 1.0), rng)
    assert full.n_edges == 3 * 10
    with pytest.raises(ValueError):
        sample_bernoulli_rdpg(np.full((1, 3, 1), 1.1), rng)
    tiny = np.zeros((1, 3, 1))
    tiny[0, 0] = -1e-13
    tiny[0, 1] = 1.0
    assert sample_bernoulli_rdpg(tiny, rng).n_edges == 0


def test_bernoulli_density_replicates():
    rng = np.random.default_rng(8)
    X = to_latent(rng.standard_normal((4, 25, 2)), 0.7)
    p = mean_edge_probability(X)
    N = 4 * 25 * 24 // 2
    dens = [density(sample_bernoulli_rdpg(X, rng)) for _ in range(200)]
    iu = np.triu_indices(25, 1)
    P = np.einsum('tka,tka->tk', X[:, iu[0]], X[:, iu[1]])
    se = math.sqrt(np.sum(P * (1 - P))) / N / math.sqrt(200)
    assert abs(np.mean(dens) - p) <= 3 * se


def test_simulate_matern_and_determinism():
    spec = SimulationSpec(n=30, m=10, density=0.1, seed=3)
    net, X, info = simulate(spec)
    assert abs(info['mean_probability'] - 0.1) <= 1e-4
    assert np.all(X >= 0) and np.all(np.linalg.norm(X, axis=-1) <= 1)
    net2, X2, _ = simulate(spec)
    assert np.array_equal(X, X2)
    assert np.array_equal(net.edge_t, net2.edge_t)
    assert np.array_equal(net.edge_i, net2.edge_i)


def test_simulate_bspline_low_density():
    spec = SimulationSpec(n=40, m=25, family='bspline', density=0.03, seed=1)
    net, X, info = simulate(spec)
    assert X.shape == (30, 40, 2) and net.m == 30
    assert np.all(X >= 0) and np.all(np.linalg.norm(X, axis=-1) <= 1 + 1e-12)
    assert abs(info['mean_probability'] - 0.03) <= 1e-4
