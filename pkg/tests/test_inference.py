import numpy as np
import pytest
from scipy.stats import multivariate_normal

from hierdeconv.covariance import Grid, MaternConfig, build_nonstationary
from hierdeconv.forward import build_operator
from hierdeconv.hyperpriors import PriorConfig, field_logpdf, log_tau_logpdf
from hierdeconv.inference import (
    HyperParams,
    conditional_posterior,
    gaussian_marginal_loglik,
    gaussian_posterior,
    hyper_log_posterior,
    hyper_log_posterior_and_grad,
    marginal_loglik,
    marginal_loglik_and_grad,
)
from hierdeconv.optimizer import OptConfig, deconvolve, fit_map, gradient_check

from conftest import random_spd


def info_form(A, C, sigma, g):
    """Posterior via the precision matrix, by brute-force dense inversion."""
    cov = np.linalg.inv(np.linalg.inv(C) + A.T @ A / sigma**2)
    return cov @ (A.T @ g) / sigma**2, cov


def random_hp(rng, n):
    return HyperParams(rng.uniform(-2, 2, n), rng.uniform(-3, -0.5))


def test_scalar_marginal():
    one = np.ones((1, 1))
    assert gaussian_marginal_loglik([0.0], one, one, 1.0) == pytest.approx(-0.5 * np.log(4 * np.pi), abs=1e-14)
    assert gaussian_marginal_loglik([2.0], one, one, 1.0) == pytest.approx(-0.5 * np.log(4 * np.pi) - 1, abs=1e-14)


def test_marginal_matches_dense_mvn(rng):
    for _ in range(20):
        n = int(rng.integers(1, 5))
        A = rng.standard_normal((n, n))
        C = random_spd(rng, n)
        sigma = np.sqrt(rng.uniform(0.01, 1))
        g = rng.standard_normal(n)
        S = A @ C @ A.T + sigma**2 * np.eye(n)
        assert gaussian_marginal_loglik(g, A, C, sigma) == pytest.approx(
            multivariate_normal(np.zeros(n), S).logpdf(g), abs=1e-8
        )


def test_grid_marginal_uses_model_matrices(rng):
    grid = Grid.uniform(0, 5, 15)
    hp = random_hp(rng, 15)
    g = rng.standard_normal(15)
    A = build_operator(grid, hp.tau).matrix
    C = build_nonstationary(grid, hp.log_ell)
    assert marginal_loglik(g, hp, grid, 0.1) == gaussian_marginal_loglik(g, A, C, 0.1)


def test_scalar_posterior():
    one = np.ones((1, 1))
    mean, cov, _ = gaussian_posterior([2.0], one, one, 1.0)
    assert mean[0] == pytest.approx(1.0)
    assert cov[0, 0] == pytest.approx(0.5)


def test_posterior_matches_information_form(rng):
    for _ in range(20):
        n = int(rng.integers(1, 6))
        A = rng.standard_normal((n, n))
        C = random_spd(rng, n)
        sigma = np.sqrt(rng.uniform(0.01, 1))
        g = rng.standard_normal(n)
        mean, cov, _ = gaussian_posterior(g, A, C, sigma)
        m_ref, c_ref = info_form(A, C, sigma, g)
        np.testing.assert_allclose(mean, m_ref, rtol=1e-7, atol=1e-9)
        np.testing.assert_allclose(cov, c_ref, rtol=1e-7, atol=1e-9)


def test_huge_noise_returns_prior():
    grid = Grid.uniform(0, 5, 20)
    hp = HyperParams(np.zeros(20), np.log(0.3))
    g = np.linspace(-1, 1, 20)
    rec = conditional_posterior(g, hp, grid, 1e4)
    assert np.linalg.norm(rec.posterior_mean) <= 1e-6 * np.linalg.norm(g)
    np.testing.assert_allclose(rec.posterior_cov, build_nonstationary(grid, hp.log_ell), atol=1e-7)


def test_posterior_properties(rng):
    grid = Grid.uniform(0, 5, 30)
    for _ in range(5):
        hp = random_hp(rng, 30)
        g = rng.standard_normal(30)
        rec = conditional_posterior(g, hp, grid, 0.05)
        C = build_nonstationary(grid, hp.log_ell)
        assert np.array_equal(rec.posterior_cov, rec.posterior_cov.T)
        assert np.all(np.diag(rec.posterior_cov) <= np.diag(C) + 1e-8)
        flipped = conditional_posterior(-g, hp, grid, 0.05)
        np.testing.assert_allclose(flipped.posterior_mean, -rec.posterior_mean, rtol=1e-12, atol=1e-14)
        np.testing.assert_array_equal(flipped.posterior_cov, rec.posterior_cov)
        assert rec.tau_hat == pytest.approx(np.exp(hp.log_tau))


def test_flat_prior_is_marginal(rng):
    grid = Grid.uniform(0, 5, 12)
    hp = random_hp(rng, 12)
    g = rng.standard_normal(12)
    assert hyper_log_posterior(g, hp, None, grid, 0.1) == marginal_loglik(g, hp, grid, 0.1)


@pytest.mark.parametrize("kind", ["cauchy_diff", "tv_diff"])
def test_constant_field_preferred_under_equal_likelihood(kind, rng):
    grid = Grid.uniform(0, 5, 12)
    stub = lambda hp: -3.0
    prior = PriorConfig(kind, 0.5)
    flat = HyperParams(np.zeros(12), -1.0)
    jagged = HyperParams(rng.standard_normal(12), -1.0)
    assert hyper_log_posterior(None, flat, prior, grid, 0.1, loglik=stub) > hyper_log_posterior(
        None, jagged, prior, grid, 0.1, loglik=stub
    )


def test_alpha_changes_only_the_prior(rng):
    grid = Grid.uniform(0, 5, 12)
    hp = random_hp(rng, 12)
    g = rng.standard_normal(12)
    p1, p2 = PriorConfig("cauchy_diff", 0.3), PriorConfig("cauchy_diff", 3.0)
    d_obj = hyper_log_posterior(g, hp, p1, grid, 0.1) - hyper_log_posterior(g, hp, p2, grid, 0.1)
    d_prior = field_logpdf(hp.log_ell, p1) - field_logpdf(hp.log_ell, p2)
    assert d_obj == pytest.approx(d_prior, abs=1e-12)
    total = marginal_loglik(g, hp, grid, 0.1) + field_logpdf(hp.log_ell, p1) + log_tau_logpdf(hp.log_tau)
    assert hyper_log_posterior(g, hp, p1, grid, 0.1) == pytest.approx(total, abs=1e-12)


def test_outside_tau_box_is_rejected(rng):
    grid = Grid.uniform(0, 5, 8)
    hp = HyperParams(np.zeros(8), 0.3)
    assert hyper_log_posterior(rng.standard_normal(8), hp, PriorConfig(), grid, 0.1) == -np.inf


def test_overstated_noise_lowers_likelihood(rng):
    grid = Grid.uniform(0, 5, 40)
    hp = HyperParams(np.full(40, -1.0), np.log(0.25))
    C = build_nonstationary(grid, hp.log_ell)
    A = build_operator(grid, hp.tau).matrix
    for seed in range(3):
        r = np.random.default_rng(seed)
        f = np.linalg.cholesky(C + 1e-10 * np.eye(40)) @ r.standard_normal(40)
        g = A @ f + 1e-3 * r.standard_normal(40)
        assert marginal_loglik(g, hp, grid, 1e-3) > marginal_loglik(g, hp, grid, 1.0)


def test_marginal_gradient_matches_finite_differences():
    grid = Grid.uniform(0, 5, 10)
    for seed in range(5):
        r = np.random.default_rng(seed)
        g = r.standard_normal(10)
        point = np.append(r.uniform(-2, 2, 10), r.uniform(-3, -0.5))
        obj = lambda t: marginal_loglik(g, HyperParams.from_vector(t), grid, 0.2)
        grad = lambda t: marginal_loglik_and_grad(g, HyperParams.from_vector(t), grid, 0.2)[1]
        assert gradient_check(obj, grad, point, 1e-5) <= 1e-4


def test_posterior_gradient_includes_prior(rng):
    grid = Grid.uniform(0, 5, 10)
    g = rng.standard_normal(10)
    for kind in ("cauchy_diff", "tv_diff"):
        prior = PriorConfig(kind, 0.7, tv_smoothing_eps=1e-2)
        point = np.append(rng.uniform(-2, 2, 10), -1.2)
        obj = lambda t: hyper_log_posterior(g, HyperParams.from_vector(t), prior, grid, 0.2)
        grad = lambda t: hyper_log_posterior_and_grad(g, HyperParams.from_vector(t), prior, grid, 0.2)[1]
        assert gradient_check(obj, grad, point, 1e-5) <= 1e-4


def test_two_step_composition():
    grid = Grid.uniform(0, 5, 25)
    x = grid.points
    g = build_operator(grid, 0.3) @ np.where(x > 2.5, 1.0, 0.0) + 0.01 * np.sin(7 * x)
    prior = PriorConfig("cauchy_diff", 0.5)
    opt = OptConfig(gradient_mode="analytic", max_iterations=30)
    rec = deconvolve(g, grid, 0.01, prior, opt)
    hp, res = fit_map(g, grid, 0.01, prior, opt)
    ref = conditional_posterior(g, hp, grid, 0.01, MaternConfig(), alpha=0.5,
                                final_objective=res.final_objective, iterations=res.iterations)
    np.testing.assert_array_equal(rec.posterior_mean, ref.posterior_mean)
    np.testing.assert_array_equal(rec.posterior_cov, ref.posterior_cov)
    assert rec.tau_hat == ref.tau_hat
