"""Marginal likelihood of the hyperparameters and the Gaussian signal posterior."""
from dataclasses import dataclass

import numpy as np

from . import hyperpriors
from .covariance import LOG_ELL_CAP, MaternConfig, build_nonstationary, nonstationary_row_derivative
from .errors import DimensionMismatch
from .forward import build_operator, operator_log_tau_derivative
from .numerics import cholesky_with_jitter, log_det, solve_spd

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class HyperParams:
    """Optimisation state: log length-scale field and log kernel width."""

    log_ell: np.ndarray
    log_tau: float

    def __post_init__(self):
        object.__setattr__(self, "log_ell", np.asarray(self.log_ell, dtype=float))
        object.__setattr__(self, "log_tau", float(self.log_tau))

    @property
    def tau(self):
        return float(np.exp(self.log_tau))

    def to_vector(self):
        return np.append(self.log_ell, self.log_tau)

    @classmethod
    def from_vector(cls, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(log_ell=theta[:-1].copy(), log_tau=theta[-1])

    def within_box(self, log_ell_box=(-LOG_ELL_CAP, LOG_ELL_CAP), log_tau_box=(-5.0, 0.0)):
        return bool(
            np.all(self.log_ell >= log_ell_box[0])
            and np.all(self.log_ell <= log_ell_box[1])
            and log_tau_box[0] <= self.log_tau <= log_tau_box[1]
        )


@dataclass
class Reconstruction:
    posterior_mean: np.ndarray
    posterior_cov: np.ndarray
    tau_hat: float
    alpha_used: float
    final_objective: float
    iterations: int
    jitter_used: float
    log_ell: np.ndarray = None

    @property
    def var_diag(self):
        return np.clip(np.diag(self.posterior_cov), 0.0, None)

    @property
    def sd(self):
        return np.sqrt(self.var_diag)


def _check(g, A, C):
    g = np.asarray(g, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    m, n = A.shape
    if g.shape != (m,) or C.shape != (n, n):
        raise DimensionMismatch(f"g {g.shape}, A {A.shape}, C {C.shape} are inconsistent")
    return g, A, C


def data_covariance(A, C, sigma):
    S = A @ C @ A.T
    S[np.diag_indices_from(S)] += sigma**2
    return S


def gaussian_marginal_loglik(g, A, C, sigma):
    """``log N(g; 0, A C A^T + sigma^2 I)`` from explicit matrices."""
    g, A, C = _check(g, A, C)
    F = cholesky_with_jitter(data_covariance(A, C, sigma))
    a = solve_spd(F, g)
    return -0.5 * (g.size * LOG_2PI + log_det(F) + float(g @ a))


def gaussian_posterior(g, A, C, sigma):
    """Posterior mean and covariance of ``f`` given ``g = A f + e``.

    Returns ``(mean, cov, factor)`` where ``factor`` is the Cholesky factor
    of the data covariance.
    """
    g, A, C = _check(g, A, C)
    F = cholesky_with_jitter(data_covariance(A, C, sigma))
    AC = A @ C
    mean = AC.T @ solve_spd(F, g)
    cov = C - AC.T @ solve_spd(F, AC)
    cov = 0.5 * (cov + cov.T)
    return mean, cov, F


def marginal_loglik(g, hp, grid, sigma, cfg=MaternConfig(), normalize=True):
    """Log marginal likelihood of the data with the signal integrated out."""
    A = build_operator(grid, hp.tau, normalize).matrix
    C = build_nonstationary(grid, hp.log_ell, cfg)
    return gaussian_marginal_loglik(g, A, C, sigma)


def marginal_loglik_and_grad(g, hp, grid, sigma, cfg=MaternConfig(), normalize=True):
    """Value and gradient of ``marginal_loglik`` w.r.t. ``(log_ell, log_tau)``.

    Uses ``dL = 0.5 * [a^T dS a - tr(S^-1 dS)]`` with ``a = S^-1 g``.
    """
    g = np.asarray(g, dtype=float)
    op = build_operator(grid, hp.tau, normalize)
    A = op.matrix
    C = build_nonstationary(grid, hp.log_ell, cfg)
    F = cholesky_with_jitter(data_covariance(A, C, sigma))
    a = solve_spd(F, g)
    value = -0.5 * (g.size * LOG_2PI + log_det(F) + float(g @ a))

    S_inv = F.inverse()
    beta = A.T @ a
    Q = np.outer(beta, beta) - A.T @ S_inv @ A
    D = nonstationary_row_derivative(grid, hp.log_ell, cfg)
    grad_ell = np.sum(Q * D, axis=1)

    dA = operator_log_tau_derivative(op)
    P = S_inv @ A @ C
    grad_tau = float(a @ (dA @ (C @ beta))) - float(np.sum(P * dA))
    return value, np.append(grad_ell, grad_tau)


def hyper_log_posterior(g, hp, prior, grid, sigma, cfg=MaternConfig(), eps=None, loglik=None):
    """Unnormalised log-posterior of the hyperparameters.

    Parameters
    ----------
    prior : PriorConfig or None
        ``None`` drops both prior terms.
    eps : float, optional
        Overrides the TV smoothing (0 gives the exact Laplace density).
    loglik : callable, optional
        Replaces ``marginal_loglik``; called as ``loglik(hp)``.
    """
    ll = loglik(hp) if loglik is not None else marginal_loglik(g, hp, grid, sigma, cfg)
    if prior is None:
        return ll
    return (
        ll
        + hyperpriors.field_logpdf(hp.log_ell, prior, eps)
        + hyperpriors.log_tau_logpdf(hp.log_tau, prior.log_tau_bounds)
    )


def hyper_log_posterior_and_grad(g, hp, prior, grid, sigma, cfg=MaternConfig()):
    value, grad = marginal_loglik_and_grad(g, hp, grid, sigma, cfg)
    if prior is None:
        return value, grad
    value += hyperpriors.field_logpdf(hp.log_ell, prior)
    value += hyperpriors.log_tau_logpdf(hp.log_tau, prior.log_tau_bounds)
    grad[:-1] += hyperpriors.field_grad(hp.log_ell, prior)
    return value, grad


def conditional_posterior(
    g, hp_map, grid, sigma, cfg=MaternConfig(), *, alpha=float("nan"),
    final_objective=float("nan"), iterations=0,
):
    """Closed-form Gaussian posterior of the signal at fixed hyperparameters."""
    A = build_operator(grid, hp_map.tau, True).matrix
    C = build_nonstationary(grid, hp_map.log_ell, cfg)
    mean, cov, F = gaussian_posterior(g, A, C, sigma)
    return Reconstruction(
        posterior_mean=mean,
        posterior_cov=cov,
        tau_hat=hp_map.tau,
        alpha_used=float(alpha),
        final_objective=float(final_objective),
        iterations=int(iterations),
        jitter_used=F.jitter_used,
        log_ell=hp_map.log_ell.copy(),
    )
