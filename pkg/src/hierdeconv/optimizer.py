"""Projected limited-memory BFGS ascent and the hyperparameter MAP fit."""
import logging
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .covariance import LOG_ELL_CAP, MaternConfig
from .errors import NonFiniteObjective
from .hyperpriors import log_tau_logpdf
from .inference import (
    HyperParams,
    conditional_posterior,
    hyper_log_posterior,
    hyper_log_posterior_and_grad,
    marginal_loglik,
    marginal_loglik_and_grad,
)

log = logging.getLogger(__name__)

GRADIENT_MODES = ("finite_difference", "analytic")


# Defaults follow R's optim(method = "L-BFGS-B"): maxit 100, lmm 5,
# ndeps 1e-3, factr 1e7 (relative reduction 1e7 * machine epsilon).
@dataclass(frozen=True)
class OptConfig:
    max_iterations: int = 100
    gradient_mode: str = "finite_difference"
    fd_step: float = 1e-3
    convergence_tol: float = 1e7 * np.finfo(float).eps
    memory: int = 5
    box_log_ell: tuple = (-LOG_ELL_CAP, LOG_ELL_CAP)
    box_log_tau: tuple = (-5.0, 0.0)
    init_log_ell: float = 0.0
    init_log_tau: float = -1.5
    restarts: int = 0
    restart_scale: float = 0.5
    gradient_check_tol: float = 1e-2
    gradient_check_step: float = 1e-4

    def __post_init__(self):
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        for lo, hi in (self.box_log_ell, self.box_log_tau):
            if not lo < hi:
                raise ValueError("box bounds must be ordered")
        object.__setattr__(self, "box_log_ell", tuple(float(b) for b in self.box_log_ell))
        object.__setattr__(self, "box_log_tau", tuple(float(b) for b in self.box_log_tau))


@dataclass
class OptResult:
    x: np.ndarray
    final_objective: float
    iterations: int
    converged: bool
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    n_evaluations: int = 0


def fd_gradient(objective, x, step, lower=None, upper=None):
    """Central differences, one-sided where a probe would leave the box."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    f0 = None
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        hp = hm = step
        if upper is not None and x[k] + step > upper[k]:
            hp = 0.0
        if lower is not None and x[k] - step < lower[k]:
            hm = 0.0
        if hp == 0.0 and hm == 0.0:
            grad[k] = 0.0
            continue
        xp[k] += hp
        xm[k] -= hm
        if hp == 0.0 or hm == 0.0:
            if f0 is None:
                f0 = objective(x)
            fp = objective(xp) if hp else f0
            fm = objective(xm) if hm else f0
        else:
            fp, fm = objective(xp), objective(xm)
        grad[k] = (fp - fm) / (hp + hm)
    return grad


def gradient_check(objective, gradient, point, fd_step=1e-5):
    """Largest componentwise relative gap between ``gradient`` and central differences.

    Components are compared relative to ``max(|analytic|, |fd|)`` floored at
    ``1e-6 * max|fd|`` so near-zero entries do not dominate.
    """
    point = np.asarray(point, dtype=float)
    ga = np.asarray(gradient(point), dtype=float)
    gf = fd_gradient(objective, point, fd_step)
    floor = max(1e-6 * np.max(np.abs(gf)), 1e-12)
    denom = np.maximum(np.maximum(np.abs(ga), np.abs(gf)), floor)
    return float(np.max(np.abs(ga - gf) / denom))


def _two_loop(grad, s_hist, y_hist):
    q = grad.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def _minimize(fg, x0, lower, upper, cfg):
    """Projected L-BFGS on ``F`` where ``fg(x) -> (F, grad F)``."""
    proj = lambda z: np.clip(z, lower, upper)
    x = proj(np.asarray(x0, dtype=float))
    F, G = fg(x)
    nfev = 1
    if not np.isfinite(F) or not np.all(np.isfinite(G)):
        raise NonFiniteObjective("objective is not finite at the initial point")
    s_hist = deque(maxlen=cfg.memory)
    y_hist = deque(maxlen=cfg.memory)
    trace = [F]
    converged = False
    it = 0
    while it < cfg.max_iterations:
        pg = x - proj(x - G)
        if np.max(np.abs(pg)) <= 1e-10 * max(1.0, abs(F)):
            converged = True
            break
        # variables pinned at a bound whose gradient pushes them outward
        pinned = ((x <= lower) & (G > 0)) | ((x >= upper) & (G < 0))
        Gf = np.where(pinned, 0.0, G)
        d = -_two_loop(Gf, list(s_hist), list(y_hist))
        d[pinned] = 0.0
        if not Gf @ d < 0:
            s_hist.clear()
            y_hist.clear()
            d = -Gf
        t = 1.0 if s_hist else min(1.0, 1.0 / max(np.max(np.abs(d)), 1e-12))
        accepted = False
        for _ in range(60):
            x_new = proj(x + t * d)
            step = x_new - x
            if not np.any(step):
                break
            F_new, G_new = fg(x_new)
            nfev += 1
            if np.isfinite(F_new) and np.all(np.isfinite(G_new)) and F_new <= F + 1e-4 * (G @ step):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if s_hist:
                s_hist.clear()
                y_hist.clear()
                continue
            if not np.isfinite(F):
                raise NonFiniteObjective("could not recover a finite objective by step halving")
            converged = True
            break
        it += 1
        y = G_new - G
        sy = step @ y
        if sy > 1e-10 * np.sqrt((step @ step) * (y @ y)):
            s_hist.append(step)
            y_hist.append(y)
        change = abs(F - F_new) / max(abs(F), abs(F_new), 1.0)
        x, F, G = x_new, F_new, G_new
        trace.append(F)
        if change < cfg.convergence_tol:
            converged = True
            break
    return x, F, it, converged, np.array(trace), nfev


def maximize(objective, x0, lower, upper, cfg=OptConfig(), seed=0, gradient=None):
    """Maximise ``objective`` over the box ``[lower, upper]``.

    Parameters
    ----------
    objective : callable
        ``objective(x) -> float``.
    gradient : callable, optional
        Analytic gradient, used when ``cfg.gradient_mode == "analytic"``. It
        is checked against central differences at the starting point and
        replaced by finite differences if the check fails. May also be a
        callable returning ``(value, gradient)`` if it has attribute
        ``returns_value = True``.
    seed : int
        Seeds the jittered restart points.

    Returns
    -------
    OptResult
        ``objective_trace`` holds the best-so-far objective after every
        accepted step, across restarts.
    """
    x0 = np.asarray(x0, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x0.shape).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x0.shape).copy()
    x0 = np.clip(x0, lower, upper)

    analytic = cfg.gradient_mode == "analytic" and gradient is not None
    with_value = analytic and getattr(gradient, "returns_value", False)
    if analytic:
        grad_only = (lambda z: gradient(z)[1]) if with_value else gradient
        gap = gradient_check(objective, grad_only, x0, cfg.gradient_check_step)
        if not gap <= cfg.gradient_check_tol:
            log.warning("analytic gradient failed check (gap %.2e); using finite differences", gap)
            analytic = False

    def fg(x):
        if analytic and with_value:
            v, gr = gradient(x)
        else:
            v = objective(x)
            if not np.isfinite(v):
                return np.inf, np.zeros_like(x)
            gr = gradient(x) if analytic else fd_gradient(objective, x, cfg.fd_step, lower, upper)
        return -v, -np.asarray(gr, dtype=float)

    rng = np.random.default_rng(seed)
    starts = [x0] + [
        np.clip(x0 + cfg.restart_scale * rng.standard_normal(x0.size), lower, upper)
        for _ in range(cfg.restarts)
    ]
    best = None
    traces = []
    total_it = 0
    total_ev = 0
    for k, start in enumerate(starts):
        try:
            x, F, it, conv, trace, nfev = _minimize(fg, start, lower, upper, cfg)
        except NonFiniteObjective:
            if k == 0:
                raise
            continue
        total_it += it
        total_ev += nfev
        if best is None or F < best[1]:
            best = (x, F, conv)
        traces.append(-trace)
    trace = np.maximum.accumulate(np.concatenate(traces))
    x, F, conv = best
    return OptResult(
        x=x, final_objective=-F, iterations=total_it, converged=conv,
        objective_trace=trace, n_evaluations=total_ev,
    )


def hyper_bounds(n, cfg):
    lower = np.append(np.full(n, cfg.box_log_ell[0]), cfg.box_log_tau[0])
    upper = np.append(np.full(n, cfg.box_log_ell[1]), cfg.box_log_tau[1])
    return lower, upper


def fit_map(g, grid, sigma, prior, opt=OptConfig(), cfg=MaternConfig(), seed=0):
    """MAP estimate of ``(log_ell field, log_tau)``; returns ``(HyperParams, OptResult)``."""
    n = grid.n

    def objective(theta):
        return hyper_log_posterior(g, HyperParams.from_vector(theta), prior, grid, sigma, cfg)

    def value_and_grad(theta):
        return hyper_log_posterior_and_grad(g, HyperParams.from_vector(theta), prior, grid, sigma, cfg)

    value_and_grad.returns_value = True
    x0 = np.append(np.full(n, opt.init_log_ell), opt.init_log_tau)
    lower, upper = hyper_bounds(n, opt)
    res = maximize(objective, x0, lower, upper, opt, seed, value_and_grad)
    hp = HyperParams.from_vector(res.x)
    if prior is not None and prior.kind == "tv_diff":
        # report the unsmoothed objective
        res = replace(res, final_objective=hyper_log_posterior(g, hp, prior, grid, sigma, cfg, eps=0.0))
    return hp, res


def fit_stationary_map(g, grid, sigma, opt=OptConfig(), cfg=MaternConfig(), seed=0, log_tau_bounds=(-5.0, 0.0)):
    """MAP of the two-parameter model with a constant length-scale field.

    Only the uniform log-tau prior applies; there is no difference prior.
    """
    n = grid.n

    def expand(theta):
        return HyperParams(np.full(n, theta[0]), theta[1])

    def objective(theta):
        hp = expand(theta)
        return marginal_loglik(g, hp, grid, sigma, cfg) + log_tau_logpdf(hp.log_tau, log_tau_bounds)

    def value_and_grad(theta):
        hp = expand(theta)
        v, gr = marginal_loglik_and_grad(g, hp, grid, sigma, cfg)
        # a constant field moves every entry at once
        return v + log_tau_logpdf(hp.log_tau, log_tau_bounds), np.array([gr[:-1].sum(), gr[-1]])

    value_and_grad.returns_value = True
    x0 = np.array([opt.init_log_ell, opt.init_log_tau])
    lower = np.array([opt.box_log_ell[0], opt.box_log_tau[0]])
    upper = np.array([opt.box_log_ell[1], opt.box_log_tau[1]])
    res = maximize(objective, x0, lower, upper, opt, seed, value_and_grad)
    return expand(res.x), res


def deconvolve(g, grid, sigma, prior, opt=OptConfig(), cfg=MaternConfig(), seed=0):
    """Two-step estimate: MAP hyperparameters, then the conditional posterior."""
    hp, res = fit_map(g, grid, sigma, prior, opt, cfg, seed)
    return conditional_posterior(
        g, hp, grid, sigma, cfg,
        alpha=prior.alpha if prior is not None else float("nan"),
        final_objective=res.final_objective, iterations=res.iterations,
    )
