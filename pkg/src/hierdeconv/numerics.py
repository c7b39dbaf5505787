"""Dense SPD primitives: jittered Cholesky, log-determinant and solves."""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite, NotSymmetric

SYMMETRY_RTOL = 1e-8
DEFAULT_KMAX = 6


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor of ``S + jitter_used * I``."""

    lower_factor: np.ndarray
    jitter_used: float
    dim: int

    def inverse(self):
        """Dense inverse of the factored matrix."""
        inv = cho_solve((self.lower_factor, True), np.eye(self.dim))
        return 0.5 * (inv + inv.T)


def jitter_ladder(jitter0, k_max=DEFAULT_KMAX):
    return [0.0] + [jitter0 * 10.0**k for k in range(k_max + 1)]


def cholesky_with_jitter(S, jitter0=None, k_max=DEFAULT_KMAX):
    """Factor a symmetric matrix, adding diagonal jitter only if needed.

    Parameters
    ----------
    S : (n, n) array_like
        Symmetric matrix. It is symmetrised as ``(S + S.T) / 2`` first.
    jitter0 : float, optional
        First non-zero rung of the jitter ladder. Defaults to
        ``1e-10 * mean(diag(S))``.
    k_max : int
        The ladder is ``0, jitter0, 10*jitter0, ..., 10**k_max * jitter0``.

    Returns
    -------
    SpdFactor

    Raises
    ------
    NotSymmetric
        If ``S`` is not square or is asymmetric beyond a relative 1e-8.
    NotPositiveDefinite
        If the factorisation fails on every rung.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {S.shape}")
    scale = max(np.max(np.abs(S)), np.finfo(float).tiny)
    if np.max(np.abs(S - S.T)) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("matrix is not symmetric to relative tolerance 1e-8")
    S = 0.5 * (S + S.T)
    n = S.shape[0]
    if jitter0 is None:
        jitter0 = 1e-10 * np.mean(np.diag(S))
        if not jitter0 > 0:
            jitter0 = 1e-10
    for jitter in jitter_ladder(jitter0, k_max):
        M = S if jitter == 0.0 else S + jitter * np.eye(n)
        try:
            L = cholesky(M, lower=True, check_finite=False)
        except LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return SpdFactor(lower_factor=L, jitter_used=float(jitter), dim=n)
    raise NotPositiveDefinite(
        f"Cholesky failed up to jitter {jitter0 * 10.0**k_max:.3g}"
    )


def log_det(f):
    return 2.0 * float(np.sum(np.log(np.diag(f.lower_factor))))


def solve_spd(f, b):
    """Solve ``(S + jitter I) x = b`` by forward and back substitution."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.dim:
        raise DimensionMismatch(f"rhs has length {b.shape[0]}, factor has dim {f.dim}")
    z = solve_triangular(f.lower_factor, b, lower=True, check_finite=False)
    return solve_triangular(f.lower_factor.T, z, lower=False, check_finite=False)
