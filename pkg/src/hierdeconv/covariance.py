"""Non-stationary Matérn covariance on a 1-D grid.

The length-scale field ``ell`` is a squared length: two points couple
through ``L_ij = sqrt((ell_i + ell_j) / 2)`` and the distance is scaled as
``|x_i - x_j| / L_ij``. Only the ``nu = 1.5`` closed form is evaluated on
the hot path.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidSmoothness

LOG_ELL_CAP = np.log(1000.0)


@dataclass(frozen=True)
class Grid:
    """Equidistant sampling of a 1-D domain."""

    points: np.ndarray
    spacing: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a grid needs at least 2 points")
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if np.max(np.abs(np.diff(pts) - self.spacing)) > 1e-12 * max(1.0, abs(self.spacing)):
            raise ValueError("grid points are not equidistant")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, start, end, n):
        pts = np.linspace(start, end, n)
        return cls(points=pts, spacing=float(pts[1] - pts[0]))

    @property
    def n(self):
        return self.points.size

    @property
    def start(self):
        return float(self.points[0])

    @property
    def end(self):
        return float(self.points[-1])

    def distances(self):
        return np.abs(self.points[:, None] - self.points[None, :])


@dataclass(frozen=True)
class MaternConfig:
    magnitude: float = 1.0
    smoothness: float = 1.5

    def __post_init__(self):
        if not self.magnitude > 0:
            raise ValueError("Matérn magnitude must be positive")
        if not self.smoothness > 0:
            raise InvalidSmoothness(f"smoothness must be positive, got {self.smoothness}")


def matern_correlation(s, nu=1.5):
    """Matérn correlation ``2**(1-nu)/Gamma(nu) * s**nu * K_nu(s)``.

    Only ``nu = 1.5`` is supported here, via ``(1 + s) * exp(-s)``. The
    value at ``s = 0`` is 1.
    """
    if not nu > 0:
        raise InvalidSmoothness(f"smoothness must be positive, got {nu}")
    if nu != 1.5:
        raise NotImplementedError("only nu = 1.5 is implemented")
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("scaled distance must be nonnegative")
    out = (1.0 + s) * np.exp(-s)
    return float(out) if out.ndim == 0 else out


def _check_field(grid, log_ell):
    log_ell = np.asarray(log_ell, dtype=float)
    if log_ell.shape != (grid.n,):
        raise DimensionMismatch(
            f"length-scale field has shape {log_ell.shape}, grid has {grid.n} points"
        )
    return log_ell


def _pieces(grid, log_ell, cfg):
    ell = np.exp(log_ell)
    ell_sum = 0.5 * (ell[:, None] + ell[None, :])
    L = np.sqrt(ell_sum)
    s = grid.distances() / L
    pref = cfg.magnitude * np.sqrt(np.sqrt(ell[:, None] * ell[None, :])) / L
    return ell, ell_sum, s, pref


def build_nonstationary(grid, log_ell, cfg=MaternConfig()):
    """Dense covariance matrix for a log length-scale field.

    Entry ``(i, j)`` is ``g2 * (ell_i ell_j)**0.25 / L_ij * m(|x_i-x_j| / L_ij)``
    where ``m`` is the Matérn correlation. The diagonal is set to the
    magnitude exactly and the matrix is mirrored from its upper triangle.
    """
    log_ell = _check_field(grid, log_ell)
    _, _, s, pref = _pieces(grid, log_ell, cfg)
    C = pref * matern_correlation(s, cfg.smoothness)
    C = np.triu(C, 1)
    C = C + C.T
    np.fill_diagonal(C, cfg.magnitude)
    return C


def build_stationary(grid, log_ell_scalar, cfg=MaternConfig()):
    return build_nonstationary(grid, np.full(grid.n, float(log_ell_scalar)), cfg)


def nonstationary_row_derivative(grid, log_ell, cfg=MaternConfig()):
    """``D[k, j] = dC[k, j] / dlog_ell[k]`` for the ``nu = 1.5`` kernel.

    Because ``C[k, j]`` depends on ``log_ell`` only through entries ``k``
    and ``j``, the full Jacobian is recovered from this one matrix.
    """
    log_ell = _check_field(grid, log_ell)
    if cfg.smoothness != 1.5:
        raise NotImplementedError("analytic derivative only for nu = 1.5")
    ell, ell_sum, s, pref = _pieces(grid, log_ell, cfg)
    es = np.exp(-s)
    C = pref * (1.0 + s) * es
    ratio = ell[:, None] / (4.0 * ell_sum)
    D = C * (0.25 - ratio) + pref * s * s * es * ratio
    np.fill_diagonal(D, 0.0)
    return D
