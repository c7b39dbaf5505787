"""Test signal, Gaussian blur operator and the simulation protocol."""
from dataclasses import dataclass, field

import numpy as np

from .covariance import Grid
from .errors import DimensionMismatch, GridMismatch, InvalidTau, OutOfDomain, ZeroTruth

SEGMENT_PARAMS = {
    "gaussian_bump": ("center", "width", "height"),
    "linear_ramp": ("start_value", "end_value"),
    "constant": ("value",),
}
SEGMENT_KINDS = tuple(SEGMENT_PARAMS)


def gaussian_kernel(x, tau):
    if not tau > 0:
        raise InvalidTau(f"kernel width must be positive, got {tau}")
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * (x / tau) ** 2) / (np.sqrt(2.0 * np.pi) * tau)


@dataclass(frozen=True)
class ConvolutionOperator:
    matrix: np.ndarray
    tau: float
    grid: Grid
    normalized: bool

    def __matmul__(self, f):
        return self.matrix @ f


def build_operator(grid, tau, normalize=True, kernel=gaussian_kernel):
    """Matrix of ``f -> (kernel(., tau) * f)(x_i)`` on ``grid``.

    Entries are ``spacing * kernel(x_i - x_j, tau)``. With ``normalize`` each
    row is rescaled to sum to one, which renormalises the kernel where it
    is truncated by the domain boundary.
    """
    if not tau > 0:
        raise InvalidTau(f"kernel width must be positive, got {tau}")
    diff = grid.points[:, None] - grid.points[None, :]
    A = grid.spacing * kernel(diff, tau)
    if normalize:
        A = A / A.sum(axis=1, keepdims=True)
    return ConvolutionOperator(matrix=A, tau=float(tau), grid=grid, normalized=normalize)


def operator_log_tau_derivative(op):
    """Derivative of the Gaussian operator matrix with respect to ``log(tau)``."""
    diff = op.grid.points[:, None] - op.grid.points[None, :]
    r = (diff / op.tau) ** 2
    A = op.matrix
    if op.normalized:
        return A * (r - np.sum(A * r, axis=1, keepdims=True))
    return A * (r - 1.0)


@dataclass(frozen=True)
class Segment:
    kind: str
    start: float
    end: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if set(self.params) != set(SEGMENT_PARAMS[self.kind]):
            raise ValueError(f"{self.kind} takes parameters {SEGMENT_PARAMS[self.kind]}, got {sorted(self.params)}")
        if not self.end > self.start:
            raise ValueError("segment end must exceed its start")

    def __call__(self, x):
        p = self.params
        if self.kind == "constant":
            return np.full_like(x, p["value"], dtype=float)
        if self.kind == "linear_ramp":
            t = (x - self.start) / (self.end - self.start)
            return p["start_value"] + t * (p["end_value"] - p["start_value"])
        return p["height"] * np.exp(-0.5 * ((x - p["center"]) / p["width"]) ** 2)

    def to_dict(self):
        return {"kind": self.kind, "start": self.start, "end": self.end, **self.params}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        return cls(kind=d.pop("kind"), start=float(d.pop("start")), end=float(d.pop("end")), params=d)


@dataclass(frozen=True)
class SignalSpec:
    """Piecewise signal: segments partition ``[domain_start, domain_end]``."""

    domain_start: float
    domain_end: float
    pieces: tuple

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise ValueError("signal needs at least one segment")
        edges = [pieces[0].start] + [p.end for p in pieces]
        if edges[0] != self.domain_start or edges[-1] != self.domain_end:
            raise ValueError("segments must cover the domain")
        for a, b in zip(pieces, pieces[1:]):
            if a.end != b.start:
                raise ValueError("segments must be contiguous and non-overlapping")
        object.__setattr__(self, "pieces", pieces)

    def to_dict(self):
        return {
            "domain_start": self.domain_start,
            "domain_end": self.domain_end,
            "pieces": [p.to_dict() for p in self.pieces],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            domain_start=float(d["domain_start"]),
            domain_end=float(d["domain_end"]),
            pieces=tuple(Segment.from_dict(p) for p in d["pieces"]),
        )


def default_signal():
    """Spike, ramp and step signal on ``[0, 5]``."""
    seg = Segment
    return SignalSpec(
        0.0,
        5.0,
        (
            seg("gaussian_bump", 0.0, 1.5, {"center": 0.75, "width": 0.15, "height": 1.0}),
            seg("constant", 1.5, 2.0, {"value": 0.0}),
            seg("linear_ramp", 2.0, 3.0, {"start_value": 0.0, "end_value": 1.0}),
            seg("constant", 3.0, 3.5, {"value": 1.0}),
            seg("constant", 3.5, 4.25, {"value": 0.4}),
            seg("constant", 4.25, 5.0, {"value": 0.0}),
        ),
    )


def evaluate_signal(spec, grid):
    x = grid.points if isinstance(grid, Grid) else np.asarray(grid, dtype=float)
    if np.any(x < spec.domain_start) or np.any(x > spec.domain_end):
        raise OutOfDomain("grid extends outside the signal domain")
    out = np.empty_like(x)
    starts = np.array([p.start for p in spec.pieces])
    # right-continuous: a boundary point belongs to the segment that starts there
    idx = np.searchsorted(starts, x, side="right") - 1
    for k, piece in enumerate(spec.pieces):
        mask = idx == k
        out[mask] = piece(x[mask])
    return out


@dataclass
class Dataset:
    """Noisy coarse-grid measurement plus everything needed to regenerate it.

    ``noise_percent`` is a fraction: 0.01 means 1 % relative noise.
    """

    coarse_grid: Grid
    g: np.ndarray
    sigma: float
    true_tau: float
    noise_percent: float
    seed: int
    coarse_truth: np.ndarray
    fine_truth: np.ndarray = None
    clean: np.ndarray = None


def simulate(spec, fine_n=300, coarse_n=100, tau=0.25, noise_percent=0.01, seed=0):
    """Blur on a fine grid, subsample to the coarse grid, add noise.

    The noise standard deviation is ``noise_percent * max|clean|`` where
    ``clean`` is the subsampled noiseless measurement.
    """
    if fine_n % coarse_n != 0:
        raise GridMismatch(f"fine_n={fine_n} is not a multiple of coarse_n={coarse_n}")
    if noise_percent < 0:
        raise ValueError("noise level must be nonnegative")
    step = fine_n // coarse_n
    fine = Grid.uniform(spec.domain_start, spec.domain_end, fine_n)
    fine_truth = evaluate_signal(spec, fine)
    blurred = build_operator(fine, tau, normalize=True) @ fine_truth
    coarse_pts = fine.points[::step]
    coarse = Grid(points=coarse_pts, spacing=step * fine.spacing)
    clean = blurred[::step]
    sigma = float(noise_percent * np.max(np.abs(clean)))
    rng = np.random.default_rng(seed)
    g = clean + sigma * rng.standard_normal(coarse_n) if sigma > 0 else clean.copy()
    return Dataset(
        coarse_grid=coarse,
        g=g,
        sigma=sigma,
        true_tau=float(tau),
        noise_percent=float(noise_percent),
        seed=int(seed),
        coarse_truth=fine_truth[::step].copy(),
        fine_truth=fine_truth,
        clean=clean,
    )


def relative_mse(estimate, truth):
    """Relative squared error in percent: ``100 ||est - truth||^2 / ||truth||^2``."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise DimensionMismatch(f"shapes {estimate.shape} and {truth.shape} differ")
    denom = float(np.sum(truth**2))
    if denom == 0.0:
        raise ZeroTruth("relative error undefined for an all-zero truth")
    return 100.0 * float(np.sum((estimate - truth) ** 2)) / denom
