import numpy as np
import pytest

from hierdeconv.covariance import Grid
from hierdeconv.errors import DimensionMismatch, GridMismatch, InvalidTau, OutOfDomain, ZeroTruth
from hierdeconv.forward import (
    Segment,
    SignalSpec,
    build_operator,
    default_signal,
    evaluate_signal,
    gaussian_kernel,
    operator_log_tau_derivative,
    relative_mse,
    simulate,
)


def total_variation(v):
    return float(np.sum(np.abs(np.diff(v))))


def test_kernel_peak():
    assert gaussian_kernel(0.0, 0.25) == pytest.approx(1.5957691216057308, rel=1e-15)


@pytest.mark.parametrize("tau", [0.1, 0.25, 2.0])
def test_kernel_one_sigma(tau):
    assert gaussian_kernel(tau, tau) == pytest.approx(np.exp(-0.5) / (np.sqrt(2 * np.pi) * tau), rel=1e-15)


def test_kernel_even(rng):
    x = rng.standard_normal(20)
    np.testing.assert_array_equal(gaussian_kernel(x, 0.3), gaussian_kernel(-x, 0.3))


def test_kernel_rejects_bad_tau():
    with pytest.raises(InvalidTau):
        gaussian_kernel(0.0, 0.0)
    with pytest.raises(InvalidTau):
        build_operator(Grid.uniform(0, 1, 5), -1.0)


def test_normalised_operator_preserves_constants():
    op = build_operator(Grid.uniform(0, 5, 100), 0.5, normalize=True)
    assert np.all(op.matrix >= 0)
    np.testing.assert_allclose(op.matrix.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(op @ np.full(100, 3.2), 3.2, atol=1e-12)


def test_narrow_kernel_is_near_identity():
    grid = Grid.uniform(0, 5, 100)
    f = np.sin(grid.points)
    op = build_operator(grid, grid.spacing / 10, normalize=True)
    assert np.max(np.abs(op @ f - f)) / np.max(np.abs(f)) <= 0.01


def test_unnormalised_interior_rows_integrate_to_one():
    grid = Grid.uniform(0, 5, 301)
    op = build_operator(grid, 0.25, normalize=False)
    interior = np.abs(grid.points - 2.5) < 1.0
    np.testing.assert_allclose(op.matrix[interior].sum(axis=1), 1.0, atol=1e-6)
    np.testing.assert_allclose(op.matrix[0, 0], grid.spacing * gaussian_kernel(0.0, 0.25))


@pytest.mark.parametrize("normalize", [True, False])
def test_log_tau_derivative(normalize):
    grid = Grid.uniform(0, 5, 30)
    tau, h = 0.3, 1e-6
    op = build_operator(grid, tau, normalize)
    fd = (
        build_operator(grid, tau * np.exp(h), normalize).matrix
        - build_operator(grid, tau * np.exp(-h), normalize).matrix
    ) / (2 * h)
    np.testing.assert_allclose(operator_log_tau_derivative(op), fd, atol=1e-8)


def test_segments():
    spec = SignalSpec(
        0.0,
        4.0,
        (
            Segment("constant", 0.0, 2.0, {"value": 0.4}),
            Segment("linear_ramp", 2.0, 3.0, {"start_value": 0.0, "end_value": 1.0}),
            Segment("constant", 3.0, 4.0, {"value": -1.0}),
        ),
    )
    v = evaluate_signal(spec, np.array([0.5, 1.0, 2.5, 2.0, 3.0, 4.0]))
    np.testing.assert_allclose(v, [0.4, 0.4, 0.5, 0.0, -1.0, -1.0])


def test_default_signal_spike():
    assert evaluate_signal(default_signal(), np.array([0.75]))[0] == pytest.approx(1.0)


def test_signal_validation():
    with pytest.raises(ValueError):
        SignalSpec(0.0, 2.0, (Segment("constant", 0.0, 1.0, {"value": 0}),))
    with pytest.raises(OutOfDomain):
        evaluate_signal(default_signal(), np.array([5.5]))


def test_signal_dict_roundtrip():
    spec = default_signal()
    assert SignalSpec.from_dict(spec.to_dict()) == spec


def test_simulate_noiseless():
    ds = simulate(default_signal(), 300, 100, 0.25, 0.0, seed=3)
    np.testing.assert_array_equal(ds.g, ds.clean)
    assert ds.g.shape == (100,)
    assert ds.sigma == 0.0


def test_simulate_grid_nesting_and_sigma():
    ds = simulate(default_signal(), 300, 100, 0.25, 0.05, seed=1)
    fine = Grid.uniform(0, 5, 300)
    np.testing.assert_array_equal(ds.coarse_grid.points, fine.points[::3])
    assert ds.sigma == pytest.approx(0.05 * np.max(np.abs(ds.clean)))
    np.testing.assert_array_equal(ds.coarse_truth, ds.fine_truth[::3])


def test_simulate_deterministic():
    a = simulate(default_signal(), 300, 100, 0.5, 0.01, seed=11)
    b = simulate(default_signal(), 300, 100, 0.5, 0.01, seed=11)
    np.testing.assert_array_equal(a.g, b.g)
    assert a.sigma == b.sigma


def test_simulate_grid_mismatch():
    with pytest.raises(GridMismatch):
        simulate(default_signal(), 300, 70, 0.25, 0.01)


def test_noise_calibration_monte_carlo():
    # 100 seeds x 100 samples = 10^4 draws
    residuals = []
    sigma = None
    for seed in range(100):
        ds = simulate(default_signal(), 300, 100, 0.25, 0.01, seed=seed)
        residuals.append(ds.g - ds.clean)
        sigma = ds.sigma
    sd = np.std(np.concatenate(residuals))
    assert abs(sd - sigma) <= 0.05 * sigma


def test_inversion_operator_is_not_fine_operator_restricted():
    fine = Grid.uniform(0, 5, 300)
    coarse = Grid(points=fine.points[::3], spacing=3 * fine.spacing)
    A_fine = build_operator(fine, 0.25).matrix[::3, ::3]
    A_coarse = build_operator(coarse, 0.25).matrix
    assert not np.allclose(A_fine, A_coarse)


def test_blur_reduces_total_variation():
    grid = Grid.uniform(0, 5, 300)
    f = evaluate_signal(default_signal(), grid)
    tvs = [total_variation(build_operator(grid, t) @ f) for t in (0.1, 0.25, 0.5)]
    assert tvs[0] >= tvs[1] >= tvs[2]


def test_relative_mse():
    truth = np.array([1.0, -2.0, 0.5])
    assert relative_mse(truth, truth) == 0.0
    assert relative_mse(np.zeros(3), truth) == pytest.approx(100.0)
    assert relative_mse(1.1 * truth, truth) == pytest.approx(1.0)
    with pytest.raises(DimensionMismatch):
        relative_mse(np.zeros(2), truth)
    with pytest.raises(ZeroTruth):
        relative_mse(truth, np.zeros(3))


def test_segment_parameters_are_checked():
    with pytest.raises(ValueError):
        Segment("constant", 0.0, 1.0, {"level": 1.0})
    with pytest.raises(ValueError):
        Segment("linear_ramp", 0.0, 1.0, {"start_value": 0.0})
