"""Experiment harness: simulated datasets, alpha grid search, baselines, reports."""
import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import io as dio
from .covariance import MaternConfig
from .errors import ConfigError, DeconvError
from .forward import SignalSpec, default_signal, relative_mse, simulate
from .hyperpriors import PRIOR_KINDS, PriorConfig
from .inference import conditional_posterior
from .optimizer import OptConfig, fit_map, fit_stationary_map

log = logging.getLogger(__name__)

REPORT_HEADER = ("tau_true", "noise_percent", "prior", "alpha", "tau_hat", "rel_mse_percent", "seconds", "iterations")
SWEEP_HEADER = ("tau_true", "noise_percent", "prior", "alpha", "tau_hat", "rel_mse_percent", "iterations", "status")
STATIONARY = "stationary"
SIGMA_FLOOR = 1e-4


def default_alpha_grid():
    return tuple(float(a) for a in np.logspace(-2, 2, 9))


@dataclass(frozen=True)
class RunConfig:
    signal: SignalSpec = field(default_factory=default_signal)
    fine_n: int = 300
    coarse_n: int = 100
    tau_list: tuple = (0.25, 0.5)
    noise_list: tuple = (0.01, 0.05)
    prior_kinds: tuple = ("cauchy_diff",)
    tv_smoothing_eps: float = 1e-6
    log_tau_bounds: tuple = (-5.0, 0.0)
    alpha_grid: tuple = field(default_factory=default_alpha_grid)
    opt: OptConfig = field(default_factory=lambda: OptConfig(gradient_mode="analytic"))
    matern: MaternConfig = field(default_factory=MaternConfig)
    seed: int = 0
    output_dir: str = "results"
    baseline: bool = True
    record_timing: bool = False

    def __post_init__(self):
        for name in ("tau_list", "noise_list", "prior_kinds", "alpha_grid", "log_tau_bounds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not (self.tau_list and self.noise_list and self.prior_kinds and self.alpha_grid):
            raise ConfigError("tau_list, noise_list, prior_kinds and alpha_grid must be non-empty")
        if any(b <= a for a, b in zip(self.alpha_grid, self.alpha_grid[1:])):
            raise ConfigError("alpha_grid must be strictly increasing")
        if any(a <= 0 for a in self.alpha_grid):
            raise ConfigError("alpha values must be positive")
        bad = set(self.prior_kinds) - set(PRIOR_KINDS)
        if bad:
            raise ConfigError(f"unknown prior kinds {sorted(bad)}")
        if self.fine_n % self.coarse_n:
            raise ConfigError("fine_n must be a multiple of coarse_n")

    def prior(self, kind, alpha=1.0):
        return PriorConfig(kind, alpha, self.tv_smoothing_eps, self.log_tau_bounds)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["signal"] = self.signal.to_dict()
        d["opt"] = asdict(self.opt)
        d["matern"] = asdict(self.matern)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _strict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return data


def config_from_dict(data):
    """Build a RunConfig from a JSON tree, rejecting unknown keys."""
    data = dict(_strict(RunConfig, data, "config"))
    try:
        if "signal" in data:
            data["signal"] = SignalSpec.from_dict(data["signal"])
        if "opt" in data:
            data["opt"] = OptConfig(**_strict(OptConfig, data["opt"], "opt"))
        if "matern" in data:
            data["matern"] = MaternConfig(**_strict(MaternConfig, data["matern"], "matern"))
        return RunConfig(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    try:
        data = dio.read_json(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def cell_seed(seed, tau_index, noise_index):
    return int(np.random.SeedSequence([seed, tau_index, noise_index]).generate_state(1)[0])


def fit_sigma(dataset):
    """Noise level used for inversion; floored so noiseless data stay invertible."""
    return max(dataset.sigma, SIGMA_FLOOR * float(np.max(np.abs(dataset.g))))


@dataclass
class Fit:
    reconstruction: object
    trace: np.ndarray
    converged: bool = True


def fit_dataset(dataset, prior, opt, matern, seed=0):
    """Two-step fit of one dataset with one prior."""
    sigma = fit_sigma(dataset)
    hp, res = fit_map(dataset.g, dataset.coarse_grid, sigma, prior, opt, matern, seed)
    rec = conditional_posterior(
        dataset.g, hp, dataset.coarse_grid, sigma, matern,
        alpha=prior.alpha, final_objective=res.final_objective, iterations=res.iterations,
    )
    return Fit(rec, res.objective_trace, res.converged)


class AlphaSearch(NamedTuple):
    alpha_best: float
    fit: Fit
    sweep: list

    @property
    def reconstruction(self):
        return self.fit.reconstruction


def grid_search_alpha(dataset, prior, alpha_grid, opt=OptConfig(), matern=MaternConfig(), fitter=fit_dataset, seed=0):
    """Pick the alpha whose reconstruction is closest to the known truth.

    This needs ``dataset.coarse_truth`` and is a simulation-only device.
    Each sweep entry is ``(alpha, fit or None, rel_mse or nan, status)``; a
    failing alpha is logged and skipped. Ties go to the smaller alpha.
    """
    if dataset.coarse_truth is None:
        raise ValueError("alpha grid search needs the ground truth")
    sweep = []
    best = None
    for alpha in alpha_grid:
        try:
            fit = fitter(dataset, prior.with_alpha(alpha), opt, matern, seed)
            mse = relative_mse(fit.reconstruction.posterior_mean, dataset.coarse_truth)
        except (DeconvError, np.linalg.LinAlgError) as exc:
            log.warning("alpha=%g failed: %s", alpha, exc)
            sweep.append((alpha, None, float("nan"), f"failed: {exc}"))
            continue
        sweep.append((alpha, fit, mse, "ok"))
        if best is None or mse < best[2]:
            best = (alpha, fit, mse)
    if best is None:
        raise DeconvError("every alpha in the grid failed")
    return AlphaSearch(best[0], best[1], sweep)


def run_baseline_stationary(dataset, opt=OptConfig(), matern=MaternConfig(), log_tau_bounds=(-5.0, 0.0), seed=0):
    """Fit a scalar length-scale and tau, then reconstruct."""
    sigma = fit_sigma(dataset)
    hp, res = fit_stationary_map(dataset.g, dataset.coarse_grid, sigma, opt, matern, seed, log_tau_bounds)
    rec = conditional_posterior(
        dataset.g, hp, dataset.coarse_grid, sigma, matern,
        final_objective=res.final_objective, iterations=res.iterations,
    )
    return Fit(rec, res.objective_trace, res.converged)


@dataclass
class CellRecord:
    tau_true: float
    noise_percent: float
    prior: str
    alpha: float
    tau_hat: float
    rel_mse_percent: float
    seconds: float
    iterations: int
    status: str = "ok"

    @property
    def key(self):
        return cell_key(self.tau_true, self.noise_percent, self.prior)

    def row(self, timing):
        return (
            dio.fmt(self.tau_true),
            dio.fmt(100.0 * self.noise_percent),
            self.prior,
            dio.fmt(self.alpha),
            dio.fmt(self.tau_hat),
            dio.fmt(self.rel_mse_percent),
            f"{self.seconds:.3f}" if timing else "",
            str(self.iterations),
        )


def cell_key(tau, noise, prior):
    return f"tau{tau:g}_noise{100 * noise:g}_{prior}"


@dataclass
class ExperimentReport:
    records: list = field(default_factory=list)
    baselines: list = field(default_factory=list)
    sweeps: list = field(default_factory=list)
    record_timing: bool = False

    @property
    def all_records(self):
        return sorted(self.records + self.baselines, key=lambda r: (r.tau_true, r.noise_percent, r.prior))

    @property
    def failed(self):
        return any(r.status != "ok" for r in self.all_records) or any(s[-1] != "ok" for s in self.sweeps)

    def lookup(self, tau, noise, prior):
        for r in self.all_records:
            if r.tau_true == tau and r.noise_percent == noise and r.prior == prior:
                return r
        raise KeyError((tau, noise, prior))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.all_records:
            w.writerow(r.row(self.record_timing))
        return buf.getvalue()

    def sweep_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for row in sorted(self.sweeps, key=lambda s: s[:4]):
            tau, noise, prior, alpha, tau_hat, mse, its, status = row
            w.writerow((dio.fmt(tau), dio.fmt(100.0 * noise), prior, dio.fmt(alpha),
                        dio.fmt(tau_hat), dio.fmt(mse), its, status))
        return buf.getvalue()


def _prepare_output(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _emit_cell(out, key, dataset, fit, formats):
    rec = fit.reconstruction
    x = dataset.coarse_grid.points
    if "csv" in formats:
        dio.write_cell_csv(out / "cells" / f"{key}.csv", x, dataset.g, dataset.coarse_truth,
                           rec.posterior_mean, rec.sd, rec.log_ell)
        dio.write_trace_csv(out / "cells" / f"{key}_trace.csv", fit.trace)
    if "json" in formats:
        dio.write_json(out / "cells" / f"{key}.json", dio.reconstruction_to_dict(rec))
    if "svg" in formats:
        from . import plotting

        plotting.plot_reconstruction(
            x, dataset.coarse_truth, dataset.g, rec.posterior_mean, rec.sd, rec.log_ell,
            title=f"{key}  tau_hat={rec.tau_hat:.3f}", path=out / "figures" / f"{key}.svg",
        )


def run_experiment(config, formats=("csv",)):
    """Run every (tau, noise) cell and write the report into ``config.output_dir``.

    Alpha is chosen per cell and prior by oracle grid search against the
    simulated truth, so reported errors are best-case over the grid.
    """
    out = _prepare_output(config.output_dir)
    (out / "cells").mkdir(exist_ok=True)
    if "svg" in formats:
        (out / "figures").mkdir(exist_ok=True)
    dio.write_json(out / "config.json", config.to_dict())
    report = ExperimentReport(record_timing=config.record_timing)
    datasets = []
    for ti, tau in enumerate(config.tau_list):
        for ni, noise in enumerate(config.noise_list):
            seed = cell_seed(config.seed, ti, ni)
            ds = simulate(config.signal, config.fine_n, config.coarse_n, tau, noise, seed)
            datasets.append(ds)
            if "json" in formats:
                dio.save_dataset(out / "cells" / f"{cell_key(tau, noise, 'data')}.json", ds)
            for kind in config.prior_kinds:
                report.records.append(_run_prior_cell(out, config, ds, kind, seed, report, formats))
            if config.baseline:
                report.baselines.append(_run_baseline_cell(out, config, ds, seed, formats))
    (out / "report.csv").write_text(report.to_csv())
    (out / "alpha_sweep.csv").write_text(report.sweep_csv())
    dio.write_json(out / "report.json", {
        "alpha_selection": "oracle grid search against simulated ground truth (simulation only)",
        "failed": report.failed,
    })
    if "svg" in formats:
        from . import plotting

        plotting.plot_measurements(datasets, out / "figures" / "measurements.svg")
        plotting.plot_summary(report.all_records, out / "figures" / "summary.svg")
    return report


def _run_prior_cell(out, config, ds, kind, seed, report, formats):
    key = cell_key(ds.true_tau, ds.noise_percent, kind)
    start = time.perf_counter()
    try:
        search = grid_search_alpha(ds, config.prior(kind), config.alpha_grid, config.opt, config.matern, seed=seed)
    except DeconvError as exc:
        log.error("cell %s failed: %s", key, exc)
        return CellRecord(ds.true_tau, ds.noise_percent, kind, float("nan"), float("nan"),
                          float("nan"), time.perf_counter() - start, 0, f"failed: {exc}")
    for alpha, fit, mse, status in search.sweep:
        rec = fit.reconstruction if fit else None
        report.sweeps.append((
            ds.true_tau, ds.noise_percent, kind, alpha,
            rec.tau_hat if rec else float("nan"), mse, rec.iterations if rec else 0, status,
        ))
    _emit_cell(out, key, ds, search.fit, formats)
    rec = search.fit.reconstruction
    return CellRecord(
        ds.true_tau, ds.noise_percent, kind, search.alpha_best, rec.tau_hat,
        relative_mse(rec.posterior_mean, ds.coarse_truth), time.perf_counter() - start, rec.iterations,
    )


def _run_baseline_cell(out, config, ds, seed, formats):
    key = cell_key(ds.true_tau, ds.noise_percent, STATIONARY)
    start = time.perf_counter()
    try:
        fit = run_baseline_stationary(ds, config.opt, config.matern, config.log_tau_bounds, seed)
    except DeconvError as exc:
        log.error("baseline %s failed: %s", key, exc)
        return CellRecord(ds.true_tau, ds.noise_percent, STATIONARY, float("nan"), float("nan"),
                          float("nan"), time.perf_counter() - start, 0, f"failed: {exc}")
    _emit_cell(out, key, ds, fit, formats)
    rec = fit.reconstruction
    return CellRecord(
        ds.true_tau, ds.noise_percent, STATIONARY, float("nan"), rec.tau_hat,
        relative_mse(rec.posterior_mean, ds.coarse_truth), time.perf_counter() - start, rec.iterations,
    )


def read_report(path):
    """Parse a report CSV back into records (noise converted back to a fraction)."""
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            num = lambda k: float(row[k]) if row[k] else float("nan")
            records.append(CellRecord(
                tau_true=num("tau_true"), noise_percent=num("noise_percent") / 100.0, prior=row["prior"],
                alpha=num("alpha"), tau_hat=num("tau_hat"), rel_mse_percent=num("rel_mse_percent"),
                seconds=num("seconds"), iterations=int(row["iterations"]),
            ))
    return records


def with_overrides(config, **kw):
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
