"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 a cell failed (the report
is still written).
"""
import argparse
import logging
import sys
from pathlib import Path

from . import io as dio
from .errors import ConfigError, DeconvError
from .experiments import (
    STATIONARY,
    Fit,
    RunConfig,
    cell_key,
    grid_search_alpha,
    fit_dataset,
    load_config,
    read_report,
    run_baseline_stationary,
    run_experiment,
    with_overrides,
)
from .forward import relative_mse, simulate
from .hyperpriors import PRIOR_KINDS

log = logging.getLogger("hierdeconv")

EXIT_OK, EXIT_CONFIG, EXIT_CELL = 0, 2, 3
FORMATS = ("csv", "json", "svg")


def build_parser():
    p = argparse.ArgumentParser(prog="hierdeconv", description="Blind hierarchical deconvolution of 1-D signals.")
    p.add_argument("--config", type=Path, help="run configuration (JSON)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--format", action="append", choices=FORMATS, dest="formats",
                   help="artifact format; repeat for several (default csv)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a simulated dataset")
    s.add_argument("--tau", type=float, help="true kernel width (default: first of tau_list)")
    s.add_argument("--noise", type=float, help="relative noise as a fraction (default: first of noise_list)")

    f = sub.add_parser("fit", help="fit one dataset with one prior")
    f.add_argument("--data", type=Path, required=True)
    f.add_argument("--prior", choices=PRIOR_KINDS, default="cauchy_diff")
    f.add_argument("--alpha", type=float, help="fixed alpha; omit to grid-search against the stored truth")

    b = sub.add_parser("baseline", help="stationary two-parameter fit")
    b.add_argument("--data", type=Path, required=True)

    e = sub.add_parser("experiment", help="full (tau x noise) grid")
    e.add_argument("--timing", action="store_true", help="fill the seconds column (breaks byte-identical reports)")

    sub.add_parser("report", help="print and re-render a stored experiment")
    return p


def _config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    return with_overrides(cfg, seed=args.seed, output_dir=str(args.out) if args.out else None)


def _write_fit(out, name, ds, fit, formats):
    rec = fit.reconstruction
    x = ds.coarse_grid.points
    if "csv" in formats:
        dio.write_cell_csv(out / f"{name}.csv", x, ds.g, ds.coarse_truth, rec.posterior_mean, rec.sd, rec.log_ell)
        dio.write_trace_csv(out / f"{name}_trace.csv", fit.trace)
    if "json" in formats:
        dio.write_json(out / f"{name}.json", dio.reconstruction_to_dict(rec))
    if "svg" in formats:
        from . import plotting

        plotting.plot_reconstruction(x, ds.coarse_truth, ds.g, rec.posterior_mean, rec.sd, rec.log_ell,
                                     title=f"{name}  tau_hat={rec.tau_hat:.3f}", path=out / f"{name}.svg")
        plotting.plot_trace(fit.trace, out / f"{name}_trace.svg")


def _summary(name, ds, rec):
    line = f"{name}: tau_hat={rec.tau_hat:.4f} iterations={rec.iterations}"
    if ds.coarse_truth is not None:
        line += f" rel_mse={relative_mse(rec.posterior_mean, ds.coarse_truth):.3f}%"
    return line


def cmd_simulate(args, cfg, formats):
    tau = args.tau if args.tau is not None else cfg.tau_list[0]
    noise = args.noise if args.noise is not None else cfg.noise_list[0]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = simulate(cfg.signal, cfg.fine_n, cfg.coarse_n, tau, noise, cfg.seed)
    dio.save_dataset(out / "dataset.json", ds)
    if "csv" in formats:
        dio.write_cell_csv(out / "dataset.csv", ds.coarse_grid.points, ds.g, ds.coarse_truth)
    if "svg" in formats:
        from . import plotting

        plotting.plot_measurements([ds], out / "dataset.svg")
    print(f"wrote {out / 'dataset.json'} (sigma={ds.sigma:.4g})")
    return EXIT_OK


def cmd_fit(args, cfg, formats):
    ds = dio.load_dataset(args.data)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    prior = cfg.prior(args.prior)
    if args.alpha is not None:
        fit = fit_dataset(ds, prior.with_alpha(args.alpha), cfg.opt, cfg.matern, cfg.seed)
    else:
        if ds.coarse_truth is None:
            raise ConfigError("dataset has no truth; pass --alpha")
        fit = grid_search_alpha(ds, prior, cfg.alpha_grid, cfg.opt, cfg.matern, seed=cfg.seed).fit
    name = f"fit_{args.prior}"
    _write_fit(out, name, ds, fit, formats)
    print(_summary(name, ds, fit.reconstruction) + f" alpha={fit.reconstruction.alpha_used:g}")
    return EXIT_OK


def cmd_baseline(args, cfg, formats):
    ds = dio.load_dataset(args.data)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    fit = run_baseline_stationary(ds, cfg.opt, cfg.matern, cfg.log_tau_bounds, cfg.seed)
    _write_fit(out, STATIONARY, ds, fit, formats)
    print(_summary(STATIONARY, ds, fit.reconstruction))
    return EXIT_OK


def print_table(records, stream=None):
    stream = stream or sys.stdout
    stream.write(f"{'tau':>6} {'noise%':>7} {'prior':>12} {'alpha':>9} {'tau_hat':>8} {'relMSE%':>8}\n")
    for r in records:
        alpha = "-" if r.alpha != r.alpha else f"{r.alpha:.3g}"
        stream.write(f"{r.tau_true:>6g} {100 * r.noise_percent:>7g} {r.prior:>12} {alpha:>9} "
                     f"{r.tau_hat:>8.4f} {r.rel_mse_percent:>8.3f}\n")


def cmd_experiment(args, cfg, formats):
    if args.timing:
        cfg = with_overrides(cfg, record_timing=True)
    report = run_experiment(cfg, formats)
    print_table(report.all_records)
    print(f"report written to {Path(cfg.output_dir) / 'report.csv'}")
    return EXIT_CELL if report.failed else EXIT_OK


def cmd_report(args, cfg, formats):
    out = Path(cfg.output_dir)
    path = out / "report.csv"
    if not path.exists():
        raise ConfigError(f"no report at {path}")
    records = read_report(path)
    print_table(records)
    if "svg" in formats:
        from . import plotting

        figs = out / "figures"
        plotting.plot_summary(records, figs / "summary.svg")
        for r in records:
            cell = out / "cells" / f"{cell_key(r.tau_true, r.noise_percent, r.prior)}.csv"
            if not cell.exists():
                continue
            c = dio.read_cell_csv(cell)
            plotting.plot_reconstruction(c["x"], c["truth"], c["g"], c["mean"], c["sd"], c["log_ell"],
                                         title=f"{r.key}  tau_hat={r.tau_hat:.3f}", path=figs / f"{r.key}.svg")
        print(f"figures written to {figs}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "baseline": cmd_baseline,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    formats = tuple(args.formats or ("csv",))
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg, formats)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except DeconvError as exc:
        log.error("%s", exc)
        return EXIT_CELL


if __name__ == "__main__":
    sys.exit(main())
