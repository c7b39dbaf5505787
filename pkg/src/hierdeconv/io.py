"""JSON and CSV (de)serialisation of datasets, reconstructions and cell tables."""
import csv
import json
from pathlib import Path

import numpy as np

from .covariance import Grid
from .forward import Dataset
from .inference import Reconstruction

CELL_COLUMNS = ("x", "g", "truth", "mean", "sd", "log_ell")


def _floats(v):
    return [float(x) for x in np.asarray(v, dtype=float)]


def grid_to_dict(grid):
    return {"start": grid.start, "end": grid.end, "n": grid.n}


def grid_from_dict(d):
    return Grid.uniform(float(d["start"]), float(d["end"]), int(d["n"]))


def dataset_to_dict(ds):
    return {
        "grid": grid_to_dict(ds.coarse_grid),
        "g": _floats(ds.g),
        "sigma": ds.sigma,
        "true_tau": ds.true_tau,
        "noise_percent": ds.noise_percent,
        "seed": ds.seed,
        "coarse_truth": None if ds.coarse_truth is None else _floats(ds.coarse_truth),
    }


def dataset_from_dict(d):
    truth = d.get("coarse_truth")
    return Dataset(
        coarse_grid=grid_from_dict(d["grid"]),
        g=np.asarray(d["g"], dtype=float),
        sigma=float(d["sigma"]),
        true_tau=float(d["true_tau"]),
        noise_percent=float(d["noise_percent"]),
        seed=int(d["seed"]),
        coarse_truth=None if truth is None else np.asarray(truth, dtype=float),
    )


def reconstruction_to_dict(rec, include_cov=False):
    out = {
        "mean": _floats(rec.posterior_mean),
        "var_diag": _floats(rec.var_diag),
        "tau_hat": rec.tau_hat,
        "alpha": None if np.isnan(rec.alpha_used) else rec.alpha_used,
        "objective": rec.final_objective,
        "iterations": rec.iterations,
        "jitter": rec.jitter_used,
    }
    if rec.log_ell is not None:
        out["log_ell"] = _floats(rec.log_ell)
    if include_cov:
        out["cov"] = [_floats(row) for row in rec.posterior_cov]
    return out


def reconstruction_from_dict(d):
    mean = np.asarray(d["mean"], dtype=float)
    cov = np.asarray(d["cov"], dtype=float) if "cov" in d else np.diag(np.asarray(d["var_diag"], dtype=float))
    return Reconstruction(
        posterior_mean=mean,
        posterior_cov=cov,
        tau_hat=float(d["tau_hat"]),
        alpha_used=float("nan") if d.get("alpha") is None else float(d["alpha"]),
        final_objective=float(d["objective"]),
        iterations=int(d["iterations"]),
        jitter_used=float(d.get("jitter", 0.0)),
        log_ell=np.asarray(d["log_ell"], dtype=float) if "log_ell" in d else None,
    )


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def save_dataset(path, ds):
    write_json(path, dataset_to_dict(ds))


def load_dataset(path):
    return dataset_from_dict(read_json(path))


def fmt(v):
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_cell_csv(path, x, g=None, truth=None, mean=None, sd=None, log_ell=None):
    """Columnwise CSV; missing columns are left empty."""
    cols = dict(zip(CELL_COLUMNS, (x, g, truth, mean, sd, log_ell)))
    n = len(x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CELL_COLUMNS)
        for i in range(n):
            w.writerow([fmt(None if cols[c] is None else float(cols[c][i])) for c in CELL_COLUMNS])


def read_cell_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for c in CELL_COLUMNS:
        vals = [r.get(c, "") for r in rows]
        out[c] = None if all(v == "" for v in vals) else np.array([float(v) if v else np.nan for v in vals])
    return out


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "objective"))
        for i, v in enumerate(trace):
            w.writerow((i, repr(float(v))))
