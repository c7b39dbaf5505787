"""Matplotlib figures for measurements, reconstructions and summaries.

Everything renders off-screen and is written straight to a file; the
format follows the file suffix (``.svg``, ``.png``, ``.pdf``).
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "hierdeconv",
}

NOISE_COLORS = {0.25: "tab:red", 0.5: "tab:blue"}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # drop the timestamp so repeated runs give identical files
    meta = {"Date": None} if path.suffix in (".svg", ".pdf") else {}
    fig.savefig(path, metadata=meta, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_measurements(datasets, path):
    """Truth and noisy measurements, one panel per noise level."""
    levels = sorted({ds.noise_percent for ds in datasets})
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, len(levels), figsize=(3.4 * len(levels), 2.6), squeeze=False, sharey=True)
        for ax, level in zip(axes[0], levels):
            shown_truth = False
            for ds in datasets:
                if ds.noise_percent != level:
                    continue
                x = ds.coarse_grid.points
                if not shown_truth and ds.coarse_truth is not None:
                    ax.plot(x, ds.coarse_truth, color="k", label="truth")
                    shown_truth = True
                ax.plot(x, ds.g, color=NOISE_COLORS.get(ds.true_tau), lw=0.9, label=f"tau={ds.true_tau:g}")
            ax.set_title(f"{100 * level:g}% noise")
            ax.set_xlabel("x")
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_reconstruction(x, truth, g, mean, sd, log_ell, title, path):
    """Posterior mean with a 2-sd band on top, log length-scale below."""
    rows = 2 if log_ell is not None else 1
    with plt.rc_context(RC):
        fig, axes = plt.subplots(rows, 1, figsize=(4.2, 2.0 * rows + 0.6), sharex=True, squeeze=False)
        ax = axes[0, 0]
        if g is not None:
            ax.plot(x, g, ".", ms=2.5, color="0.6", label="data")
        if truth is not None:
            ax.plot(x, truth, color="k", label="truth")
        ax.plot(x, mean, color="tab:blue", label="estimate")
        if sd is not None:
            ax.fill_between(x, mean - 2 * sd, mean + 2 * sd, color="tab:blue", alpha=0.2, lw=0)
        ax.set_title(title)
        ax.legend(frameon=False, loc="upper right")
        if log_ell is not None:
            axes[1, 0].plot(x, log_ell, color="tab:green")
            axes[1, 0].set_ylabel("log length-scale")
        axes[-1, 0].set_xlabel("x")
        return _save(fig, path)


def plot_summary(records, path):
    """Grouped bars of relative MSE per cell and method."""
    records = [r for r in records if np.isfinite(r.rel_mse_percent)]
    cells = sorted({(r.tau_true, r.noise_percent) for r in records})
    methods = sorted({r.prior for r in records})
    width = 0.8 / max(len(methods), 1)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(cells), 2.6))
        for k, m in enumerate(methods):
            vals = [next((r.rel_mse_percent for r in records if (r.tau_true, r.noise_percent) == c and r.prior == m), np.nan)
                    for c in cells]
            ax.bar(np.arange(len(cells)) + k * width, vals, width, label=m)
        ax.set_xticks(np.arange(len(cells)) + 0.4 - width / 2)
        ax.set_xticklabels([f"tau={t:g}\n{100 * n:g}%" for t, n in cells])
        ax.set_ylabel("relative MSE (%)")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_trace(trace, path):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.4, 2.4))
        ax.plot(np.arange(len(trace)), trace)
        ax.set_xlabel("iteration")
        ax.set_ylabel("log-posterior")
        return _save(fig, path)
