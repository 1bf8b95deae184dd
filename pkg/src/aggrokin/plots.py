"""Figure rendering for experiment outputs (PNG files next to the CSVs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = [
    "plot_field",
    "plot_trajectory",
    "plot_front",
    "plot_recurrence",
    "plot_estimate",
    "plot_fluctuation",
    "plot_stability",
]

_DPI = 120


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_field(field, path, title: str = "density"):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    if field.grid.dim == 1:
        ax.plot(field.grid.axis(), field.values, lw=1.4)
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    else:
        half = field.grid.length / 2
        im = ax.imshow(
            field.values.T,
            origin="lower",
            extent=[-half, half, -half, half],
            aspect="equal",
        )
        fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(f"{title} (t={field.time:g})")
    return _save(fig, path)


def plot_trajectory(traj_path, path, title: str = "density evolution"):
    fig, ax = plt.subplots(figsize=(6, 3.6))
    if traj_path.grid.dim == 1:
        t = traj_path.times
        half = traj_path.grid.length / 2
        im = ax.imshow(
            traj_path.values.T,
            origin="lower",
            aspect="auto",
            extent=[t[0], t[-1], -half, half],
        )
        ax.set_xlabel("t")
        ax.set_ylabel("x")
        fig.colorbar(im, ax=ax, shrink=0.85, label="u")
    else:
        ax.plot(traj_path.times, traj_path.values.reshape(len(traj_path.times), -1).max(axis=1))
        ax.set_xlabel("t")
        ax.set_ylabel("max u")
    ax.set_title(title)
    return _save(fig, path)


def plot_front(trace, path, predicted=None):
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(np.abs(trace.probes), trace.t_level, "o-", label="level crossing")
    ok = np.isfinite(trace.t_speed)
    if np.any(ok):
        ax.plot(np.abs(trace.probes[ok]), trace.t_speed[ok], "s--",
                label="sustained rate", alpha=0.7)
    if predicted is not None:
        xs = np.abs(trace.probes)
        ax.plot(xs, predicted, "k:", label="recurrence prediction")
    ax.set_xlabel("|x|")
    ax.set_ylabel("arrival time")
    ax.legend(fontsize=8)
    ax.set_title("front arrival")
    return _save(fig, path)


def plot_recurrence(seq, path):
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
    ks = np.arange(seq.c_seq.size)
    axes[0].semilogy(ks[1:], seq.c_seq[1:], lw=1.2)
    axes[0].set_xlabel("k")
    axes[0].set_ylabel("c_k")
    err = seq.errors()
    ok = np.isfinite(err) & (ks >= 2)
    axes[1].plot(ks[ok], np.abs(err[ok]) / np.maximum(ks[ok], 1), lw=1.2)
    axes[1].set_xlabel("k")
    axes[1].set_ylabel("|c_k - asymptote| / k")
    fig.suptitle("front-level recurrence")
    return _save(fig, path)


def plot_estimate(est, path, reference=None, title: str = "density estimate"):
    """``reference`` is an optional (bin_centers, values) pair."""
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.errorbar(est.bin_centers, est.value, yerr=est.stderr, fmt="o",
                ms=3, capsize=2, label="particles")
    if reference is not None:
        ref_x, ref_v = reference
        ax.plot(ref_x, ref_v, "k-", lw=1.2, label="kinetic")
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    ax.set_title(title)
    return _save(fig, path)


def plot_fluctuation(report, path):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.errorbar(report.times, report.seeded_mean, yerr=report.seeded_stderr,
                fmt="o-", ms=3, label=f"seeded (N0={report.initial_count})")
    ax.errorbar(report.times, report.baseline_mean, yerr=report.baseline_stderr,
                fmt="s-", ms=3, label="empty start")
    ax.axhline(report.steady_count, color="k", ls=":", lw=1,
               label="kinetic steady level")
    ax.set_xlabel("t")
    ax.set_ylabel("mean count in region")
    ax.legend(fontsize=8)
    ax.set_title("cluster persistence vs relaxation")
    return _save(fig, path)


def plot_stability(times, deviations, path, initial: float):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.semilogy(times, np.maximum(deviations, 1e-18), lw=1.2)
    ax.axhline(2 * initial, color="r", ls="--", lw=1, label="2 x initial")
    ax.axhline(0.1 * initial, color="g", ls=":", lw=1, label="decay target")
    ax.set_xlabel("t")
    ax.set_ylabel("sup deviation from low state")
    ax.legend(fontsize=8)
    ax.set_title("perturbation decay")
    return _save(fig, path)
