"""Figures rendered from CLI outputs. matplotlib is imported lazily and is optional."""

from __future__ import annotations

import os

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("figures need matplotlib; install the 'plot' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, directory, name):
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    fig.clf()
    return path


def plot_solve(record, directory):
    """Residual norm and sqrt(tr Cov[x]) per iteration."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    it = np.arange(1, len(record["residual_history"]) + 1)
    ax.semilogy(it, record["residual_history"], label="residual norm")
    tr = np.asarray(record["trace_history"], dtype=float)
    if np.any(tr > 0):
        ax.semilogy(it, np.sqrt(np.clip(tr, 0, None)), "--", label="sqrt(tr Cov[x])")
    ax.set_xlabel("iteration")
    ax.legend()
    path = _save(fig, directory, "solve_convergence.png")
    plt.close(fig)
    return [path]


def plot_calibration(rows, directory):
    """w-bar per kernel and method with standard-error bars."""
    plt = _pyplot()
    kernels = sorted({r["kernel"] for r in rows})
    methods = list(dict.fromkeys(r["method"] for r in rows))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.8 / max(len(methods), 1)
    for j, m in enumerate(methods):
        vals = [next((r for r in rows if r["kernel"] == k and r["method"] == m), None) for k in kernels]
        x = np.arange(len(kernels)) + j * width
        ax.bar(x, [v["w_bar"] if v else np.nan for v in vals], width, yerr=[v["stderr"] if v else 0 for v in vals], label=m)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xticks(np.arange(len(kernels)) + 0.4 - width / 2, kernels)
    ax.set_ylabel("mean w")
    ax.legend(fontsize=8)
    path = _save(fig, directory, "calibration.png")
    plt.close(fig)
    return [path]


def plot_pde(record, directory):
    """Transported mean, its std, signed error and a histogram of standardized errors."""
    plt = _pyplot()
    data = record["data"]
    m = data["m_fine"]
    fields = [
        ("transported mean", data["transported_mean"]),
        ("posterior std", data["transported_std"]),
        ("signed error", data["signed_error"]),
    ]
    fig, axes = plt.subplots(1, 4, figsize=(15, 3.5))
    for ax, (title, vals) in zip(axes, fields):
        im = ax.imshow(np.asarray(vals, dtype=float).reshape(m, m), origin="lower", extent=(0, 1, 0, 1))
        ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.8)
    z = np.array([v for v in data["standardized_error"] if v is not None], dtype=float)
    axes[3].hist(z, bins=20, density=True)
    t = np.linspace(-4, 4, 200)
    axes[3].plot(t, np.exp(-0.5 * t**2) / np.sqrt(2 * np.pi))
    axes[3].set_title("standardized error")
    path = _save(fig, directory, "pde_demo.png")
    plt.close(fig)
    return [path]


def plot_gp(rows, directory):
    """Mean error and trace budget against the iteration checkpoint."""
    plt = _pyplot()
    k = [r["k"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(k, [max(r["mean_error"], 1e-300) for r in rows], "o-", label="relative mean error")
    ax.semilogy(k, [max(r["trace"], 1e-300) for r in rows], "s--", label="trace budget")
    ax.set_xlabel("iterations k")
    ax.legend()
    path = _save(fig, directory, "gp_demo.png")
    plt.close(fig)
    return [path]
