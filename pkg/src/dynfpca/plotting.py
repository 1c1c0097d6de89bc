"""Figures written next to the CSV reports.

matplotlib is imported lazily with the non-interactive Agg backend so the
numerical core does not depend on it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

# fixed metadata keeps PNG output byte-identical across runs
_PNG_META = {"Software": None}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(
        {
            "font.size": 9,
            "axes.titlesize": 10,
            "axes.spines.top": False,
            "axes.spines.right": False,
            "legend.frameon": False,
        }
    )
    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata=_PNG_META)
    fig.clf()
    return path


def plot_eigenvalues(eigen, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    theta = np.pi * np.arange(eigen.n_theta + 1) / eigen.n_theta
    for m in range(eigen.p):
        ax.plot(theta, eigen.lambdas[m], lw=1.2, label=f"m = {m + 1}")
    ax.set_yscale("log")
    ax.set_xlim(0, np.pi)
    ax.set_xlabel(r"frequency $\theta$")
    ax.set_ylabel(r"$\lambda_m(\theta)$")
    ax.set_title("Dynamic eigenvalues")
    ax.legend(ncol=2)
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_filters(model, path, component: int = 0, max_lag: int = 2):
    """Filter functions ``phi_{m,l}(u)`` for the central lags."""
    plt = _pyplot()
    u = model.basis.grid
    design = model.basis.design(u)
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    for lag in range(-max_lag, max_lag + 1):
        ax.plot(u, design @ model.filter(component, lag), lw=1.2, label=f"l = {lag}")
    ax.axhline(0, color="0.6", lw=0.6)
    ax.set_xlabel("u")
    ax.set_title(f"Filter coefficients, component {component + 1} (L = {model.L})")
    ax.legend(ncol=max_lag * 2 + 1, fontsize=7)
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_reconstructions(original, static, dynamic, path, start: int = 0, count: int = 10):
    plt = _pyplot()
    u = original.basis.grid
    design = original.basis.design(u)
    stop = min(original.n, start + count)
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2), sharey=True)
    for ax, series, title in zip(axes, (original, static, dynamic), ("centered data", "static", "dynamic")):
        seg = series.coeffs[start:stop] @ design.T
        x = np.concatenate([u + k for k in range(seg.shape[0])])
        ax.plot(x, seg.ravel(), lw=0.9)
        ax.set_title(title)
        ax.set_xlabel("t")
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_cusum(result, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.plot(result.x, result.values, lw=1.0)
    ax.set_xlabel("x")
    ax.set_ylabel(r"$T_n^{dyn}(x)$")
    ax.set_title(f"CUSUM functional (sup = {result.sup_stat:.3g})")
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_benchmark(rows, path):
    """Mean NMSE per cell, static vs dynamic, one panel per operator."""
    plt = _pyplot()
    kinds = sorted({r.kind for r in rows})
    fig, axes = plt.subplots(1, len(kinds), figsize=(4 * len(kinds), 3.2), squeeze=False)
    for ax, kind in zip(axes[0], kinds):
        sub = [r for r in rows if r.kind == kind]
        labels = sorted({(r.d, r.kappa, r.p) for r in sub})
        xs = np.arange(len(labels))
        for off, method in ((-0.2, "static"), (0.2, "dynamic")):
            means = [next(r.mean_nmse for r in sub if (r.d, r.kappa, r.p) == lab and r.method == method) for lab in labels]
            sds = [next(r.sd_nmse for r in sub if (r.d, r.kappa, r.p) == lab and r.method == method) for lab in labels]
            ax.bar(xs + off, means, width=0.4, yerr=sds, label=method, capsize=2)
        ax.set_xticks(xs)
        ax.set_xticklabels([f"k={k:g}\np={p}" for (_, k, p) in labels], fontsize=7)
        ax.set_title(kind)
        ax.set_ylabel("mean NMSE")
    axes[0][0].legend()
    out = _save(fig, path)
    plt.close(fig)
    return out
