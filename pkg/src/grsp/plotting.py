"""Figures written next to the tabular CLI output."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps repeated runs byte-identical
_SAVE_KW = dict(metadata={"Software": None}, dpi=120)


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_map(report, path) -> None:
    """Bar chart of MAP per measure with the trial-to-trial spread."""
    names = [r.name for r in report.results]
    maps = np.array([r.map for r in report.results])
    spread = np.array([np.std(r.trial_maps) for r in report.results])
    fig, ax = plt.subplots(figsize=(1.2 * len(names) + 2, 3.5))
    ax.bar(range(len(names)), maps, yerr=spread, color="0.6", edgecolor="k", capsize=3)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("MAP")
    _finish(fig, path)


def plot_convergence(table, path) -> None:
    """Max-norm update per sweep on a log scale."""
    deltas = np.asarray(table.deltas)
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    if len(deltas):
        ax.semilogy(np.arange(1, len(deltas) + 1), np.maximum(deltas, 1e-300), "k.-")
    ax.set_xlabel("sweep")
    ax.set_ylabel("max |s_k+1 - s_k|")
    _finish(fig, path)


def plot_topk(result, names, path) -> None:
    labels = [names[node] for node, _, _ in result.ranked]
    means = [m for _, m, _ in result.ranked]
    errs = [e for _, _, e in result.ranked]
    fig, ax = plt.subplots(figsize=(4.5, 0.3 * len(labels) + 1.5))
    ax.barh(range(len(labels)), means, xerr=errs, color="0.6", edgecolor="k")
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlabel("similarity")
    _finish(fig, path)
