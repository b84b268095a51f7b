"""Figure rendering for cluster and simulation reports (Agg backend, PNG)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SHAPE_COLORS = {
    "circle": "#1b9e77",
    "ellipse": "#d95f02",
    "rectangle": "#7570b3",
    "polygon": "#e7298a",
    "adaptive": "#66a61e",
    "no-cluster": "#666666",
}

_SAVEFIG_KW = {"dpi": 150, "metadata": {"Software": None}}  # keep PNGs byte-reproducible


def save_cluster_size_pdf(pdf: dict[int, float], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    sizes = sorted(pdf)
    ax.bar(sizes, [pdf[s] for s in sizes], color="#1b9e77", edgecolor="black", linewidth=0.5)
    ax.set_xlabel("cluster size [members]")
    ax.set_ylabel("probability density")
    ax.set_title("Cluster sizes over all frames")
    if sizes:
        ax.set_xticks(sizes)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def save_metric_cdf(values_by_kind: dict[str, list[float]], xlabel: str, title: str,
                    path, logx: bool = False) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for kind in sorted(values_by_kind):
        values = np.sort(np.asarray(values_by_kind[kind], dtype=float))
        if values.size == 0:
            continue
        cdf = np.arange(1, values.size + 1) / values.size
        ax.step(values, cdf, where="post", label=kind,
                color=SHAPE_COLORS.get(kind, "black"))
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def save_bytes_per_second(series_by_policy: dict[str, list[int]], path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    policies = [p for p in series_by_policy if series_by_policy[p]]
    data = [series_by_policy[p] for p in policies]
    if data:
        box = ax.boxplot(data, tick_labels=policies, patch_artist=True, showfliers=False)
        for patch, p in zip(box["boxes"], policies):
            patch.set_facecolor(SHAPE_COLORS.get(p, "#cccccc"))
    ax.set_ylabel("data sent [bytes/s]")
    ax.set_title("Per-second bytes transmitted per configuration")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def save_shape_choices(choices_by_size: dict[int, dict[str, int]], path) -> None:
    """Stacked shares of the adaptive algorithm's shape choices per cluster size."""
    fig, ax = plt.subplots(figsize=(6, 4))
    sizes = sorted(choices_by_size)
    kinds = ("rectangle", "circle", "ellipse", "polygon")
    bottoms = np.zeros(len(sizes))
    for kind in kinds:
        shares = []
        for s in sizes:
            total = sum(choices_by_size[s].values())
            shares.append(choices_by_size[s].get(kind, 0) / total if total else 0.0)
        ax.bar(sizes, shares, bottom=bottoms, label=kind, color=SHAPE_COLORS[kind])
        bottoms += np.asarray(shares)
    ax.set_xlabel("cluster size [members]")
    ax.set_ylabel("share of choices")
    ax.set_title("Adaptive shape choice by cluster size")
    if sizes:
        ax.set_xticks(sizes)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)
