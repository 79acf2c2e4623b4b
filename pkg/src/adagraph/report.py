"""Figure rendering for run directories: accuracy bars, stream curves and
auxiliary-count sweeps, written next to the CSV they summarize."""

from __future__ import annotations

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def render_pda_figure(results_csv: str, out_path: str | None = None) -> str:
    """Bar chart of mean accuracy per variant."""
    rows = _read_csv(results_csv)
    by_variant = defaultdict(list)
    for r in rows:
        by_variant[r["variant"]].append(float(r["accuracy"]))
    variants = sorted(by_variant)
    means = [sum(by_variant[v]) / len(by_variant[v]) for v in variants]
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(variants), 4))
    ax.bar(range(len(variants)), means, color="tab:blue")
    ax.set_xticks(range(len(variants)))
    ax.set_xticklabels(variants, rotation=30, ha="right")
    ax.set_ylabel("mean accuracy")
    ax.set_ylim(0, 1)
    for i, m in enumerate(means):
        ax.text(i, m + 0.01, f"{m:.3f}", ha="center", fontsize=8)
    fig.tight_layout()
    out = out_path or os.path.join(os.path.dirname(results_csv), "accuracy.png")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_stream_figure(stream_csv: str, out_path: str | None = None) -> str:
    """Cumulative accuracy over the stream."""
    rows = _read_csv(stream_csv)
    idx = [int(r["idx"]) for r in rows]
    cum = [float(r["cum_acc"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(idx, cum, lw=1.2)
    ax.set_xlabel("stream position")
    ax.set_ylabel("cumulative accuracy")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    out = out_path or os.path.splitext(stream_csv)[0] + ".png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_sweep_figure(sweep_csv: str, out_path: str | None = None) -> str:
    """Mean accuracy (with std band) vs number of auxiliary domains."""
    rows = _read_csv(sweep_csv)
    counts = [int(r["count"]) for r in rows]
    means = [float(r["mean_accuracy"]) for r in rows]
    stds = [float(r["std_accuracy"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(counts, means, yerr=stds, marker="o", capsize=3)
    ax.set_xlabel("auxiliary domains")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    out = out_path or os.path.splitext(sweep_csv)[0] + ".png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
