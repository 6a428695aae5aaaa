"""Static SVG figures rendered next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_META = {"Date": None}  # keep SVG output reproducible


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def line_plot(path, x, series: dict, xlabel: str, title: str, logy: bool = False):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, y in series.items():
        ax.plot(x, y, lw=1.2, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def histogram(path, values, xlabel: str, title: str, bins: int = 30):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.hist(values, bins=bins, color="#4878d0", edgecolor="black", lw=0.4)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    _save(fig, path)


def scatter(path, x, y, labels, xlabel: str, ylabel: str, title: str):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    uniq = sorted(set(labels))
    for lab in uniq:
        xs = [a for a, l in zip(x, labels) if l == lab]
        ys = [b for b, l in zip(y, labels) if l == lab]
        ax.scatter(xs, ys, s=22, label=lab)
    ax.axhline(0.0, color="gray", lw=0.6)
    ax.axvline(0.0, color="gray", lw=0.6)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)
