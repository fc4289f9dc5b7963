"""Figures for search runs."""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_COLORS = {"correct": "tab:green", "incorrect": "tab:red", "incorrect-added": "tab:orange",
           "incorrect-untraced": "tab:purple", "unknown": "tab:gray"}


def read_log(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def plot_search_progress(log: list[dict], out: str | Path, title: str | None = None) -> Path:
    """Candidates left after each oracle call, one marker per verdict."""
    out = Path(out)
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    xs = [e["iteration"] for e in log]
    ys = [e["candidatesRemaining"] for e in log]
    ax.step(xs, ys, where="post", color="black", linewidth=1, zorder=1)
    for verdict in dict.fromkeys(e["verdict"] for e in log):
        pts = [(e["iteration"], e["candidatesRemaining"]) for e in log if e["verdict"] == verdict]
        ax.scatter(*zip(*pts), label=verdict, color=_COLORS.get(verdict, "tab:blue"), zorder=2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("candidates remaining")
    ax.set_ylim(bottom=0)
    if xs:
        ax.set_xticks(range(1, max(xs) + 1, max(1, max(xs) // 10)))
    if title:
        ax.set_title(title)
    if log:
        ax.legend(fontsize="small")
    fig.tight_layout()
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)
    return out
