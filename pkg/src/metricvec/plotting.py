"""Figure rendering for experiment reports.

Each report kind gets one PNG next to its JSON/CSV output: per-fold
accuracy bars for cross-validation, accuracy-vs-rate curves for the
few-shot sweep, accuracy curves plus fragment-count bars for the
threshold sweep, and per-graph drift scatter for the drift study.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import Report

__all__ = ["plot_cv", "plot_fewshot", "plot_sweep", "plot_drift", "render_report"]


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_cv(report: Report, path: str | Path) -> Path:
    accs = [r["accuracy"] for r in report.runs if r.get("accuracy") is not None]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(len(accs)), accs, color="#4878a8")
    mean = report.aggregate["overall"]["mean"]
    if mean is not None:
        ax.axhline(mean, color="#c44e52", linestyle="--",
                   label=f"mean = {mean:.3f}")
        ax.legend(loc="lower right")
    ax.set_xlabel("fold")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.set_title(f"{report.meta['dataset']['name']}: {len(accs)}-fold CV")
    return _finish(fig, path)


def plot_fewshot(report: Report, path: str | Path) -> Path:
    cells = report.aggregate["by_cell"]
    etas, means, stds = [], [], []
    for key in sorted(cells, key=lambda k: float(k.split("=")[1])):
        cell = cells[key]
        if cell["mean"] is None:
            continue
        etas.append(float(key.split("=")[1]))
        means.append(cell["mean"])
        stds.append(cell["std"])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.errorbar(etas, means, yerr=stds, marker="o", color="#4878a8", capsize=3)
    ax.set_xlabel("training sampling rate")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.set_title(f"{report.meta['dataset']['name']}: few-shot sweep")
    return _finish(fig, path)


def plot_sweep(report: Report, path: str | Path) -> Path:
    by_clf: dict[str, list[tuple[float, float]]] = {}
    counts: dict[float, int] = {}
    for r in report.runs:
        counts[r["theta"]] = r["fragment_count"]
        if r.get("accuracy") is not None:
            by_clf.setdefault(r["classifier"], []).append((r["theta"], r["accuracy"]))
    fig, ax = plt.subplots(figsize=(6.5, 4))
    thetas = sorted(counts)
    ax2 = ax.twinx()
    width = min(np.diff(thetas).min() if len(thetas) > 1 else 0.05, 0.05) * 0.8
    ax2.bar(thetas, [counts[t] for t in thetas], width=width, alpha=0.25,
            color="#4878a8", label="fragments")
    ax2.set_ylabel("frequent fragments")
    for kind, pts in sorted(by_clf.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=kind)
    ax.set_xlabel("support threshold")
    ax.set_ylabel("CV accuracy")
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower left")
    ax.set_title(f"{report.meta['dataset']['name']}: threshold sweep")
    return _finish(fig, path)


def plot_drift(report: Report, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    etas = sorted({r["eta"] for r in report.runs if r.get("eta") is not None})
    cmap = plt.get_cmap("viridis")
    for idx, eta in enumerate(etas):
        per_graph: list[list[float]] = []
        for r in report.runs:
            if r.get("eta") == eta and r.get("per_graph_drift"):
                per_graph.append(r["per_graph_drift"])
        if not per_graph:
            continue
        mean_per_graph = np.mean(np.asarray(per_graph), axis=0)
        ax.scatter(
            range(len(mean_per_graph)), mean_per_graph, s=8,
            color=cmap(idx / max(len(etas) - 1, 1)), label=f"eta={eta:g}",
        )
    ax.set_xlabel("graph index")
    ax.set_ylabel(f"distance to eta={report.meta.get('reference_eta', '?'):g} profile")
    ax.legend(markerscale=2)
    ax.set_title(f"{report.meta['dataset']['name']}: profile drift")
    return _finish(fig, path)


def render_report(report: Report, out_dir: str | Path) -> Path | None:
    """Dispatch on the report's experiment kind; returns the figure path."""
    out_dir = Path(out_dir)
    kind = report.meta.get("experiment")
    if kind == "cv":
        return plot_cv(report, out_dir / "cv_accuracy.png")
    if kind == "fewshot":
        return plot_fewshot(report, out_dir / "fewshot_accuracy.png")
    if kind == "minsup_sweep":
        return plot_sweep(report, out_dir / "minsup_sweep.png")
    if kind == "drift":
        return plot_drift(report, out_dir / "drift.png")
    return None
