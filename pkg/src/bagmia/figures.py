"""Figure rendering for evaluation reports.

Each report's correct-prediction histogram is rendered next to its CSV
sidecar, and the comparison stage gets a grouped bar chart of threshold
counts per attack. All rendering uses the Agg backend so the pipeline
stays headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvaluationReport


def save_histogram_figure(report: EvaluationReport, path) -> Path:
    """Bar chart of correct-prediction counts across target models."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4))
    values = np.arange(report.histogram.size)
    ax.bar(values, report.histogram, width=1.0, color="#4878a8", edgecolor="none")
    ax.axvline(report.n_targets / 2, color="#b04030", linestyle=":", linewidth=1.2,
               label=f"random-guess mean ({report.n_targets / 2:g})")
    ax.set_xlabel(f"correct membership predictions (of {report.n_targets} target models)")
    ax.set_ylabel("number of points")
    ax.set_title(f"{report.attack_name}: mean AUC {report.mean_auc:.3f}")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_threshold_figure(reports: list[EvaluationReport], path) -> Path:
    """Grouped bars: points at or above each accuracy threshold, per attack."""
    path = Path(path)
    thresholds = reports[0].thresholds
    names = [r.attack_name for r in reports]
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(names), 4))
    positions = np.arange(len(names))
    width = 0.8 / len(thresholds)
    for idx, t in enumerate(thresholds):
        counts = [r.threshold_counts[t] for r in reports]
        ax.bar(positions + idx * width, counts, width=width, label=f">= {t:g}%")
    ax.set_xticks(positions + 0.4 - width / 2)
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("points at or above threshold")
    ax.set_title("vulnerable points by attack")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
