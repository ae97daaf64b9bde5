"""Figures for sweep CSVs: accuracy against the swept axis, one line per rule."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import SWEEP_AXIS  # noqa: E402

AXIS_LABELS = {
    "true_snr_db": "SNR (dB)",
    "M": "sample size M",
    "jitter_deg": "phase jitter bound (deg)",
}
RULE_LABELS = {"rck": "rcK", "rcks": "rcKS", "ks": "KS", "kuiper": "K", "cm": "Cm", "ml": "ML"}


def plot_sweep(rows: list[dict], sweep: str, path: str | Path, title: str | None = None):
    """Render ``p_correct`` with 2-stderr bars; exact values as open markers.

    Returns the figure so callers can tweak it before it is garbage collected.
    """
    axis = SWEEP_AXIS[sweep]
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    series: dict[tuple[str, str], list[dict]] = {}
    for row in rows:
        series.setdefault((row["rule"], row["feature"]), []).append(row)
    for (rule, feature), pts in series.items():
        pts = sorted(pts, key=lambda r: r[axis])
        xs = [p[axis] for p in pts]
        label = RULE_LABELS.get(rule, rule) + (" (mag)" if feature == "mag" else "")
        line = ax.errorbar(xs, [p["p_correct"] for p in pts],
                           yerr=[2 * p["stderr"] for p in pts], marker="o", ms=3,
                           capsize=2, label=label)
        exact = [(p[axis], p["p_correct_exact"]) for p in pts if p.get("p_correct_exact") is not None]
        if exact:
            ax.plot(*zip(*exact), ls="none", marker="s", mfc="none", ms=7,
                    color=line[0].get_color(), label=label + " (an.)")
    ax.set_xlabel(AXIS_LABELS[axis])
    ax.set_ylabel("probability of correct classification")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return fig
