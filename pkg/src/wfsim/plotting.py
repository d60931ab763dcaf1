"""SVG rendering of sweep results.

Line charts carry one series per result; heatmaps use a diverging map
centred on zero (red favours the nurse-driven workflow, blue the
doctor-driven one).  Every heatmap cell is its own rectangle with
``gid="cell_<i>_<j>"`` so the file can be inspected structurally.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib import colors  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .sweep import SweepResult, write_atomic  # noqa: E402

__all__ = ["emit_plot", "heatmap_norm", "CMAP"]

CMAP = "RdBu_r"
_LABELS = {
    "nurse_capacity": "Nurse capacity (patients/day)",
    "alert_read_prob": "Probability an alert is read",
    "specialist_capacity": "Specialist capacity (patients/day)",
    "cutoff": "Model cutoff",
    "auroc": "Model AUROC",
}


def _label(name: str) -> str:
    return _LABELS.get(name, name.replace("_", " "))


def heatmap_norm(values) -> colors.Normalize:
    import numpy as np

    span = float(np.max(np.abs(values))) if np.size(values) else 0.0
    span = span or 1.0  # all-zero grid still maps to the midpoint
    return colors.TwoSlopeNorm(vcenter=0.0, vmin=-span, vmax=span)


def _render(results: Sequence[SweepResult]) -> str:
    with plt.rc_context({"svg.hashsalt": "wfsim", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        first = results[0]
        if first.axis2 is None:
            for k, res in enumerate(results):
                line, caps, bars = ax.errorbar(
                    list(res.axis1.values), res.mean, yerr=res.stderr, marker="o",
                    capsize=3, label=res.label or f"series {k}",
                )
                line.set_gid(f"series_{k}")
                for a in (*caps, *bars):
                    a.set_gid(f"series_{k}_err")
            ax.set_xlabel(_label(first.axis1.name))
            ax.set_ylabel("Relative achieved utility (%)")
            ax.legend()
        else:
            norm = heatmap_norm(first.mean)
            cmap = plt.get_cmap(CMAP)
            n1, n2 = first.mean.shape
            for i in range(n1):
                for j in range(n2):
                    v = float(first.mean[i, j])
                    ax.add_patch(Rectangle((j, i), 1, 1, facecolor=cmap(norm(v)), edgecolor="white", gid=f"cell_{i}_{j}"))
                    ax.text(j + 0.5, i + 0.5, f"{v:.1f}", ha="center", va="center", fontsize=7)
            ax.set_xlim(0, n2)
            ax.set_ylim(0, n1)
            ax.set_xticks([j + 0.5 for j in range(n2)], [f"{b:g}" for b in first.axis2.values])
            ax.set_yticks([i + 0.5 for i in range(n1)], [f"{a:g}" for a in first.axis1.values])
            ax.set_xlabel(_label(first.axis2.name))
            ax.set_ylabel(_label(first.axis1.name))
            fig.colorbar(plt.cm.ScalarMappable(norm=norm, cmap=cmap), ax=ax, label="Incremental gain (pp)")
        ax.set_title(first.label.replace("_", " "))
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def emit_plot(results: SweepResult | Sequence[SweepResult], destination) -> Path:
    """Write an SVG line chart (1-D results) or heatmap (first 2-D result)."""
    if isinstance(results, SweepResult):
        results = [results]
    results = list(results)
    if not results:
        raise ValueError("nothing to plot")
    return write_atomic(Path(destination), _render(results))
