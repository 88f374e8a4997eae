"""Figures for evaluation reports, rendered headless to PNG.

Figures are built on bare ``Figure`` objects with the Agg canvas, so no
global pyplot state is touched.  PNG metadata is stripped so reruns are
byte-identical.
"""

import io
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from ._io import atomic_write_bytes
from .features import CATEGORIES

STYLE = {
    "figsize": (4.8, 3.6),
    "dpi": 100,
}
# tableau-ish palette, one colour per annotation set / category
COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2")
SET_LABELS = {"crowd": "crowd", "crowd_subsampled": "crowd (subsampled)", "self": "self"}


def _new_figure(figsize=None):
    fig = Figure(figsize=figsize or STYLE["figsize"], dpi=STYLE["dpi"])
    FigureCanvasAgg(fig)
    return fig


def save_png(fig, path):
    """Render ``fig`` to ``path`` atomically, without timestamp/software metadata."""
    buf = io.BytesIO()
    fig.savefig(buf, format="png", metadata={"Software": None})
    atomic_write_bytes(Path(path), buf.getvalue())


def roc_figure(curves, title=""):
    """Mean ROC curves, one line per annotation set.

    Parameters
    ----------
    curves : dict
        ``{set_name: (fpr, tpr)}``; ``None`` entries are skipped.
    """
    fig = _new_figure()
    ax = fig.add_subplot(1, 1, 1)
    ax.plot([0, 1], [0, 1], color="0.6", lw=0.8, ls="--")
    for (name, curve), color in zip(curves.items(), COLORS):
        if curve is None:
            continue
        fpr, tpr = curve
        area = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
        ax.plot(fpr, tpr, color=color, lw=1.5, label=f"{SET_LABELS.get(name, name)} ({area:.2f})")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title, fontsize=10)
    ax.legend(loc="lower right", fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def weights_figure(shares, title=""):
    """Grouped bars of category weight shares (percent) per annotation set.

    ``shares`` maps set name to ``{category: percent}`` or ``None``.
    """
    sets = [s for s, v in shares.items() if v]
    seen = list(dict.fromkeys(c for s in sets for c in shares[s]))
    cats = [c for c in CATEGORIES if c in seen] + [c for c in seen if c not in CATEGORIES]
    fig = _new_figure()
    ax = fig.add_subplot(1, 1, 1)
    if not sets:
        ax.text(0.5, 0.5, "no nonzero weights", ha="center", va="center", transform=ax.transAxes)
        ax.set_axis_off()
        return fig
    x = np.arange(len(cats))
    width = 0.8 / len(sets)
    for k, (s, color) in enumerate(zip(sets, COLORS)):
        vals = [shares[s].get(c, 0.0) for c in cats]
        ax.bar(x + (k - (len(sets) - 1) / 2) * width, vals, width, color=color, label=SET_LABELS.get(s, s))
    ax.set_xticks(x)
    ax.set_xticklabels(cats, fontsize=8)
    ax.set_ylabel("weight share (%)")
    ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def metric_figure(metrics, ylabel, title=""):
    """Box plot of per-repeat metric values, one box per annotation set."""
    names = [n for n, v in metrics.items() if len(v)]
    fig = _new_figure()
    ax = fig.add_subplot(1, 1, 1)
    ax.boxplot([metrics[n] for n in names], widths=0.5)
    ax.set_xticks(np.arange(1, len(names) + 1))
    ax.set_xticklabels([SET_LABELS.get(n, n) for n in names], fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    return fig
