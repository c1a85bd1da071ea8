"""Report figures. Everything renders off-screen to PNG files."""

from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (np.sqrt(5) - 1.0) / 2.0
COLUMN_WIDTH = 5.0

PALETTE = ["#08589e", "#e6550d", "#31a354", "#756bb1", "#636363", "#de2d26"]

RC = {
    "axes.prop_cycle": matplotlib.cycler(color=PALETTE),
    "axes.grid": True,
    "grid.linestyle": "--",
    "grid.linewidth": 0.4,
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "figure.figsize": (COLUMN_WIDTH, COLUMN_WIDTH * GOLDEN),
    "figure.constrained_layout.use": True,
    "savefig.dpi": 150,
}


@contextmanager
def figure(path, **kwargs):
    """Yield ``(fig, ax)`` under the report style and save to ``path`` on exit."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(**kwargs)
        try:
            yield fig, ax
            fig.savefig(path)
        finally:
            plt.close(fig)


def _matrix_from_rows(rows: Sequence[Mapping], key: str):
    windows = sorted({r["window"] for r in rows})
    entities = list(dict.fromkeys(r["entity"] for r in rows))
    col = {e: i for i, e in enumerate(entities)}
    M = np.full((len(windows), len(entities)), np.nan)
    pos = {w: i for i, w in enumerate(windows)}
    for r in rows:
        M[pos[r["window"]], col[r["entity"]]] = r[key]
    return windows, entities, M


def plot_risk_heatmap(rows: Sequence[Mapping], path, key: str = "mean", title: str | None = None) -> Path:
    """Entity x window heat map of snapshot means (or variances)."""
    windows, entities, M = _matrix_from_rows(rows, key)
    height = max(COLUMN_WIDTH * GOLDEN, 0.18 * len(entities) + 1.0)
    with figure(path, figsize=(COLUMN_WIDTH, height)) as (fig, ax):
        im = ax.imshow(M.T, aspect="auto", interpolation="nearest", cmap="viridis",
                       extent=(windows[0] - 0.5, windows[-1] + 0.5, len(entities) - 0.5, -0.5))
        ax.grid(False)
        ax.set_xlabel("graph window")
        ax.set_yticks(range(len(entities)))
        ax.set_yticklabels(entities, fontsize=6)
        fig.colorbar(im, ax=ax, label=f"risk {key}")
        ax.set_title(title or f"risk {key} per entity")
    return Path(path)


def plot_risk_traces(rows: Sequence[Mapping], path, entities: Sequence[str] | None = None, max_lines: int = 8) -> Path:
    """Mean risk over time with a one-sigma band, one line per entity."""
    windows, names, M = _matrix_from_rows(rows, "mean")
    _, _, V = _matrix_from_rows(rows, "variance")
    if entities is None:
        order = np.argsort(-np.nan_to_num(M[-1]))
        entities = [names[i] for i in order[:max_lines]]
    with figure(path) as (fig, ax):
        for name in entities:
            j = names.index(name)
            sd = np.sqrt(np.clip(V[:, j], 0, None))
            ax.plot(windows, M[:, j], label=name)
            ax.fill_between(windows, M[:, j] - sd, M[:, j] + sd, alpha=0.2)
        ax.set_xlabel("graph window")
        ax.set_ylabel("mean risk")
        ax.legend(ncol=2)
    return Path(path)


def plot_graph(ids: Sequence[str], weights: np.ndarray, path, title: str = "connectivity") -> Path:
    n = len(ids)
    side = max(COLUMN_WIDTH * 0.8, 0.2 * n + 1.5)
    with figure(path, figsize=(side + 1.0, side)) as (fig, ax):
        im = ax.imshow(weights, vmin=0.0, vmax=1.0, cmap="magma_r", interpolation="nearest")
        ax.grid(False)
        if n <= 60:
            ax.set_xticks(range(n))
            ax.set_yticks(range(n))
            ax.set_xticklabels(ids, rotation=90, fontsize=5)
            ax.set_yticklabels(ids, fontsize=5)
        fig.colorbar(im, ax=ax, label="|correlation|")
        ax.set_title(title)
    return Path(path)


def plot_roc(curves: Mapping[str, tuple[Sequence[float], Sequence[float], float]], path, title: str = "ROC") -> Path:
    """``curves`` maps a label to ``(fpr, tpr, auc)``."""
    with figure(path, figsize=(COLUMN_WIDTH * 0.8, COLUMN_WIDTH * 0.8)) as (fig, ax):
        for label, (fpr, tpr, auc) in curves.items():
            ax.plot(fpr, tpr, drawstyle="default", label=f"{label} (AUC {auc:.3f})")
        ax.plot([0, 1], [0, 1], color="0.6", linestyle=":", linewidth=0.8)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_title(title)
        ax.legend(loc="lower right")
    return Path(path)


def plot_comparison(rows: Sequence[Mapping], path, metric: str = "val_peak_ba") -> Path:
    """Grouped bars of NRE vs FBNSI per connection parameter."""
    rows = [r for r in rows if r.get(f"nre_{metric}") not in (None, "")]
    names = [r["param"] for r in rows]
    x = np.arange(len(names))
    width = 0.38
    with figure(path, figsize=(max(COLUMN_WIDTH, 0.45 * len(names) + 1.5), COLUMN_WIDTH * GOLDEN + 0.8)) as (fig, ax):
        ax.bar(x - width / 2, [float(r[f"nre_{metric}"]) for r in rows], width, label="NRE")
        ax.bar(x + width / 2, [float(r[f"fbnsi_{metric}"]) if r.get(f"fbnsi_{metric}") not in (None, "") else np.nan
                               for r in rows], width, label="FBNSI")
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=45, ha="right")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel(metric.replace("_", " "))
        ax.legend()
    return Path(path)


def plot_routes(rows: Sequence[Mapping], path, source: str | None = None) -> Path:
    """Bottleneck risk per destination, lowest first."""
    rows = sorted(rows, key=lambda r: (float(r["path_risk"]), r["destination"]))
    with figure(path, figsize=(COLUMN_WIDTH, max(COLUMN_WIDTH * GOLDEN, 0.2 * len(rows) + 1.0))) as (fig, ax):
        y = np.arange(len(rows))
        ax.barh(y, [float(r["path_risk"]) for r in rows], color=PALETTE[0])
        ax.set_yticks(y)
        ax.set_yticklabels([r["destination"] for r in rows], fontsize=6)
        ax.invert_yaxis()
        ax.set_xlabel("path risk (max node risk)")
        ax.set_title(f"min-max routes from {source}" if source else "min-max routes")
    return Path(path)
